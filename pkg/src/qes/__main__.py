from qes.cli import main

raise SystemExit(main())
