"""``qes`` command: solve, verify and sweep jobs described by a config file.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 a requested level could not be certified.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import calibration, degeneration
from .config import JobConfig, load_config, parse_grid_override
from .errors import ConfigError, EnergyDegenerate, NonNormalizable, NotConfining, QESError
from .models import (
    Family,
    PotentialModel,
    QuasiExactSolution,
    assemble_wavefunction,
    check_normalizable,
    energy_squared,
    has_closed_form_norm,
    norm_integral,
    solve_level,
    upper_radial,
)
from .numeric import RadialGrid, fd_eigensolve, radial_residual

logger = logging.getLogger("qes")

RESIDUAL_TOL = 1e-8
FD_RTOL = 1e-4
NORM_RTOL = 1e-8
ENDPOINT_TOL = 1e-10
EXPECTED_SHIFT = {Family.QUINTIC: 2, Family.SEXTIC: 1}
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def fmt(x) -> str:
    """17 significant digits; ``NA`` for missing values."""
    if x is None:
        return "NA"
    if isinstance(x, (complex, np.complexfloating)):
        if x.imag == 0:
            return fmt(x.real)
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NA"
    return f"{x:.17g}"


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return buf.getvalue()


def write_artifacts(out: Path, files: dict[str, str]) -> None:
    """Write each file through a temporary sibling and an atomic rename."""
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, out / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def template_model(cfg: JobConfig) -> PotentialModel:
    try:
        return PotentialModel(cfg.family, M=cfg.M, m=cfg.m, **cfg.coefficients)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class LevelOutcome:
    n: int
    solutions: list[QuasiExactSolution] = field(default_factory=list)
    best: QuasiExactSolution | None = None
    error: str | None = None


def solve_one(cfg: JobConfig, n: int) -> LevelOutcome:
    """Certified solutions of level ``n``, calibrating first when configured."""
    template = template_model(cfg)
    out = LevelOutcome(n)
    try:
        if cfg.calibration is not None:
            cal = cfg.calibration
            results = calibration.calibrate(
                template, cfg.case, n, free=cal.free, window=cal.window,
                points=cal.points, starts=cal.starts, seed=cal.seed)
            out.solutions = [r.solution for r in results]
            if not results:
                out.error = "no calibrated point in the window"
        else:
            sols = solve_level(template, cfg.case, n)
            out.solutions = [s for s in sols if s.certified]
            out.best = sols[0] if sols else None
            if not out.solutions:
                out.error = "no root set certifies at the given coefficients"
    except QESError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    if out.solutions:
        out.best = out.solutions[0]
    logger.debug("level n=%d: %d certified solution(s)%s", n, len(out.solutions),
                 f"; {out.error}" if out.error else "")
    return out


def solve_levels(cfg: JobConfig, jobs: int) -> list[LevelOutcome]:
    if jobs > 1 and len(cfg.levels) > 1:
        with ProcessPoolExecutor(min(jobs, len(cfg.levels))) as pool:
            return list(pool.map(solve_one, [cfg] * len(cfg.levels), cfg.levels))
    return [solve_one(cfg, n) for n in cfg.levels]


def residual_of(sol: QuasiExactSolution, grid: RadialGrid) -> float:
    return radial_residual(sol.model, assemble_wavefunction(sol), sol.epsilon_squared, grid)


def _normalizable(sol: QuasiExactSolution) -> bool:
    try:
        check_normalizable(sol.reduced)
    except NonNormalizable:
        return False
    return True


def _real_or_na(values: np.ndarray) -> list:
    out = []
    for v in np.atleast_1d(values):
        out.append(v.real if abs(v.imag) <= 1e-12 * max(1.0, abs(v.real)) else complex(v))
    return out


def wavefunction_table(sol: QuasiExactSolution, grid: RadialGrid) -> tuple[str, list[str]]:
    """CSV of (r, phi_lower, phi_upper) and notes on what was omitted or scaled."""
    notes = []
    r = grid.points()
    sampler = assemble_wavefunction(sol)
    scale = 1.0
    if sol.physical and _normalizable(sol):
        try:
            scale = 1.0 / math.sqrt(norm_integral(sol, "quadrature"))
            notes.append("normalized to unit norm under r dr")
        except (QESError, ValueError) as exc:
            notes.append(f"left unnormalized ({type(exc).__name__})")
    else:
        notes.append("left unnormalized")
    lower = _real_or_na(scale * np.asarray(sampler(r), dtype=complex))
    upper: list = [None] * r.size
    if sol.energy_squared < 0:
        notes.append("upper component NA: E^2 < 0")
    else:
        try:
            upper = _real_or_na(scale * np.asarray(upper_radial(sol, sampler)(r), dtype=complex))
        except EnergyDegenerate:
            notes.append("upper component NA: E = M")
    rows = [[ri, lo, up] for ri, lo, up in zip(r, lower, upper)]
    return _csv(["r", "phi_lower", "phi_upper"], rows), notes


def _wave_name(n: int, j: int) -> str:
    return f"wavefunction_n{n}.csv" if j == 0 else f"wavefunction_n{n}_{j}.csv"


def _describe(sol: QuasiExactSolution) -> list[str]:
    coeffs = ", ".join(f"{k}={fmt(v)}" for k, v in sol.model.coefficients().items())
    diff = sol.printed_energy_squared - sol.energy_squared
    lines = [
        f"  coefficients: {coeffs}",
        f"  E^2 = {fmt(sol.energy_squared)}   eps^2 = {fmt(sol.epsilon_squared)}",
        f"  printed closed form E^2 = {fmt(sol.printed_energy_squared)}   "
        f"(printed - primitive = {fmt(diff)})",
        f"  roots: {', '.join(fmt(z) for z in sol.roots.roots) or 'none'}",
        f"  max Bethe residual {fmt(sol.roots.max_bethe_residual)}, "
        f"coefficient constraint residual {fmt(sol.constraint_report.max_residual)}, "
        f"polynomial residual {fmt(sol.polynomial_residual)}",
    ]
    for rel in sol.relations:
        lines.append(f"  relation {rel.name}: {fmt(rel.lhs)} vs {fmt(rel.rhs)} "
                     f"(residual {fmt(rel.residual)})")
    return lines


def cmd_solve(cfg: JobConfig, out: Path, jobs: int = 1, plot_data: bool = False) -> int:
    outcomes = solve_levels(cfg, jobs)
    K = max(cfg.levels, default=0)
    header = (["family", "case", "n", "solution", "E_squared", "epsilon_squared"]
              + [f"root_{i + 1}" for i in range(K)]
              + ["max_bethe_residual", "max_constraint_residual", "radial_residual", "physical_flag"])
    rows, files = [], {}
    long_rows, wave_long = [], []
    report = [f"job: {cfg.source}", f"family {cfg.family.value}, case {cfg.case.value}, "
              f"M={fmt(cfg.M)}, m={cfg.m}", f"levels: {', '.join(map(str, cfg.levels)) or 'none'}", ""]
    status = 0
    for oc in outcomes:
        if not oc.solutions:
            status = 3
            report.append(f"level n={oc.n}: NOT CERTIFIED ({oc.error})")
            if oc.best is not None:
                report.extend(_describe(oc.best))
            report.append("")
            continue
        for j, sol in enumerate(oc.solutions):
            rr = residual_of(sol, cfg.grid)
            roots = list(sol.roots.roots) + [None] * (K - sol.roots.n)
            physical = sol.physical and _normalizable(sol) and rr < RESIDUAL_TOL
            rows.append([cfg.family.value, cfg.case.value, oc.n, j, sol.energy_squared,
                         sol.epsilon_squared, *roots, sol.roots.max_bethe_residual,
                         sol.max_constraint_residual, rr, physical])
            for q, v in (("E_squared", sol.energy_squared), ("epsilon_squared", sol.epsilon_squared),
                         ("radial_residual", rr)):
                long_rows.append([cfg.family.value, cfg.case.value, oc.n, j, q, v])
            text, notes = wavefunction_table(sol, cfg.grid)
            files[_wave_name(oc.n, j)] = text
            if plot_data:
                for rec in csv.reader(io.StringIO(text)):
                    if rec[0] == "r":
                        continue
                    wave_long.append([oc.n, j, rec[0], "phi_lower", rec[1]])
                    wave_long.append([oc.n, j, rec[0], "phi_upper", rec[2]])
            report.append(f"level n={oc.n} solution {j}: certified, radial residual {fmt(rr)}"
                          f"{'' if physical else ' (not physical)'}")
            report.extend(_describe(sol))
            report.append(f"  wavefunction: {_wave_name(oc.n, j)} ({'; '.join(notes)})")
            report.append("")
    files["spectrum.csv"] = _csv(header, rows)
    files["report.txt"] = "\n".join(report).rstrip() + "\n"
    if plot_data:
        files["spectrum_long.csv"] = _csv(["family", "case", "n", "solution", "quantity", "value"],
                                          long_rows)
        files["wavefunction_long.csv"] = _csv(["n", "solution", "r", "component", "value"], wave_long)
    write_artifacts(out, files)
    logger.info("solve: wrote %d file(s) to %s", len(files), out)
    return status


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _fd_check(sol: QuasiExactSolution, cfg: JobConfig) -> Check:
    name = f"n={sol.level} fd"
    try:
        spectrum = fd_eigensolve(sol.model, cfg.fd_grid, k=sol.level + 3, v_cap=cfg.v_cap)
    except NotConfining as exc:
        return Check(name, False, f"NotConfining ({exc})")
    idx, diff = spectrum.nearest(sol.epsilon_squared)
    rel = abs(diff) / max(1.0, abs(sol.epsilon_squared))
    return Check(name, rel <= FD_RTOL,
                 f"eps^2 {fmt(sol.epsilon_squared)} vs FD level {idx} "
                 f"{fmt(spectrum.eigenvalues[idx])} (relative {rel:.3g})")


def _norm_check(sol: QuasiExactSolution) -> Check:
    name = f"n={sol.level} normalization"
    try:
        check_normalizable(sol.reduced)
        quad = norm_integral(sol, "quadrature")
        if has_closed_form_norm(sol.reduced):
            closed = norm_integral(sol, "closed_form")
            rel = abs(closed - quad) / abs(closed)
            return Check(name, rel < NORM_RTOL and closed > 0,
                         f"closed form {fmt(closed)} vs quadrature {fmt(quad)} (relative {rel:.3g})")
        return Check(name, quad > 0 and math.isfinite(quad), f"quadrature {fmt(quad)}")
    except NonNormalizable as exc:
        return Check(name, False, f"NonNormalizable ({exc})")
    except QESError as exc:
        return Check(name, False, f"{type(exc).__name__} ({exc})")


def _degeneration_check(cfg: JobConfig) -> Check:
    name = "degeneration"
    if cfg.family not in EXPECTED_SHIFT:
        return Check(name, False, "only quintic and sextic models degenerate")
    if not cfg.degeneration_path:
        return Check(name, False, "no [degeneration] path configured")
    try:
        rep = degeneration.degeneration_check(template_model(cfg), cfg.degeneration_path,
                                              case=cfg.case, levels=cfg.degeneration_levels,
                                              fd_grid=cfg.fd_grid)
    except QESError as exc:
        return Check(name, False, f"{type(exc).__name__} ({exc})")
    dist = ", ".join(f"{s.scale:g}:{s.spectral_distance:.3e}" for s in rep.steps)
    ok = (rep.monotone and rep.shift == EXPECTED_SHIFT[cfg.family]
          and rep.endpoint_distance < ENDPOINT_TOL)
    return Check(name, ok, f"spectral distances {dist}; monotone={rep.monotone}; "
                 f"shift {rep.shift:+d}; endpoint distance {rep.endpoint_distance:.3g}")


def run_checks(cfg: JobConfig, jobs: int = 1) -> list[Check]:
    checks: list[Check] = []
    for oc in solve_levels(cfg, jobs):
        sol = oc.best
        if sol is None:
            checks.append(Check(f"n={oc.n} certify", False, oc.error or "no solution"))
            continue
        checks.append(Check(f"n={oc.n} certify", sol.certified,
                            "certified" if sol.certified else (oc.error or "not certified")))
        if cfg.verify.residual:
            rr = residual_of(sol, cfg.grid)
            checks.append(Check(f"n={oc.n} residual", rr < RESIDUAL_TOL, f"max relative {rr:.3g}"))
        if cfg.verify.fd:
            checks.append(_fd_check(sol, cfg))
        if cfg.verify.normalization:
            checks.append(_norm_check(sol))
    if cfg.verify.degeneration:
        checks.append(_degeneration_check(cfg))
    return checks


def cmd_verify(cfg: JobConfig, out: Path | None = None, jobs: int = 1) -> int:
    checks = run_checks(cfg, jobs)
    for c in checks:
        print(c.line())
    if out is not None:
        write_artifacts(out, {"verify.txt": "".join(c.line() + "\n" for c in checks)})
    return 0 if all(c.passed for c in checks) else 1


def _sweep_level(cfg: JobConfig, n: int):
    cal = cfg.calibration
    template = template_model(cfg)
    name = cal.free[0]
    lo, hi = cal.window[0]
    values = np.linspace(lo, hi, cal.points)
    e2 = np.full(values.size, math.nan)
    for i, v in enumerate(values):
        try:
            e2[i] = energy_squared(template.replace(**{name: float(v)}), cfg.case, n)
        except QESError:
            pass
    try:
        prof = calibration.constraint_profile(template, cfg.case, n, name, values, (lo, hi))
    except QESError:
        prof = np.full(values.size, math.nan)
    found = calibration.calibrate(template, cfg.case, n, free=name, window=(lo, hi),
                                  points=cal.points, starts=cal.starts, seed=cal.seed)
    return values, e2, prof, found


def cmd_sweep(cfg: JobConfig, out: Path, jobs: int = 1, plot_data: bool = False) -> int:
    cal = cfg.calibration
    if cal is None or cal.window is None:
        raise ConfigError("sweep needs a [calibrate] section with a window")
    if len(cal.free) != 1:
        raise ConfigError("sweep scans exactly one free coefficient")
    name = cal.free[0]
    if jobs > 1 and len(cfg.levels) > 1:
        with ProcessPoolExecutor(min(jobs, len(cfg.levels))) as pool:
            per_level = list(pool.map(_sweep_level, [cfg] * len(cfg.levels), cfg.levels))
    else:
        per_level = [_sweep_level(cfg, n) for n in cfg.levels]
    values = np.linspace(*cal.window[0], cal.points)
    header = [name]
    for n in cfg.levels:
        header += [f"E_squared_n{n}", f"residual_n{n}"]
    rows = []
    for i, v in enumerate(values):
        row = [v]
        for _, e2, prof, _ in per_level:
            row += [e2[i], prof[i]]
        rows.append(row)
    report = [f"job: {cfg.source}", f"sweep of {name} over [{fmt(values[0])}, {fmt(values[-1])}] "
              f"with {values.size} points", ""]
    any_found = False
    for n, (_, _, _, found) in zip(cfg.levels, per_level):
        if not found:
            report.append(f"level n={n}: no calibrated point")
            continue
        any_found = True
        for res in found:
            report.append(f"level n={n}: {name}={fmt(getattr(res.model, name))}, "
                          f"E^2={fmt(res.solution.energy_squared)}, "
                          f"roots {', '.join(fmt(z) for z in res.roots.roots) or 'none'}")
    if not any_found:
        report.append("no calibrated point")
    files = {"calibration.csv": _csv(header, rows), "report.txt": "\n".join(report) + "\n"}
    if plot_data:
        long = []
        for n, (vals, e2, prof, _) in zip(cfg.levels, per_level):
            for v, a, b in zip(vals, e2, prof):
                long.append([v, n, "E_squared", a])
                long.append([v, n, "residual", b])
        files["calibration_long.csv"] = _csv([name, "n", "quantity", "value"], long)
    write_artifacts(out, files)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("solve", "solve the configured levels and write tables"),
                            ("verify", "run the oracle checks and print PASS/FAIL lines"),
                            ("sweep", "scan one free coefficient across its window")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="job configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for independent levels")
        p.add_argument("--grid", help="residual grid override rmin,rmax,count")
        p.add_argument("--plot-data", action="store_true", help="also write long-format CSV files")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("QES_LOG", "info").strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config)
        if args.grid:
            rmin, rmax, count = parse_grid_override(args.grid)
            try:
                cfg = replace(cfg, grid=RadialGrid(rmin, rmax, count, cfg.grid.spacing))
            except ValueError as exc:
                raise ConfigError(f"--grid: {exc}") from None
        template_model(cfg)
        out = Path(args.out)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.jobs, args.plot_data)
        if args.command == "verify":
            return cmd_verify(cfg, out if args.out != "." else None, args.jobs)
        return cmd_sweep(cfg, out, args.jobs, args.plot_data)
    except ConfigError as exc:
        print(f"qes: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
