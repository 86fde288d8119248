"""Job configuration files.

INI-style sections parsed with :mod:`configparser`::

    [job]
    family = quartic          ; cubic | quartic | quintic | sextic
    case = plain              ; oscillator | coulomb | plain
    levels = 0, 1
    M = 1
    m = 0

    [coefficients]
    a = -1
    b = 0.5
    e = -0.5

    [calibrate]               ; optional: tune coefficients per level
    free = e                  ; one name or a comma list
    window = -2, -0.1         ; single free name; else window_<name> = lo, hi
    points = 400
    starts = 96
    seed = 0

    [grid]                    ; residual and wavefunction grid
    rmin = 0.01
    rmax = 10
    count = 200
    spacing = log

    [fd]                      ; finite-difference oracle grid
    rmin = 0.001
    rmax = 15
    count = 4000
    v_cap = 1e6

    [verify]
    residual = yes
    fd = yes
    normalization = yes
    degeneration = no

    [degeneration]
    path = 0.1, 0.01, 0.001   ; factors applied to the extra coefficients
    levels = 3

Unknown sections or keys raise :class:`ConfigError` naming the offender.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .models import ALLOWED_CASES, COEFFICIENT_NAMES, Case, Family, family_coefficients
from .numeric import DEFAULT_FD_GRID, DEFAULT_RESIDUAL_GRID, RadialGrid

_SECTIONS = {
    "job": {"family", "case", "levels", "m", "M"},
    "coefficients": set(COEFFICIENT_NAMES),
    "calibrate": {"free", "window", "points", "starts", "seed"}
    | {f"window_{c}" for c in COEFFICIENT_NAMES},
    "grid": {"rmin", "rmax", "count", "spacing"},
    "fd": {"rmin", "rmax", "count", "v_cap"},
    "verify": {"residual", "fd", "normalization", "degeneration"},
    "degeneration": {"path", "levels"},
}


@dataclass(frozen=True)
class CalibrationSpec:
    free: tuple[str, ...]
    window: tuple[tuple[float, float], ...] | None
    points: int = 400
    starts: int = 96
    seed: int = 0


@dataclass(frozen=True)
class VerifyToggles:
    residual: bool = True
    fd: bool = True
    normalization: bool = True
    degeneration: bool = False


@dataclass(frozen=True)
class JobConfig:
    family: Family
    case: Case
    coefficients: dict[str, float]
    levels: tuple[int, ...]
    M: float = 1.0
    m: int = 0
    calibration: CalibrationSpec | None = None
    grid: RadialGrid = DEFAULT_RESIDUAL_GRID
    fd_grid: RadialGrid = DEFAULT_FD_GRID
    v_cap: float = 1e6
    verify: VerifyToggles = field(default_factory=VerifyToggles)
    degeneration_path: tuple[float, ...] = ()
    degeneration_levels: int = 3
    source: str = ""


def _float(raw: str, key: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.replace(";", ",").split(",") if tok.strip()]


def _pair(raw: str, key: str) -> tuple[float, float]:
    items = _list(raw)
    if len(items) != 2:
        raise ConfigError(f"{key}: expected 'lo, hi'")
    lo, hi = (_float(x, key) for x in items)
    if not lo < hi:
        raise ConfigError(f"{key}: empty window [{lo}, {hi}]")
    return lo, hi


def _bool(section: configparser.SectionProxy, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, fallback=default)
    except ValueError:
        raise ConfigError(f"verify.{key}: expected yes/no") from None


def parse_grid_override(raw: str) -> tuple[float, float, int]:
    """Parse the ``rmin,rmax,count`` command-line form."""
    items = _list(raw)
    if len(items) != 3:
        raise ConfigError("--grid expects rmin,rmax,count")
    return _float(items[0], "--grid rmin"), _float(items[1], "--grid rmax"), _int(items[2], "--grid count")


def _grid(section, default: RadialGrid, label: str) -> RadialGrid:
    if section is None:
        return default
    try:
        return RadialGrid(
            _float(section.get("rmin", str(default.r_min)), f"{label}.rmin"),
            _float(section.get("rmax", str(default.r_max)), f"{label}.rmax"),
            _int(section.get("count", str(default.count)), f"{label}.count"),
            section.get("spacing", default.spacing),
        )
    except ValueError as exc:
        raise ConfigError(f"{label}: {exc}") from None


def parse_config(text: str, source: str = "<string>") -> JobConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # M and m differ
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        for key in parser[name]:
            if name != "coefficients" and key not in _SECTIONS[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
    if "job" not in parser:
        raise ConfigError("missing [job] section")
    job = parser["job"]

    try:
        family = Family(job.get("family", "").strip().lower())
    except ValueError:
        raise ConfigError(f"job.family: unknown family {job.get('family')!r}") from None
    if "case" in job:
        try:
            case = Case(job["case"].strip().lower())
        except ValueError:
            raise ConfigError(f"job.case: unknown case {job['case']!r}") from None
    else:
        case = ALLOWED_CASES[family][0]
    if case not in ALLOWED_CASES[family]:
        raise ConfigError(f"job.case: {case.value} is not available for the {family.value} family")

    levels = tuple(_int(x, "job.levels") for x in _list(job.get("levels", "0")))
    if any(n < 0 for n in levels):
        raise ConfigError("job.levels: levels must be non-negative")
    M = _float(job.get("M", "1"), "job.M")
    if M <= 0:
        raise ConfigError("job.M: mass must be positive")
    m = _int(job.get("m", "0"), "job.m")

    allowed = set(family_coefficients(family))
    coefficients: dict[str, float] = {}
    if "coefficients" in parser:
        for key, raw in parser["coefficients"].items():
            if key not in allowed:
                raise ConfigError(f"unknown coefficient key {key!r} for the {family.value} family")
            coefficients[key] = _float(raw, f"coefficients.{key}")

    calibration = None
    if "calibrate" in parser:
        sec = parser["calibrate"]
        free = tuple(_list(sec.get("free", "")))
        if not free:
            raise ConfigError("calibrate.free: name at least one coefficient")
        for name in free:
            if name not in allowed:
                raise ConfigError(f"calibrate.free: unknown coefficient key {name!r}")
        window = None
        if "window" in sec:
            if len(free) != 1:
                raise ConfigError("calibrate.window: use window_<name> with several free coefficients")
            window = (_pair(sec["window"], "calibrate.window"),)
        elif any(f"window_{name}" in sec for name in free):
            missing = [name for name in free if f"window_{name}" not in sec]
            if missing:
                raise ConfigError(f"calibrate: missing window_{missing[0]}")
            window = tuple(_pair(sec[f"window_{name}"], f"calibrate.window_{name}") for name in free)
        calibration = CalibrationSpec(
            free, window,
            points=_int(sec.get("points", "400"), "calibrate.points"),
            starts=_int(sec.get("starts", "96"), "calibrate.starts"),
            seed=_int(sec.get("seed", "0"), "calibrate.seed"),
        )

    fd_sec = parser["fd"] if "fd" in parser else None
    toggles = VerifyToggles()
    if "verify" in parser:
        sec = parser["verify"]
        toggles = VerifyToggles(*(_bool(sec, k, getattr(toggles, k))
                                  for k in ("residual", "fd", "normalization", "degeneration")))
    path: tuple[float, ...] = ()
    deg_levels = 3
    if "degeneration" in parser:
        sec = parser["degeneration"]
        path = tuple(_float(x, "degeneration.path") for x in _list(sec.get("path", "")))
        deg_levels = _int(sec.get("levels", "3"), "degeneration.levels")

    return JobConfig(
        family=family, case=case, coefficients=coefficients, levels=levels, M=M, m=m,
        calibration=calibration,
        grid=_grid(parser["grid"] if "grid" in parser else None, DEFAULT_RESIDUAL_GRID, "grid"),
        fd_grid=_grid(fd_sec, DEFAULT_FD_GRID, "fd"),
        v_cap=_float(fd_sec.get("v_cap", "1e6"), "fd.v_cap") if fd_sec is not None else 1e6,
        verify=toggles, degeneration_path=path, degeneration_levels=deg_levels, source=source,
    )


def load_config(path: str | Path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
