"""Scenario files: INI-style flat sections parsed with :mod:`configparser`.

Every key is addressed as ``section.key`` (``masses.m1``). Lists are comma
separated. The grammar, defaults and units are documented in
``docs/formats.md``.
"""

import configparser
import dataclasses
import math
import typing
from pathlib import Path

from .cutoff import DENSITY_KINDS
from .lattice import TOPOLOGIES
from .states import MEASURE_KINDS

SUITES = ("verify-operators", "solve-modes", "deform-state", "adiabatic-sweep", "check-spectral-condition")
REQUIRED = object()


class ConfigParseError(ValueError):
    """Malformed file; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        where = f"{path or '<config>'}:{lineno}" if lineno else (path or "<config>")
        super().__init__(f"{where}: {message}")


class ConfigValidationError(ValueError):
    """One or more invalid fields; ``violations`` lists ``(field path, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  {path}: {msg}" for path, msg in self.violations)
        super().__init__(f"{len(self.violations)} invalid field(s):\n{lines}")


@dataclasses.dataclass(frozen=True)
class ScenarioSection:
    name: str = REQUIRED
    seed: int = 12345
    suites: tuple[str, ...] = SUITES


@dataclasses.dataclass(frozen=True)
class LatticeSection:
    n_t: int = 64
    n_x: int = 64
    circumference: float = 2 * math.pi
    courant: float = 1.0
    t_min: float = -3.0
    topology: str = "circle"
    band_t_a: float = 0.5
    band_t_b: float = 1.5
    identity_samples: int = 100
    causality_samples: int = 20
    timeslice_samples: int = 20
    symplectic_samples: int = 50


@dataclasses.dataclass(frozen=True)
class CutoffSection:
    kind: str = "compact-bump"
    order: int = 2
    t_on: float = REQUIRED
    t_off: float = REQUIRED
    scale: float = 1.0


@dataclasses.dataclass(frozen=True)
class MassesSection:
    m1: float = REQUIRED
    m2: float = REQUIRED


@dataclasses.dataclass(frozen=True)
class MeasureSection:
    kind: str = "circle"
    circumference: float = 2 * math.pi
    j_max: int = 32
    k_min: float = 0.0
    k_max: float = 32.0
    panels: int = 16
    order: int = 16
    include_zero_mode: bool = True
    table: tuple[str, ...] = ()
    eps: tuple[float, ...] = (0.5, 0.2, 0.1, 0.05, 0.01)
    expect: str = "pass"


@dataclasses.dataclass(frozen=True)
class ModesSection:
    lambdas: tuple[float, ...] = ()
    count: int = 32
    lambda_min: float = 0.25
    lambda_max: float = 8.0
    n_list: tuple[float, ...] = (1, 2, 4, 8, 16)
    n_report: int = 401
    window_end: float = 1.0
    dyson_order: int = 3
    decay_lambda: float = 1.0
    decay_check: bool = True


@dataclasses.dataclass(frozen=True)
class SweepSection:
    n_list: tuple[float, ...] = (1, 2, 4, 8, 16)
    state_n: float = 4.0
    tau: float = 0.5
    u_t_center: float = 1.0
    u_t_width: float = 1.0
    u_x_center: float = math.pi
    u_x_width: float = 2.0
    v_t_center: float = 1.3
    v_t_width: float = 1.0
    v_x_center: float = math.pi + 0.4
    v_x_width: float = 2.0
    ccr_lattice_n: int = 128
    proxy_n: float = 1.0


@dataclasses.dataclass(frozen=True)
class TolerancesSection:
    identity: float = 1e-9
    timeslice: float = 1e-9
    symplectic: float = 1e-8
    rtol: float = 1e-10
    atol: float = 1e-12
    wronskian: float = 1e-8
    energy_slack: float = 1e-8
    dyson: float = 1e-6
    dyson_adiabaticity: float = 0.1
    beta_ratio: float = 1e-3
    sweep_ratio: float = 1e-4
    ccr: float = 1e-8
    positivity: float = 1e-12
    hermiticity: float = 1e-10
    lattice_ccr: float = 1e-3
    lattice_ccr_refinement: float = 0.5
    spectral_threshold: float = 1e-3
    proxy_p: float = 3.0


@dataclasses.dataclass(frozen=True)
class OutputSection:
    dir: str = "out"


SECTIONS = {
    "scenario": ScenarioSection,
    "lattice": LatticeSection,
    "cutoff": CutoffSection,
    "masses": MassesSection,
    "measure": MeasureSection,
    "modes": ModesSection,
    "sweep": SweepSection,
    "tolerances": TolerancesSection,
    "output": OutputSection,
}


@dataclasses.dataclass(frozen=True)
class Scenario:
    scenario: ScenarioSection
    lattice: LatticeSection
    cutoff: CutoffSection
    masses: MassesSection
    measure: MeasureSection
    modes: ModesSection
    sweep: SweepSection
    tolerances: TolerancesSection
    output: OutputSection

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def mode_lambdas(self) -> tuple[float, ...]:
        m = self.modes
        if m.lambdas:
            return tuple(m.lambdas)
        if m.count == 1:
            return (m.lambda_min,)
        step = (m.lambda_max - m.lambda_min) / (m.count - 1)
        return tuple(m.lambda_min + i * step for i in range(m.count))

    def with_output(self, directory: str) -> "Scenario":
        return dataclasses.replace(self, output=OutputSection(str(directory)))


# ---------------------------------------------------------------------------
# parsing


def _convert(raw: str, typ):
    raw = raw.strip()
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typing.get_origin(typ) is tuple:
        (inner, *_) = typing.get_args(typ)
        items = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(_convert(s, inner) for s in items)
    if typ is int:
        return int(raw)
    if typ is float:
        val = float(raw)
        if not math.isfinite(val):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return val
    return raw


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _read(text: str, path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       strict=True, empty_lines_in_values=False)
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("key outside any [section]", exc.lineno, path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigParseError(exc.message.split(": ", 1)[-1], exc.lineno, path) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigParseError(f"cannot parse line {line.strip()!r} (expected 'key = value')",
                               lineno, path) from None
    return parser


def parse_text(text: str, path: str | None = None) -> Scenario:
    parser = _read(text, path)
    violations = []
    for section in parser.sections():
        if section not in SECTIONS:
            violations.append((section, f"unknown section; expected one of {sorted(SECTIONS)}"))
    built = {}
    for name, cls in SECTIONS.items():
        hints = typing.get_type_hints(cls)
        given = dict(parser.items(name)) if parser.has_section(name) else {}
        kwargs = {}
        for key in given:
            if key not in hints:
                violations.append((f"{name}.{key}", "unknown key"))
        for field in dataclasses.fields(cls):
            path_ = f"{name}.{field.name}"
            if field.name in given:
                try:
                    kwargs[field.name] = _convert(given[field.name], hints[field.name])
                except ValueError as exc:
                    violations.append((path_, str(exc)))
            elif field.default is REQUIRED:
                violations.append((path_, "missing required key"))
        built[name] = (cls, kwargs)
    if violations:
        raise ConfigValidationError(violations)
    scenario = Scenario(**{name: cls(**kwargs) for name, (cls, kwargs) in built.items()})
    validate(scenario)
    return scenario


def parse_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read file ({exc.strerror})", None, str(path)) from None
    return parse_text(text, str(path))


def serialize(scenario: Scenario) -> str:
    out = []
    for name in SECTIONS:
        section = getattr(scenario, name)
        out.append(f"[{name}]")
        for field in dataclasses.fields(section):
            out.append(f"{field.name} = {_format(getattr(section, field.name))}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# validation


def validate(s: Scenario) -> None:
    """Raise ConfigValidationError listing every violated invariant."""
    v = []
    add = lambda path, msg: v.append((path, msg))  # noqa: E731

    for suite in s.scenario.suites:
        if suite not in SUITES:
            add("scenario.suites", f"unknown suite {suite!r}; expected a subset of {SUITES}")
    if not s.scenario.name.strip():
        add("scenario.name", "must not be empty")

    c = s.cutoff
    if c.kind not in DENSITY_KINDS:
        add("cutoff.kind", f"expected one of {DENSITY_KINDS}")
    if not c.t_on < c.t_off:
        add("cutoff.t_on", f"need t_on < t_off ({c.t_on} >= {c.t_off})")
    if c.t_off > 0:
        add("cutoff.t_off", f"need t_off <= 0 so the cutoff equals 1 at t = 0 (got {c.t_off})")
    if not c.scale > 0:
        add("cutoff.scale", "must be positive")
    if c.order < 0:
        add("cutoff.order", "must be >= 0")

    m = s.masses
    for key in ("m1", "m2"):
        if getattr(m, key) < 0:
            add(f"masses.{key}", "must be >= 0")

    lat = s.lattice
    if lat.topology not in TOPOLOGIES:
        add("lattice.topology", f"expected one of {TOPOLOGIES}")
    if lat.n_t < 3:
        add("lattice.n_t", "must be >= 3")
    if lat.n_x < 3:
        add("lattice.n_x", "must be >= 3")
    if not 0 < lat.courant <= 1:
        add("lattice.courant", "dt/dx must lie in (0, 1] (CFL bound)")
    if not lat.circumference > 0:
        add("lattice.circumference", "must be positive")
    for key in ("identity_samples", "causality_samples", "timeslice_samples", "symplectic_samples"):
        if getattr(lat, key) < 1:
            add(f"lattice.{key}", "must be >= 1")
    if lat.n_t >= 3 and lat.n_x >= 3 and lat.courant > 0 and lat.circumference > 0:
        dx = lat.circumference / lat.n_x
        dt = lat.courant * dx
        t_lo, t_hi = lat.t_min + 2 * dt, lat.t_min + (lat.n_t - 3) * dt
        ramp = (c.scale * c.t_on, c.scale * c.t_off)
        if "verify-operators" in s.scenario.suites:
            if ramp[0] < t_lo:
                add("lattice.t_min", f"scaled ramp start {ramp[0]} lies within two slices of the "
                                     f"lattice window start {lat.t_min}")
            if not t_lo < lat.band_t_a < lat.band_t_b < t_hi:
                add("lattice.band_t_a", f"band [{lat.band_t_a}, {lat.band_t_b}] must lie strictly "
                                        f"inside the lattice window interior ({t_lo}, {t_hi})")
            if lat.band_t_a < ramp[1]:
                add("lattice.band_t_a", f"band must lie where the cutoff equals 1 (t >= {ramp[1]})")

    me = s.measure
    if me.kind not in MEASURE_KINDS:
        add("measure.kind", f"expected one of {MEASURE_KINDS}")
    if me.kind == "circle" and me.j_max < 0:
        add("measure.j_max", "must be >= 0")
    if me.kind in ("line", "radial3d") and not 0 <= me.k_min < me.k_max:
        add("measure.k_min", "need 0 <= k_min < k_max")
    if me.kind == "line" and me.k_min == 0:
        add("measure.k_min", "line measure needs k_min > 0")
    if me.kind == "custom":
        if not me.table:
            add("measure.table", "custom measure needs 'lambda:weight' pairs")
        for item in me.table:
            try:
                lam, w = (float(x) for x in item.split(":"))
                if lam < 0 or not w > 0:
                    raise ValueError
            except ValueError:
                add("measure.table", f"bad entry {item!r}; expected 'lambda:weight' with lambda >= 0, weight > 0")
    if any(e <= 0 for e in me.eps) or any(b >= a for a, b in zip(me.eps, me.eps[1:])) or not me.eps:
        add("measure.eps", "must be positive and strictly decreasing")
    if me.expect not in ("pass", "fail"):
        add("measure.expect", "expected 'pass' or 'fail'")

    mo = s.modes
    if mo.count < 1 and not mo.lambdas:
        add("modes.count", "must be >= 1")
    if any(x < 0 for x in mo.lambdas) or mo.lambda_min < 0 or mo.lambda_max < mo.lambda_min:
        add("modes.lambdas", "spatial eigenvalues must be >= 0 (and lambda_min <= lambda_max)")
    if not mo.n_list or any(n <= 0 for n in mo.n_list):
        add("modes.n_list", "scales must be positive")
    if mo.n_report < 2:
        add("modes.n_report", "must be >= 2")
    if mo.window_end < c.t_off * min(mo.n_list or (1,)) * c.scale:
        add("modes.window_end", "window must extend past the end of every scaled ramp")
    if mo.dyson_order < 0:
        add("modes.dyson_order", "must be >= 0")

    sw = s.sweep
    if not sw.n_list or any(n <= 0 for n in sw.n_list):
        add("sweep.n_list", "scales must be positive")
    if sw.state_n <= 0 or sw.proxy_n <= 0:
        add("sweep.state_n", "scales must be positive")
    for key in ("u_t_width", "v_t_width", "u_x_width", "v_x_width"):
        if getattr(sw, key) <= 0:
            add(f"sweep.{key}", "must be positive")
    flat_from = max(c.scale * c.t_off * n for n in (*sw.n_list, sw.state_n)) if sw.n_list else 0.0
    for prefix in ("u", "v"):
        start = getattr(sw, f"{prefix}_t_center") - 0.5 * getattr(sw, f"{prefix}_t_width")
        if start < flat_from:
            add(f"sweep.{prefix}_t_center", f"test-function support starts at {start}, inside the ramp "
                                            f"(cutoff flat only from {flat_from})")
    if sw.ccr_lattice_n < 8:
        add("sweep.ccr_lattice_n", "must be >= 8")

    for field in dataclasses.fields(s.tolerances):
        if not getattr(s.tolerances, field.name) > 0:
            add(f"tolerances.{field.name}", "must be positive")
    if v:
        raise ConfigValidationError(v)
