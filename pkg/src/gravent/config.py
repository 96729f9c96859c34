"""Scenario documents: INI-style sections with unit-suffixed values.

A minimal released-mass document::

    [scenario]
    setup = released
    mass = 100 ug
    omega = 100 kHz
    separation = 3 R
    density = 22.59 g/cm3

    [time]
    stop = 10 s
    samples = 1001

Frequencies are read as ``1/s`` with no factor of 2 pi, so ``100 kHz``
becomes ``omega = 1e5``.  Bare numbers are taken to be SI.  Every
diagnostic carries the line number of the offending entry when it comes
from the document.
"""

from __future__ import annotations

import configparser
import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from gravent import constants as const
from gravent.cvcore import InitialStateSpec
from gravent.dynamics import DEFAULT_RTOL, METHODS, Scenario, Setup
from gravent.environment import LAB_UHV, SPACE, EnvironmentSpec
from gravent.errors import ConfigError

DEFAULT_SAMPLES = 1001
DEFAULT_MAX_POINTS = 10_000
MAX_AXES = 3

_UNITS = {
    "mass": {"kg": 1.0, "g": 1e-3, "mg": 1e-6, "ug": 1e-9, "µg": 1e-9, "μg": 1e-9},
    "frequency": {"1/s": 1.0, "/s": 1.0, "hz": 1.0, "khz": 1e3, "mhz": 1e6},
    "length": {
        "m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9,
    },
    "density": {
        "kg/m3": 1.0, "kg/m^3": 1.0, "g/cm3": 1e3, "g/cm^3": 1e3,
    },
    "number_density": {"1/m3": 1.0, "/m3": 1.0, "1/m^3": 1.0, "/m^3": 1.0, "m^-3": 1.0},
    "temperature": {"k": 1.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6},
    "dimensionless": {},
}
_CASE_SENSITIVE = {"mass", "length", "time"}

# section -> key -> quantity kind ("text", "int", "list" handled specially)
_SCHEMA = {
    "scenario": {
        "setup": "text",
        "mass": "mass",
        "omega": "frequency",
        "separation": "separation",
        "density": "density",
        "nbar": "dimensionless",
        "s_A": "dimensionless",
        "s_B": "dimensionless",
        "Q": "dimensionless",
        "gamma": "frequency",
    },
    "environment": {
        "preset": "text",
        "T": "temperature",
        "gas_density": "number_density",
        "m_air": "mass",
        "f0": "dimensionless",
    },
    "time": {
        "start": "time",
        "stop": "time",
        "samples": "int",
        "times": "time_list",
    },
    "output": {
        "directory": "text",
        "prefix": "text",
        "thresholds": "number_list",
    },
    "feasibility": {
        "target_E": "dimensionless",
        "dx": "length",
        "horizon": "time",
    },
    "solver": {
        "method": "text",
        "rtol": "dimensionless",
    },
}
_SWEEP_RESERVED = {"max_points": "int", "workers": "int"}
_NUMBER = r"[+-]?(?:(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf)"
_QUANTITY_RE = re.compile(rf"^\s*({_NUMBER})\s*(.*?)\s*$")


@dataclass
class Entry:
    value: str
    line: int | None = None


@dataclass
class RawDocument:
    """Section -> key -> raw string with the line it came from."""

    sections: dict[str, dict[str, Entry]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> Entry | None:
        return self.sections.get(section, {}).get(key)

    def set(self, section: str, key: str, value: str, line: int | None = None) -> None:
        self.sections.setdefault(section, {})[key] = Entry(value, line)

    def copy(self) -> "RawDocument":
        return RawDocument(
            {s: {k: Entry(e.value, e.line) for k, e in d.items()} for s, d in self.sections.items()}
        )


@dataclass(frozen=True)
class FeasibilityOptions:
    target_E: float | None = None
    dx: float | None = None
    horizon: float | None = None


@dataclass(frozen=True)
class SweepAxis:
    section: str
    key: str
    values: tuple[str, ...]

    @property
    def name(self) -> str:
        return f"{self.section}.{self.key}"


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[SweepAxis, ...]
    max_points: int = DEFAULT_MAX_POINTS
    workers: int = 1

    @property
    def size(self) -> int:
        return int(np.prod([len(a.values) for a in self.axes])) if self.axes else 0

    def points(self):
        """Axis value tuples in lexicographic order over the axes."""
        return itertools.product(*(a.values for a in self.axes))


@dataclass
class RunConfig:
    """A fully validated document."""

    scenario: Scenario
    environment: EnvironmentSpec
    times: np.ndarray | None
    thresholds: tuple[float, ...]
    output_dir: str
    prefix: str
    feasibility: FeasibilityOptions
    method: str
    rtol: float
    variants: dict[str, Scenario]
    sweep: SweepSpec | None
    raw: RawDocument
    resolved: dict[str, float]


# --- reading ------------------------------------------------------------------


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", stripped)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", stripped)
        if m and section is not None and not line[:1].isspace():
            index.setdefault((section, m.group(1).strip()), n)
    return index


def read_document(text: str) -> RawDocument:
    """Split a document into sections without interpreting values."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, exc.option)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section]", exc.lineno)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line)
    lines = _line_index(text)
    doc = RawDocument()
    for section in parser.sections():
        known = section in _SCHEMA or section in ("variants", "sweep")
        if not known:
            raise ConfigError(f"unknown section [{section}]", _section_line(text, section))
        for key, value in parser.items(section):
            doc.set(section, key, value.strip(), lines.get((section, key)))
    return doc


def _section_line(text: str, section: str) -> int | None:
    for n, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return n
    return None


def apply_overrides(doc: RawDocument, overrides) -> RawDocument:
    """Apply ``section.key=value`` strings on top of a document."""
    doc = doc.copy()
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        target, value = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override {item!r} must name a section, e.g. scenario.mass")
        section, key = target.strip().split(".", 1)
        doc.set(section.strip(), key.strip(), value.strip(), None)
    return doc


# --- values -------------------------------------------------------------------


def parse_quantity(text: str, kind: str, key: str = "", line: int | None = None) -> float:
    """Convert ``"<number> [unit]"`` to SI for the given quantity kind."""
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ConfigError(f"{key}: expected a number, got {text!r}", line, key)
    number, unit = float(m.group(1)), m.group(2)
    if not unit:
        return number
    table = _UNITS[kind]
    lookup = unit if kind in _CASE_SENSITIVE else unit.lower()
    if lookup not in table:
        expected = ", ".join(sorted(table)) or "none"
        raise ConfigError(
            f"{key}: unit {unit!r} does not fit a {kind.replace('_', ' ')} (expected {expected})",
            line,
            key,
        )
    return number * table[lookup]


def _parse_separation(text: str, line, key="separation") -> tuple[str, float]:
    m = re.match(rf"^\s*({_NUMBER})\s*R\s*$", text)
    if m:
        return "ratio", float(m.group(1))
    return "absolute", parse_quantity(text, "length", key, line)


def _parse_int(text: str, key: str, line) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}", line, key) from None


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _check_keys(doc: RawDocument, section: str) -> None:
    allowed = _SCHEMA[section]
    for key, entry in doc.sections.get(section, {}).items():
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in [{section}] (known: {', '.join(allowed)})",
                entry.line,
                key,
            )


def _value(doc, section, key, resolved, default=None, required=False):
    entry = doc.get(section, key)
    if entry is None:
        if required:
            raise ConfigError(f"[{section}] is missing required key {key!r}", key=key)
        return default
    kind = _SCHEMA[section][key]
    if kind == "text":
        return entry.value
    if kind == "int":
        return _parse_int(entry.value, key, entry.line)
    if kind == "separation":
        return _parse_separation(entry.value, entry.line)
    if kind in ("time_list", "number_list"):
        unit_kind = "time" if kind == "time_list" else "dimensionless"
        return [parse_quantity(v, unit_kind, key, entry.line) for v in _split_list(entry.value)]
    value = parse_quantity(entry.value, kind, key, entry.line)
    resolved[f"{section}.{key}"] = value
    return value


def _line_of(doc, section, *keys):
    for key in keys:
        entry = doc.get(section, key)
        if entry is not None and entry.line is not None:
            return entry.line
    return None


# --- building -----------------------------------------------------------------


def _build_scenario(doc: RawDocument, resolved: dict) -> Scenario:
    _check_keys(doc, "scenario")
    if "scenario" not in doc.sections:
        raise ConfigError("missing [scenario] section")
    setup_text = _value(doc, "scenario", "setup", resolved, required=True)
    try:
        setup = Setup(setup_text.lower())
    except ValueError:
        raise ConfigError(
            f"setup must be 'oscillators' or 'released', got {setup_text!r}",
            _line_of(doc, "scenario", "setup"),
            "setup",
        ) from None
    m = _value(doc, "scenario", "mass", resolved, required=True)
    omega = _value(doc, "scenario", "omega", resolved, required=True)
    rule, sep = _value(doc, "scenario", "separation", resolved, required=True)
    density = _value(doc, "scenario", "density", resolved, default=const.OSMIUM_DENSITY)
    nbar = _value(doc, "scenario", "nbar", resolved, default=0.0)
    s_A = _value(doc, "scenario", "s_A", resolved, default=0.0)
    s_B = _value(doc, "scenario", "s_B", resolved, default=0.0)
    Q = _value(doc, "scenario", "Q", resolved)
    gamma = _value(doc, "scenario", "gamma", resolved)

    damping_line = _line_of(doc, "scenario", "gamma", "Q")
    if Q is not None and gamma is not None:
        raise ConfigError("give exactly one of Q and gamma, not both", damping_line, "Q")
    if setup is Setup.OSCILLATORS:
        if Q is None and gamma is None:
            raise ConfigError("oscillators need exactly one of Q or gamma", key="Q")
        if Q is not None:
            if not Q > 0:
                raise ConfigError("Q must be positive (use Q = inf for no damping)", damping_line, "Q")
            gamma = omega / Q
    else:
        if Q is not None or (gamma is not None and gamma != 0):
            raise ConfigError("released masses are undamped; drop Q/gamma", damping_line, "gamma")
        gamma = 0.0

    if density <= 0:
        raise ConfigError("density must be positive", _line_of(doc, "scenario", "density"), "density")
    if m <= 0:
        raise ConfigError("mass must be positive", _line_of(doc, "scenario", "mass"), "mass")
    if rule == "ratio":
        R = (3.0 * m / (4.0 * np.pi * density)) ** (1.0 / 3.0)
        L = sep * R
    else:
        L = sep
    resolved["scenario.separation"] = L
    resolved["scenario.gamma"] = gamma
    try:
        return Scenario(
            setup=setup,
            m=m,
            omega=omega,
            L=L,
            gamma=gamma,
            initial=InitialStateSpec(nbar=nbar, s_A=s_A, s_B=s_B),
            density=density,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(doc, "scenario", "separation", "mass")) from None


def _build_environment(doc: RawDocument, resolved: dict) -> EnvironmentSpec:
    _check_keys(doc, "environment")
    preset = _value(doc, "environment", "preset", resolved, default="lab_uhv")
    presets = {"lab_uhv": LAB_UHV, "space": SPACE}
    if preset.lower() not in presets:
        raise ConfigError(
            f"preset must be one of {sorted(presets)}, got {preset!r}",
            _line_of(doc, "environment", "preset"),
            "preset",
        )
    base = presets[preset.lower()]
    values = {
        "T": _value(doc, "environment", "T", resolved, default=base.T),
        "gas_density": _value(doc, "environment", "gas_density", resolved, default=base.gas_density),
        "m_air": _value(doc, "environment", "m_air", resolved, default=base.m_air),
        "f0": _value(doc, "environment", "f0", resolved, default=base.f0),
    }
    try:
        return EnvironmentSpec(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(doc, "environment", "T", "gas_density", "f0")) from None


def _build_times(doc: RawDocument, resolved: dict) -> np.ndarray | None:
    _check_keys(doc, "time")
    if "time" not in doc.sections:
        return None
    explicit = _value(doc, "time", "times", resolved)
    line = _line_of(doc, "time", "times", "stop", "samples")
    if explicit is not None:
        if any(k in doc.sections["time"] for k in ("start", "stop", "samples")):
            raise ConfigError("give either times or start/stop/samples", line, "times")
        times = np.array(explicit, dtype=float)
    else:
        start = _value(doc, "time", "start", resolved, default=0.0)
        stop = _value(doc, "time", "stop", resolved, required=True)
        samples = _value(doc, "time", "samples", resolved, default=DEFAULT_SAMPLES)
        if samples < 1:
            raise ConfigError("time grid is empty (samples < 1)", line, "samples")
        if stop < start:
            raise ConfigError("stop must not precede start", line, "stop")
        times = np.linspace(start, stop, samples)
    if len(times) == 0:
        raise ConfigError("time grid is empty", line, "times")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ConfigError("times must be non-negative and ascending", line, "times")
    return times


def _build_variants(doc: RawDocument, base: RawDocument) -> dict[str, Scenario]:
    variants = {}
    for name, entry in doc.sections.get("variants", {}).items():
        if not re.match(r"^[A-Za-z0-9_.-]+$", name):
            raise ConfigError(f"variant name {name!r} must be a plain file-name token", entry.line, name)
        sub = base.copy()
        for part in re.split(r"[;,]", entry.value):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"variant {name!r}: expected key=value, got {part!r}", entry.line, name)
            key, value = (s.strip() for s in part.split("=", 1))
            if key not in _SCHEMA["scenario"]:
                raise ConfigError(f"variant {name!r}: unknown scenario key {key!r}", entry.line, key)
            if key in ("Q", "gamma"):
                sub.sections["scenario"].pop("Q", None)
                sub.sections["scenario"].pop("gamma", None)
            sub.set("scenario", key, value, entry.line)
        variants[name] = _build_scenario(sub, {})
    return variants


def _build_sweep(doc: RawDocument) -> SweepSpec | None:
    entries = doc.sections.get("sweep")
    if not entries:
        return None
    axes, options = [], {"max_points": DEFAULT_MAX_POINTS, "workers": 1}
    for key, entry in entries.items():
        if key in _SWEEP_RESERVED:
            options[key] = _parse_int(entry.value, key, entry.line)
            continue
        if "." not in key:
            raise ConfigError(f"sweep axis {key!r} must be section.key", entry.line, key)
        section, name = key.split(".", 1)
        if section not in ("scenario", "environment") or name not in _SCHEMA[section]:
            raise ConfigError(f"unknown sweep parameter {key!r}", entry.line, key)
        if _SCHEMA[section][name] == "text":
            raise ConfigError(f"sweep parameter {key!r} is not numeric", entry.line, key)
        values = tuple(_split_list(entry.value))
        if not values:
            raise ConfigError(f"sweep axis {key!r} has no values", entry.line, key)
        axes.append(SweepAxis(section, name, values))
    if len(axes) > MAX_AXES:
        raise ConfigError(f"at most {MAX_AXES} sweep axes are supported, got {len(axes)}")
    if options["workers"] < 1:
        raise ConfigError("workers must be >= 1", key="workers")
    return SweepSpec(tuple(axes), options["max_points"], options["workers"])


def build(doc: RawDocument) -> RunConfig:
    """Validate a raw document and convert it to SI objects."""
    for section in doc.sections:
        if section not in _SCHEMA and section not in ("variants", "sweep"):
            raise ConfigError(f"unknown section [{section}]", key=section)
    resolved: dict[str, float] = {}
    scenario = _build_scenario(doc, resolved)
    environment = _build_environment(doc, resolved)
    times = _build_times(doc, resolved)
    _check_keys(doc, "output")
    thresholds = tuple(_value(doc, "output", "thresholds", resolved, default=[]))
    _check_keys(doc, "feasibility")
    feas = FeasibilityOptions(
        target_E=_value(doc, "feasibility", "target_E", resolved),
        dx=_value(doc, "feasibility", "dx", resolved),
        horizon=_value(doc, "feasibility", "horizon", resolved),
    )
    _check_keys(doc, "solver")
    method = _value(doc, "solver", "method", resolved, default="auto")
    if method not in METHODS:
        raise ConfigError(
            f"method must be one of {METHODS}, got {method!r}", _line_of(doc, "solver", "method"), "method"
        )
    rtol = _value(doc, "solver", "rtol", resolved, default=DEFAULT_RTOL)
    if not rtol > 0:
        raise ConfigError("rtol must be positive", _line_of(doc, "solver", "rtol"), "rtol")
    return RunConfig(
        scenario=scenario,
        environment=environment,
        times=times,
        thresholds=thresholds,
        output_dir=_value(doc, "output", "directory", resolved, default="."),
        prefix=_value(doc, "output", "prefix", resolved, default="run"),
        feasibility=feas,
        method=method,
        rtol=rtol,
        variants=_build_variants(doc, doc),
        sweep=_build_sweep(doc),
        raw=doc,
        resolved=resolved,
    )


def load(text: str, overrides=None) -> RunConfig:
    return build(apply_overrides(read_document(text), overrides))


def parse_scenario(text: str) -> tuple[Scenario, EnvironmentSpec]:
    """Scenario and environment described by a document."""
    cfg = load(text)
    return cfg.scenario, cfg.environment


def emit_scenario(sc: Scenario, env: EnvironmentSpec | None = None) -> str:
    """Serialise a scenario (and environment) in SI units.

    ``parse_scenario(emit_scenario(sc, env))`` reproduces both objects.
    """
    lines = [
        "[scenario]",
        f"setup = {sc.setup.value}",
        f"mass = {sc.m!r} kg",
        f"omega = {sc.omega!r} 1/s",
        f"separation = {sc.L!r} m",
        f"density = {(sc.density if sc.density is not None else const.OSMIUM_DENSITY)!r} kg/m3",
        f"nbar = {sc.initial.nbar!r}",
        f"s_A = {sc.initial.s_A!r}",
        f"s_B = {sc.initial.s_B!r}",
    ]
    if sc.setup is Setup.OSCILLATORS:
        lines.append(f"gamma = {sc.gamma!r} 1/s")
    if env is not None:
        lines += [
            "",
            "[environment]",
            f"T = {env.T!r} K",
            f"gas_density = {env.gas_density!r} 1/m3",
            f"m_air = {env.m_air!r} kg",
            f"f0 = {env.f0!r}",
        ]
    return "\n".join(lines) + "\n"
