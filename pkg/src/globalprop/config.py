"""Sectioned ``key = value`` run configuration.

Example::

    [model]
    mass = 10
    surface1 = 0, 0, -5, 0.5, 1
    surface2 = 0, 0, 0, 0, 0.2

    [time]
    t_physical = 45
    t_total = 50
    n_samples = 4096

    [pulse1]
    amplitude = 0.05
    omega = omega1
    center = 23.5
    width = 3.9

``#`` starts a comment. Pulse sections are ``pulse1``, ``pulse2``, ... and
``omega`` accepts a number or the symbols ``omega1`` / ``omega2`` (the
resonant carriers of the computed basis). Unknown sections or keys are
rejected with the offending line number.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError
from .molecular import (
    AbsorberSpec,
    ModelHamiltonian,
    Pulse,
    PulseSet,
    RadialGrid,
    SurfaceSpec,
    build_basis,
    resonance_frequencies,
)
from .signal import make_time_grid
from .waveop import DrivenSystem

__all__ = [
    "ModelSection",
    "TimeSection",
    "AbsorberSection",
    "PulseEntry",
    "SolverSection",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize",
    "config_hash",
    "builtin_config",
    "BuiltModel",
    "build_model",
]


@dataclass(frozen=True)
class ModelSection:
    mass: float
    surface1: tuple
    surface2: tuple
    dipole: float = 1.0
    r_min: float = -4.5
    r_max: float = 4.5
    n_points: int = 256
    n_keep: int = 30
    initial_state: int = 1


@dataclass(frozen=True)
class TimeSection:
    t_physical: float
    t_total: float
    n_samples: int


@dataclass(frozen=True)
class AbsorberSection:
    shape: str = "gaussian"
    integral: float = 40.0
    width: float = 0.08


@dataclass(frozen=True)
class PulseEntry:
    amplitude: float
    omega: object  # float or "omega1" / "omega2"
    center: float
    width: float


@dataclass(frozen=True)
class SolverSection:
    tol: float = 1e-16
    max_iter: int = 25
    track: tuple = (1, 37)
    keep: tuple = (2, 4, 9, 22)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    time: TimeSection
    absorber: AbsorberSection = AbsorberSection()
    pulses: tuple = ()
    solver: SolverSection = SolverSection()
    output_dir: str = "output"

    def with_overrides(self, **sections) -> "RunConfig":
        return replace(self, **sections)


def _float(text):
    return float(text)


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(_int(x) for x in text.split(",") if x.strip())


def _omega(text):
    text = text.strip()
    if text in ("omega1", "omega2"):
        return text
    return float(text)


def _text(text):
    return text.strip()


_SCHEMA = {
    "model": (ModelSection, {
        "mass": _float, "surface1": _floats, "surface2": _floats, "dipole": _float,
        "r_min": _float, "r_max": _float, "n_points": _int, "n_keep": _int,
        "initial_state": _int,
    }),
    "time": (TimeSection, {"t_physical": _float, "t_total": _float, "n_samples": _int}),
    "absorber": (AbsorberSection, {"shape": _text, "integral": _float, "width": _float}),
    "pulse": (PulseEntry, {"amplitude": _float, "omega": _omega, "center": _float,
                           "width": _float}),
    "solver": (SolverSection, {"tol": _float, "max_iter": _int, "track": _ints,
                               "keep": _ints}),
    "output": (None, {"directory": _text}),
}

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+?)(\d*)\s*\]$")


def _section_kind(name, digits, lineno):
    if name == "pulse":
        if not digits:
            raise ConfigurationError("pulse sections must be numbered, e.g. [pulse1]", lineno)
        return "pulse"
    if digits or name not in _SCHEMA:
        raise ConfigurationError(f"unknown section [{name}{digits}]", lineno)
    return name


def parse_config(text: str) -> RunConfig:
    sections = {}  # key: (kind, number) -> {key: (value, line)}
    header_lines = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _SECTION_RE.match(line)
        if match:
            kind = _section_kind(match.group(1), match.group(2), lineno)
            current = (kind, int(match.group(2)) if match.group(2) else 0)
            if current in sections:
                raise ConfigurationError(f"duplicate section [{line[1:-1]}]", lineno)
            sections[current] = {}
            header_lines[current] = lineno
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if current is None:
            raise ConfigurationError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        converters = _SCHEMA[current[0]][1]
        if key not in converters:
            raise ConfigurationError(f"unknown key {key!r} in section [{current[0]}]", lineno)
        if key in sections[current]:
            raise ConfigurationError(f"duplicate key {key!r}", lineno)
        try:
            sections[current][key] = (converters[key](value), lineno)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key!r}: {exc}", lineno) from None

    def build(kind, number=0, required=True):
        cls = _SCHEMA[kind][0]
        entries = sections.get((kind, number))
        if entries is None:
            if required:
                raise ConfigurationError(f"missing section [{kind}]")
            return None
        values = {k: v for k, (v, _) in entries.items()}
        try:
            return cls(**values)
        except TypeError:
            needed = [f for f in cls.__dataclass_fields__ if f not in values]
            raise ConfigurationError(
                f"section [{kind}{number or ''}] is missing key {needed[0]!r}",
                header_lines[(kind, number)],
            ) from None

    pulse_numbers = sorted(n for kind, n in sections if kind == "pulse")
    if pulse_numbers != list(range(1, len(pulse_numbers) + 1)):
        raise ConfigurationError("pulse sections must be numbered 1, 2, ... without gaps")
    output = sections.get(("output", 0), {})
    config = RunConfig(
        model=build("model"),
        time=build("time"),
        absorber=build("absorber", required=False) or AbsorberSection(),
        pulses=tuple(build("pulse", n) for n in pulse_numbers),
        solver=build("solver", required=False) or SolverSection(),
        output_dir=output.get("directory", ("output", 0))[0],
    )
    _validate(config, header_lines)
    return config


def _validate(config: RunConfig, header_lines=None):
    lines = header_lines or {}
    model = config.model
    if model.mass <= 0:
        raise ConfigurationError("mass must be positive", lines.get(("model", 0)))
    if not 1 <= model.initial_state <= 2 * model.n_keep:
        raise ConfigurationError("initial_state outside the basis", lines.get(("model", 0)))
    if config.absorber.shape not in ("gaussian", "sin2"):
        raise ConfigurationError(
            f"unknown absorber shape {config.absorber.shape!r}", lines.get(("absorber", 0))
        )
    if config.solver.max_iter < 1:
        raise ConfigurationError("max_iter must be positive", lines.get(("solver", 0)))
    # grid checks live in the constructors
    make_time_grid(config.time.t_physical, config.time.t_total, config.time.n_samples)
    RadialGrid(model.r_min, model.r_max, model.n_points)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(value):
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(config: RunConfig) -> str:
    """Canonical text: fixed section and key order, shortest round-trip floats."""
    out = []

    def section(title, obj):
        out.append(f"[{title}]")
        for name in obj.__dataclass_fields__:
            out.append(f"{name} = {_fmt(getattr(obj, name))}")
        out.append("")

    section("model", config.model)
    section("time", config.time)
    section("absorber", config.absorber)
    for k, pulse in enumerate(config.pulses, start=1):
        section(f"pulse{k}", pulse)
    section("solver", config.solver)
    out.append("[output]")
    out.append(f"directory = {config.output_dir}")
    return "\n".join(out) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize(config).encode()).hexdigest()


_EXAMPLE_PULSES = {
    1: ((0.05, 23.5), (0.08, 21.5)),
    2: ((0.09, 22.5), (0.05, 21.5)),
}


def builtin_config(example: int, dipole: float = 1.0) -> RunConfig:
    """Built-in parameter sets 1 and 2 on the default grids."""
    if example not in _EXAMPLE_PULSES:
        raise ConfigurationError(f"no built-in example {example}")
    (e1, t1), (e2, t2) = _EXAMPLE_PULSES[example]
    return RunConfig(
        model=ModelSection(
            mass=10.0,
            surface1=(0.0, 0.0, -5.0, 0.5, 1.0),
            surface2=(0.0, 0.0, 0.0, 0.0, 0.2),
            dipole=float(dipole),
        ),
        time=TimeSection(45.0, 50.0, 4096),
        pulses=(
            PulseEntry(e1, "omega1", t1, 3.90),
            PulseEntry(e2, "omega2", t2, 4.50),
        ),
        output_dir=f"example{example}",
    )


@dataclass
class BuiltModel:
    config: RunConfig
    basis: object
    hamiltonian: ModelHamiltonian
    system: DrivenSystem
    omegas: tuple = field(default=())

    @property
    def initial_index(self) -> int:
        return self.config.model.initial_state - 1


def build_model(config: RunConfig, basis=None) -> BuiltModel:
    """Eigenbasis, Hamiltonian and sampled driven system for a config."""
    m = config.model
    if basis is None:
        grid = RadialGrid(m.r_min, m.r_max, m.n_points)
        surfaces = (SurfaceSpec(m.surface1, m.mass), SurfaceSpec(m.surface2, m.mass))
        basis = build_basis(surfaces, grid, m.n_keep)
    omegas = resonance_frequencies(basis) if m.n_keep >= 7 else ()
    pulses = []
    for entry in config.pulses:
        omega = entry.omega
        if isinstance(omega, str):
            if not omegas:
                raise ConfigurationError("symbolic carriers need at least 7 states per surface")
            omega = omegas[int(omega[-1]) - 1]
        pulses.append(Pulse(entry.amplitude, omega, entry.center, entry.width))
    hamiltonian = ModelHamiltonian.from_basis(basis, PulseSet(pulses), m.dipole)
    t = config.time
    grid = make_time_grid(t.t_physical, t.t_total, t.n_samples)
    absorber = None
    if t.t_total > t.t_physical:
        a = config.absorber
        absorber = AbsorberSpec.from_integral(t.t_physical, t.t_total, a.integral, a.shape,
                                              a.width)
    system = DrivenSystem.from_model(hamiltonian, grid, absorber, m.initial_state - 1)
    return BuiltModel(config, basis, hamiltonian, system, tuple(omegas))
