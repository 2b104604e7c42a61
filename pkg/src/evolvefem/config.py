"""Run configuration: INI-style ``key = value`` sections, validated into dataclasses.

Schema (defaults in brackets)::

    [run]            mode (required: convergence | simulate | verify), seed [42],
                     source_time [current | previous], strict_picard [false]
    [mapping]        kind (required: identity | linear_periodic | nonlinear_periodic),
                     kappa [1.0], period [1.0]
    [kinetics]       model [schnakenberg | none], a, b, gamma, d1, d2
    [discretization] degree (required), levels (convergence), level (simulate),
                     tau (simulate), final_time [= period]
    [solver]         tol [1e-10], max_iter [20000], preconditioner [jacobi | none]
    [initial]        kind [perturbed_steady | steady | manufactured | constant],
                     amplitude [0.01], value [1.0]
    [output]         directory [output], table [eoc.csv], diagnostics [diagnostics.csv],
                     snapshot_times [empty], snapshot_prefix [snapshot]
    [monitor]        lower [-1e-6], upper [10.0], abort [false]
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass
class RunSection:
    mode: str = None
    seed: int = 42
    source_time: str = "current"
    strict_picard: bool = False


@dataclass
class MappingSection:
    kind: str = None
    kappa: float = 1.0
    period: float = 1.0


@dataclass
class KineticsSection:
    model: str = "schnakenberg"
    a: Optional[float] = None
    b: Optional[float] = None
    gamma: Optional[float] = None
    d1: float = None
    d2: float = None


@dataclass
class DiscretizationSection:
    degree: int = None
    levels: list = field(default_factory=list)
    level: Optional[int] = None
    tau: Optional[float] = None
    final_time: Optional[float] = None


@dataclass
class SolverSection:
    tol: float = 1e-10
    max_iter: int = 20000
    preconditioner: str = "jacobi"


@dataclass
class InitialSection:
    kind: str = "perturbed_steady"
    amplitude: float = 1e-2
    value: float = 1.0


@dataclass
class OutputSection:
    directory: str = "output"
    table: str = "eoc.csv"
    diagnostics: str = "diagnostics.csv"
    snapshot_times: list = field(default_factory=list)
    snapshot_prefix: str = "snapshot"


@dataclass
class MonitorSection:
    lower: float = -1e-6
    upper: float = 10.0
    abort: bool = False


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    mapping: MappingSection = field(default_factory=MappingSection)
    kinetics: KineticsSection = field(default_factory=KineticsSection)
    discretization: DiscretizationSection = field(default_factory=DiscretizationSection)
    solver: SolverSection = field(default_factory=SolverSection)
    initial: InitialSection = field(default_factory=InitialSection)
    output: OutputSection = field(default_factory=OutputSection)
    monitor: MonitorSection = field(default_factory=MonitorSection)

    @property
    def final_time(self) -> float:
        d = self.discretization.final_time
        return self.mapping.period if d is None else d


# field name -> (type, is list)
_TYPES = {
    "int": int, "float": float, "str": str, "bool": bool,
    "list": None, "Optional[float]": float, "Optional[int]": int,
}
_LIST_ITEM = {("discretization", "levels"): int, ("output", "snapshot_times"): float}


def _section_types():
    out = {}
    for f in dataclasses.fields(RunConfig):
        out[f.name] = {g.name: g for g in dataclasses.fields(f.default_factory)}
    return out


def _convert(section: str, key: str, raw: str):
    ftype = _section_types()[section][key].type
    text = raw.strip()
    if ftype == "list":
        item = _LIST_ITEM[(section, key)]
        return [item(v) for v in text.replace(",", " ").split()]
    if text.lower() in ("", "none") and ftype.startswith("Optional"):
        return None
    if ftype == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    conv = _TYPES[ftype]
    if conv is int:
        v = float(text)
        if v != int(v):
            raise ValueError(f"not an integer: {raw!r}")
        return int(v)
    return conv(text)


def _apply(cfg: RunConfig, section: str, key: str, raw: str):
    types = _section_types()
    if section not in types:
        raise ConfigError(f"unknown section [{section}]")
    if key not in types[section]:
        raise ConfigError(f"unknown key {section}.{key}")
    try:
        value = _convert(section, key, raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None
    setattr(getattr(cfg, section), key, value)


def parse_config(path=None, overrides=(), text: str | None = None) -> RunConfig:
    """Parse a config file (or ``text``) plus ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    if text is not None:
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply(cfg, section, key, raw)
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        lhs, raw = ov.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _apply(cfg, section, key, raw)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    missing, errors = [], []
    r, m, k, d = cfg.run, cfg.mapping, cfg.kinetics, cfg.discretization
    if r.mode is None:
        missing.append("run.mode")
    elif r.mode not in ("convergence", "simulate", "verify"):
        errors.append(f"run.mode must be convergence, simulate or verify, got {r.mode!r}")
    if r.source_time not in ("current", "previous"):
        errors.append(f"run.source_time must be current or previous, got {r.source_time!r}")
    if m.kind is None:
        missing.append("mapping.kind")
    elif m.kind not in ("identity", "linear_periodic", "nonlinear_periodic"):
        errors.append(f"mapping.kind unknown: {m.kind!r}")
    if not m.period > 0:
        errors.append(f"mapping.period must be positive, got {m.period}")
    if k.model not in ("schnakenberg", "none"):
        errors.append(f"kinetics.model must be schnakenberg or none, got {k.model!r}")
    required = ["d1", "d2"] + (["a", "b", "gamma"] if k.model == "schnakenberg" else [])
    for name in required:
        v = getattr(k, name)
        if v is None:
            missing.append(f"kinetics.{name}")
        elif not v > 0:
            errors.append(f"kinetics.{name} must be positive, got {v}")
    if d.degree is None:
        missing.append("discretization.degree")
    elif d.degree not in (1, 2, 3):
        errors.append(f"discretization.degree must be 1, 2 or 3, got {d.degree}")
    if r.mode == "convergence" and not d.levels:
        missing.append("discretization.levels")
    if any(lv < 0 for lv in d.levels):
        errors.append("discretization.levels must be non-negative")
    if r.mode == "simulate":
        if d.level is None:
            missing.append("discretization.level")
        if d.tau is None:
            missing.append("discretization.tau")
    if d.tau is not None and not d.tau > 0:
        errors.append(f"discretization.tau must be positive, got {d.tau}")
    if d.final_time is not None and not d.final_time > 0:
        errors.append(f"discretization.final_time must be positive, got {d.final_time}")
    if not cfg.solver.tol > 0:
        errors.append(f"solver.tol must be positive, got {cfg.solver.tol}")
    if cfg.solver.max_iter < 1:
        errors.append("solver.max_iter must be >= 1")
    if cfg.solver.preconditioner not in ("jacobi", "none"):
        errors.append(f"solver.preconditioner must be jacobi or none, got {cfg.solver.preconditioner!r}")
    if cfg.initial.kind not in ("perturbed_steady", "steady", "manufactured", "constant"):
        errors.append(f"initial.kind unknown: {cfg.initial.kind!r}")
    if cfg.initial.kind in ("perturbed_steady", "steady") and k.model != "schnakenberg":
        errors.append(f"initial.kind={cfg.initial.kind} needs kinetics.model=schnakenberg")
    if missing:
        errors.insert(0, "missing required keys: " + ", ".join(missing))
    if errors:
        raise ConfigError("; ".join(errors))


def _emit_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_emit_value(x) for x in v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    out = io.StringIO()
    for f in dataclasses.fields(RunConfig):
        section = getattr(cfg, f.name)
        out.write(f"[{f.name}]\n")
        for g in dataclasses.fields(section):
            v = getattr(section, g.name)
            if v is None:
                continue
            out.write(f"{g.name} = {_emit_value(v)}\n")
        out.write("\n")
    return out.getvalue()
