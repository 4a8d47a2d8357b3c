"""Experiment configuration: a TOML document validated into dataclasses.

A document may name a ``preset``; the preset's document is loaded first and
the remaining keys override it table by table. Unknown keys, type
mismatches and invariant violations raise ``ConfigError`` naming the key.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .criteria import PhysParams
from .errors import ConfigError, EPBlowupError
from .fields import Grid1D
from .integrators import IntegratorConfig
from .presets import ProfileSpec, parse_profile, scenario_document
from .solver import SolverConfig

SYSTEMS = ("ep", "ep_background", "polytropic", "characteristic", "riccati")
PDE_SYSTEMS = ("ep", "ep_background", "polytropic")
CRITERIA = ("s1", "s2", "s3")
FORMATS = ("text", "json")

_FLOAT, _INT, _BOOL, _STR = "float", "int", "bool", "str"


@dataclass(frozen=True)
class CharacteristicSpec:
    rho0: float
    d0: float
    t_end: float = 10.0


@dataclass(frozen=True)
class RiccatiSpec:
    lambda0: float
    t_end: float


@dataclass(frozen=True)
class SweepSpec:
    rho0: tuple[float, float, int]
    d0: tuple[float, float, int]
    integrate: bool = False
    t_end: float = 10.0

    def points(self) -> list[tuple[float, float]]:
        rs = np.linspace(*self.rho0)
        ds = np.linspace(*self.d0)
        return [(float(r), float(d)) for r in rs for d in ds]


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple[str, ...] = ("text", "json")
    timestamp: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    params: PhysParams
    criterion: str
    grid: Grid1D | None = None
    initial: dict[str, ProfileSpec] = field(default_factory=dict)
    characteristic: CharacteristicSpec | None = None
    riccati: RiccatiSpec | None = None
    sweep: SweepSpec | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seeds: tuple[float, ...] | None = None  # None: the node of most negative v_x
    cross_validate: bool = False
    random_seed: int = 0
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def is_pde(self) -> bool:
        return self.system in PDE_SYSTEMS

    def with_output(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, output=dataclasses.replace(self.output, **changes))

    def to_document(self) -> dict:
        """Fully resolved document; ``parse_config`` of it gives back ``self``."""
        doc: dict = {
            "system": self.system,
            "criterion": self.criterion,
            "cross_validate": self.cross_validate,
            "random_seed": self.random_seed,
            "params": dataclasses.asdict(self.params),
            "integrator": dataclasses.asdict(self.integrator),
            "output": {
                "dir": self.output.dir,
                "formats": list(self.output.formats),
                "timestamp": self.output.timestamp,
            },
        }
        if self.seeds is not None:
            doc["seeds"] = list(self.seeds)
        if self.grid is not None:
            doc["grid"] = dataclasses.asdict(self.grid)
            doc["solver"] = dataclasses.asdict(self.solver)
        if self.initial:
            doc["initial"] = {name: spec.to_document() for name, spec in self.initial.items()}
        if self.characteristic is not None:
            doc["characteristic"] = dataclasses.asdict(self.characteristic)
        if self.riccati is not None:
            doc["riccati"] = dataclasses.asdict(self.riccati)
        if self.sweep is not None:
            sw = dataclasses.asdict(self.sweep)
            sw["rho0"], sw["d0"] = list(sw["rho0"]), list(sw["d0"])
            doc["sweep"] = sw
        return doc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_document())


# ------------------------------------------------------------------ parsing


def _typed(value, kind: str, key: str):
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {type(value).__name__}")
        return float(value)
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {type(value).__name__}")
        return value
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {type(value).__name__}")
        return value
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {type(value).__name__}")
    return value


def _table(doc: dict, schema: dict[str, str], prefix: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(prefix, "expected a table")
    out = {}
    for name, value in doc.items():
        key = f"{prefix}.{name}" if prefix else name
        if name not in schema:
            raise ConfigError(key, "unknown key")
        out[name] = _typed(value, schema[name], key)
    return out


def _build(cls, kwargs: dict, prefix: str):
    try:
        return cls(**kwargs)
    except EPBlowupError as exc:
        raise ConfigError(prefix, str(exc)) from None
    except TypeError as exc:
        raise ConfigError(prefix, str(exc)) from None


def _field_schema(cls) -> dict[str, str]:
    kinds = {"float": _FLOAT, "int": _INT, "bool": _BOOL, "str": _STR}
    return {f.name: kinds[str(f.type).split(" ")[0]] for f in dataclasses.fields(cls)}


_TOP = {
    "preset": _STR,
    "system": _STR,
    "criterion": _STR,
    "cross_validate": _BOOL,
    "random_seed": _INT,
}
_TABLES = {
    "params", "grid", "initial", "characteristic", "riccati", "sweep",
    "integrator", "solver", "output", "seeds",
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_params(doc: dict) -> PhysParams:
    raw = _table(doc, {"k": _FLOAT, "rho_bar": _FLOAT, "gamma": _FLOAT}, "params")
    if "k" in raw and not raw["k"] > 0:
        raise ConfigError("params.k", "k must be positive")
    return _build(PhysParams, raw, "params")


def _parse_range(value, key: str) -> tuple[float, float, int]:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(key, "expected [start, stop, count]")
    start = _typed(value[0], _FLOAT, f"{key}[0]")
    stop = _typed(value[1], _FLOAT, f"{key}[1]")
    count = _typed(value[2], _INT, f"{key}[2]")
    if count < 1:
        raise ConfigError(f"{key}[2]", "count must be at least 1")
    return start, stop, count


def _parse_sweep(doc: dict) -> SweepSpec:
    if not isinstance(doc, dict):
        raise ConfigError("sweep", "expected a table")
    for name in doc:
        if name not in ("rho0", "d0", "integrate", "t_end"):
            raise ConfigError(f"sweep.{name}", "unknown key")
    for name in ("rho0", "d0"):
        if name not in doc:
            raise ConfigError(f"sweep.{name}", "missing")
    kw = {
        "rho0": _parse_range(doc["rho0"], "sweep.rho0"),
        "d0": _parse_range(doc["d0"], "sweep.d0"),
    }
    if "integrate" in doc:
        kw["integrate"] = _typed(doc["integrate"], _BOOL, "sweep.integrate")
    if "t_end" in doc:
        kw["t_end"] = _typed(doc["t_end"], _FLOAT, "sweep.t_end")
        if not kw["t_end"] > 0:
            raise ConfigError("sweep.t_end", "must be positive")
    return SweepSpec(**kw)


def _parse_output(doc: dict) -> OutputSpec:
    if not isinstance(doc, dict):
        raise ConfigError("output", "expected a table")
    kw = {}
    for name, value in doc.items():
        key = f"output.{name}"
        if name == "dir":
            kw["dir"] = _typed(value, _STR, key)
        elif name == "timestamp":
            kw["timestamp"] = _typed(value, _BOOL, key)
        elif name == "formats":
            if not isinstance(value, list):
                raise ConfigError(key, "expected a list of strings")
            fmts = tuple(_typed(v, _STR, key) for v in value)
            bad = [f for f in fmts if f not in FORMATS]
            if bad:
                raise ConfigError(key, f"unknown format {bad[0]!r}")
            kw["formats"] = fmts
        else:
            raise ConfigError(key, "unknown key")
    return OutputSpec(**kw)


def _parse_seeds(value) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError("seeds", "expected a list of numbers")
    seeds = tuple(_typed(v, _FLOAT, f"seeds[{i}]") for i, v in enumerate(value))
    for i, s in enumerate(seeds):
        if not math.isfinite(s):
            raise ConfigError(f"seeds[{i}]", "must be finite")
    return seeds


def _default_criterion(system: str, params: PhysParams, grid: Grid1D | None) -> str:
    if system in ("polytropic", "riccati"):
        return "s3"
    if system == "characteristic":
        return "s2" if params.rho_bar > 0 else "s1"
    if system == "ep_background" or (grid is not None and grid.periodic):
        return "s2"
    return "s1"


def _effective_rho_bar(cfg: ExperimentConfig) -> PhysParams:
    """On periodic grids the Poisson source is mean-free: rho_bar = mean(rho0)."""
    if cfg.system not in ("ep", "ep_background") or not cfg.grid.periodic:
        return cfg.params
    rho = cfg.initial["rho"].evaluate(cfg.grid, cfg.random_seed)
    mean = float(np.mean(rho.values))
    given = cfg.params.rho_bar
    if given > 0 and abs(given - mean) > 1e-9 * max(mean, 1.0):
        raise ConfigError(
            "params.rho_bar", f"must equal the mean initial density {mean!r} on a periodic grid"
        )
    return dataclasses.replace(cfg.params, rho_bar=mean)


def parse_document(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a table")
    if "preset" in doc:
        name = _typed(doc["preset"], _STR, "preset")
        rest = {k: v for k, v in doc.items() if k != "preset"}
        doc = _merge(scenario_document(name), rest)

    for name in doc:
        if name not in _TOP and name not in _TABLES:
            raise ConfigError(name, "unknown key")
    top = _table({k: v for k, v in doc.items() if k in _TOP}, _TOP, "")

    if "system" not in top:
        raise ConfigError("system", "missing")
    system = top["system"]
    if system not in SYSTEMS:
        raise ConfigError("system", f"unknown system {system!r}; choose from {list(SYSTEMS)}")

    params = _parse_params(doc.get("params", {}))
    integrator = _build(
        IntegratorConfig,
        _table(doc.get("integrator", {}), _field_schema(IntegratorConfig), "integrator"),
        "integrator",
    )
    output = _parse_output(doc.get("output", {}))
    kw: dict = {"system": system, "params": params, "integrator": integrator, "output": output}
    kw["cross_validate"] = top.get("cross_validate", False)
    kw["random_seed"] = top.get("random_seed", 0)
    if kw["random_seed"] < 0:
        raise ConfigError("random_seed", "must be nonnegative")

    pde = system in PDE_SYSTEMS
    if pde:
        if "grid" not in doc:
            raise ConfigError("grid", f"required for system {system!r}")
        grid_raw = _table(
            doc["grid"],
            {"x_min": _FLOAT, "x_max": _FLOAT, "n_cells": _INT, "periodic": _BOOL},
            "grid",
        )
        kw["grid"] = _build(Grid1D, grid_raw, "grid")
        kw["solver"] = _build(
            SolverConfig,
            _table(doc.get("solver", {}), _field_schema(SolverConfig), "solver"),
            "solver",
        )
        init = doc.get("initial", {})
        if not isinstance(init, dict):
            raise ConfigError("initial", "expected a table")
        wanted = ("rho", "v", "S") if system == "polytropic" else ("rho", "v")
        for name in init:
            if name not in wanted:
                raise ConfigError(f"initial.{name}", f"not used by system {system!r}")
        specs = {}
        for name in wanted:
            if name not in init:
                raise ConfigError(f"initial.{name}", "missing")
            specs[name] = parse_profile(name, init[name], f"initial.{name}")
        kw["initial"] = specs
        if system == "ep_background" and not kw["grid"].periodic:
            raise ConfigError("grid.periodic", "background density needs a periodic grid")
        if system == "polytropic" and not kw["grid"].periodic:
            raise ConfigError("grid.periodic", "the polytropic solver needs a periodic grid")
        if "seeds" in doc:
            seeds = _parse_seeds(doc["seeds"])
            inside = kw["grid"].contains(np.array(seeds, dtype=float))
            for i, ok in enumerate(np.atleast_1d(inside)):
                if not ok:
                    raise ConfigError(f"seeds[{i}]", "outside the grid domain")
            kw["seeds"] = seeds
    else:
        for name in ("grid", "initial", "solver", "seeds"):
            if name in doc:
                raise ConfigError(name, f"not used by system {system!r}")

    if system == "characteristic":
        has_char = "characteristic" in doc
        if not has_char and "sweep" not in doc:
            raise ConfigError("characteristic", "required for system 'characteristic'")
        if has_char:
            raw = _table(
                doc["characteristic"], {"rho0": _FLOAT, "d0": _FLOAT, "t_end": _FLOAT}, "characteristic"
            )
            for name in ("rho0", "d0"):
                if name not in raw:
                    raise ConfigError(f"characteristic.{name}", "missing")
            if raw["rho0"] < 0:
                raise ConfigError("characteristic.rho0", "must be nonnegative")
            if not raw.get("t_end", 1.0) > 0:
                raise ConfigError("characteristic.t_end", "must be positive")
            kw["characteristic"] = CharacteristicSpec(**raw)
        if "sweep" in doc:
            kw["sweep"] = _parse_sweep(doc["sweep"])
    elif "characteristic" in doc or "sweep" in doc:
        name = "characteristic" if "characteristic" in doc else "sweep"
        raise ConfigError(name, f"not used by system {system!r}")

    if system == "riccati":
        if "riccati" not in doc:
            raise ConfigError("riccati", "required for system 'riccati'")
        raw = _table(doc["riccati"], {"lambda0": _FLOAT, "t_end": _FLOAT}, "riccati")
        if "lambda0" not in raw:
            raise ConfigError("riccati.lambda0", "missing")
        lam = raw["lambda0"]
        if "t_end" not in raw:
            raw["t_end"] = 0.9 / -lam if lam < 0 else 1.0
        if not raw["t_end"] > 0:
            raise ConfigError("riccati.t_end", "must be positive")
        if lam < 0 and raw["t_end"] >= -1.0 / lam:
            raise ConfigError("riccati.t_end", "must lie before the pole -1/lambda0")
        kw["riccati"] = RiccatiSpec(**raw)
    elif "riccati" in doc:
        raise ConfigError("riccati", f"not used by system {system!r}")

    criterion = top.get("criterion") or _default_criterion(system, params, kw.get("grid"))
    if criterion not in CRITERIA:
        raise ConfigError("criterion", f"unknown criterion {criterion!r}")
    kw["criterion"] = criterion

    cfg = ExperimentConfig(**kw)
    if pde:
        rho = cfg.initial["rho"].evaluate(cfg.grid, cfg.random_seed).values
        if not np.all(rho >= 0):
            raise ConfigError("initial.rho", "density must be nonnegative on the grid")
        cfg = dataclasses.replace(cfg, params=_effective_rho_bar(cfg))
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"malformed TOML: {exc}") from None
    return parse_document(doc)
