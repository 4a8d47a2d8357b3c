"""Initial-data profiles and named scenario presets.

Profiles are smooth families evaluated on a grid. Periodic profiles use the
fundamental wavenumber ``2 pi / L`` of the grid, so on ``[-pi, pi)`` or
``[0, 2 pi)`` they reduce to plain ``cos x`` and ``sin x``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .fields import Grid1D, ScalarField


@dataclass(frozen=True)
class Profile:
    fields: tuple[str, ...]  # which of rho, v, S may use it
    params: dict[str, float | None]  # None marks a required argument
    build: Callable[..., np.ndarray]


def _phase(x: np.ndarray, grid: Grid1D) -> np.ndarray:
    return 2.0 * np.pi * x / grid.length


def _gauss_bump(x, grid, rng, amplitude, width, center):
    return amplitude * np.exp(-(((x - center) / width) ** 2))


def _cosine(x, grid, rng, mean, amplitude):
    return mean + amplitude * np.cos(_phase(x, grid))


def _vacuum_quartic(x, grid, rng, scale):
    return scale * (1.0 - np.cos(_phase(x, grid))) ** 2


def _neg_sine(x, grid, rng, amplitude):
    return -amplitude * np.sin(_phase(x, grid))


def _linear_well(x, grid, rng, slope, center):
    return -slope * (x - center)


def _constant(x, grid, rng, value):
    return np.full_like(x, value)


def _random_modes(x, grid, rng, mean, amplitude, modes):
    # sup norm of the perturbation is at most `amplitude`
    m = int(modes)
    a = rng.uniform(-1.0, 1.0, m)
    b = rng.uniform(-1.0, 1.0, m)
    scale = np.sum(np.abs(a) + np.abs(b))
    wave = np.arange(1, m + 1)[:, None] * _phase(x, grid)[None, :]
    pert = a @ np.cos(wave) + b @ np.sin(wave)
    return mean + amplitude * pert / scale


PROFILES: dict[str, Profile] = {
    "gauss_bump": Profile(("rho",), {"amplitude": None, "width": None, "center": 0.0}, _gauss_bump),
    "cosine": Profile(("rho",), {"mean": None, "amplitude": None}, _cosine),
    "vacuum_quartic": Profile(("rho",), {"scale": None}, _vacuum_quartic),
    "random_modes": Profile(("rho",), {"mean": 1.0, "amplitude": 0.5, "modes": 4}, _random_modes),
    "neg_sine": Profile(("v",), {"amplitude": None}, _neg_sine),
    "linear_well": Profile(("v",), {"slope": None, "center": 0.0}, _linear_well),
    "constant": Profile(("rho", "v", "S"), {"value": 0.0}, _constant),
}

POSITIVE_ARGS = {"width", "modes"}


@dataclass(frozen=True)
class ProfileSpec:
    kind: str
    args: dict[str, float]

    def evaluate(self, grid: Grid1D, random_seed: int = 0) -> ScalarField:
        rng = np.random.default_rng(random_seed)
        values = PROFILES[self.kind].build(grid.x, grid, rng, **self.args)
        return ScalarField(np.asarray(values, dtype=float), grid)

    def to_document(self) -> dict:
        return {"kind": self.kind, **self.args}


def parse_profile(field_name: str, doc: dict, key: str) -> ProfileSpec:
    """Validate a profile table against its signature and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError(key, "expected a table")
    if "kind" not in doc:
        raise ConfigError(f"{key}.kind", "missing profile kind")
    kind = doc["kind"]
    if kind not in PROFILES:
        raise ConfigError(f"{key}.kind", f"unknown profile {kind!r}; choose from {sorted(PROFILES)}")
    prof = PROFILES[kind]
    if field_name not in prof.fields:
        raise ConfigError(f"{key}.kind", f"profile {kind!r} is not available for {field_name}")
    args = {}
    for name, value in doc.items():
        if name == "kind":
            continue
        if name not in prof.params:
            raise ConfigError(f"{key}.{name}", f"unknown argument for profile {kind!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}.{name}", "expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{key}.{name}", "must be finite")
        if name in POSITIVE_ARGS and not value > 0:
            raise ConfigError(f"{key}.{name}", "must be positive")
        args[name] = float(value)
    for name, default in prof.params.items():
        if name not in args:
            if default is None:
                raise ConfigError(f"{key}.{name}", f"required by profile {kind!r}")
            args[name] = float(default)
    if kind == "random_modes" and args["modes"] != int(args["modes"]):
        raise ConfigError(f"{key}.modes", "must be an integer")
    return ProfileSpec(kind, args)


_PI = math.pi

SCENARIOS: dict[str, dict] = {
    "thm1_demo": {
        "system": "characteristic",
        "criterion": "s1",
        "params": {"k": 1.0, "rho_bar": 0.0},
        "characteristic": {"rho0": 3.0, "d0": -2.0, "t_end": 5.0},
    },
    "thm2_demo": {
        "system": "characteristic",
        "criterion": "s2",
        "params": {"k": 1.0, "rho_bar": 1.0},
        "characteristic": {"rho0": 2.0, "d0": -1.0, "t_end": 5.0},
    },
    "thm3_demo": {
        "system": "polytropic",
        "criterion": "s3",
        "params": {"k": 1.0, "gamma": 2.0},
        "grid": {"x_min": -_PI, "x_max": _PI, "n_cells": 2048, "periodic": True},
        "initial": {
            "rho": {"kind": "vacuum_quartic", "scale": 0.1},
            "v": {"kind": "neg_sine", "amplitude": 1.0},
            "S": {"kind": "constant", "value": 0.0},
        },
        "seeds": [0.0],
        "solver": {"t_end": 2.0, "gradient_cap": 20.0},
    },
    "riccati_demo": {
        "system": "riccati",
        "criterion": "s3",
        "riccati": {"lambda0": -0.5, "t_end": 1.8},
    },
    "xval_demo": {
        "system": "ep_background",
        "criterion": "s2",
        "params": {"k": 1.0},
        "grid": {"x_min": 0.0, "x_max": 2.0 * _PI, "n_cells": 4096, "periodic": True},
        "initial": {
            "rho": {"kind": "cosine", "mean": 1.0, "amplitude": 0.9},
            "v": {"kind": "neg_sine", "amplitude": 1.0},
        },
        "seeds": [0.0],
        "cross_validate": True,
        "solver": {"t_end": 5.0, "gradient_cap": 50.0},
    },
    "collapse_demo": {
        "system": "ep",
        "criterion": "s1",
        "params": {"k": 1.0},
        "grid": {"x_min": -4.0, "x_max": 4.0, "n_cells": 2048, "periodic": False},
        "initial": {
            "rho": {"kind": "gauss_bump", "amplitude": 1.0, "width": 0.5, "center": 0.0},
            "v": {"kind": "linear_well", "slope": 1.5, "center": 0.0},
        },
        "seeds": [0.0],
        "cross_validate": True,
        "solver": {"t_end": 3.0, "gradient_cap": 20.0},
    },
    "s1_sweep": {
        "system": "characteristic",
        "criterion": "s1",
        "params": {"k": 1.0},
        "sweep": {"rho0": [0.5, 4.0, 8], "d0": [-3.0, 0.5, 8], "integrate": True, "t_end": 10.0},
    },
}


def scenario_document(name: str) -> dict:
    if name not in SCENARIOS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(SCENARIOS)}")
    return copy.deepcopy(SCENARIOS[name])
