"""JSON problem descriptions and bundled example data."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .assembly import ProblemSpec


def _analytic41(eps):
    # rho = eps * f with lap(phi) = -f for phi = (cos(pi x) + cos(pi y)) / pi
    def density(x, y):
        return eps * np.pi * (np.cos(np.pi * x) + np.cos(np.pi * y))
    return density


DENSITIES = {"analytic41": _analytic41}


def data_path(name: str) -> Path:
    """Path of a file shipped in ``treepoisson/data``."""
    return Path(str(resources.files("treepoisson") / "data" / name))


def spec_from_dict(cfg: dict) -> ProblemSpec:
    """Build a :class:`ProblemSpec` from a parsed config document.

    Schema::

        {"epsilon_r": 1.0, "epsilon_0": 1.0,
         "sources": [{"type": "point", "x": .., "y": .., "q": ..} |
                     {"type": "density", "name": "analytic41"}],
         "neumann": "zero",
         "reference": {"x": .., "y": .., "value": ..}}
    """
    eps_r = float(cfg.get("epsilon_r", 1.0))
    eps_0 = float(cfg.get("epsilon_0", 1.0))
    points, densities = [], []
    for src in cfg.get("sources", []):
        kind = src.get("type")
        if kind == "point":
            points.append((float(src["x"]), float(src["y"]), float(src["q"])))
        elif kind == "density":
            try:
                densities.append(DENSITIES[src["name"]](eps_r * eps_0))
            except KeyError:
                raise ValueError(f"unknown density {src.get('name')!r}; "
                                 f"available: {sorted(DENSITIES)}") from None
        else:
            raise ValueError(f"unknown source type {kind!r}")
    if cfg.get("neumann", "zero") != "zero":
        raise ValueError("only \"neumann\": \"zero\" is supported in config files")

    density = None
    if densities:
        def density(x, y):
            return sum(f(x, y) for f in densities)

    ref = cfg.get("reference", {})
    return ProblemSpec(epsilon_r=eps_r, epsilon_0=eps_0, density=density, point_charges=points,
                       reference=(float(ref.get("x", 0.0)), float(ref.get("y", 0.0))),
                       reference_value=float(ref.get("value", 0.0)))


def load_config(path) -> ProblemSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
