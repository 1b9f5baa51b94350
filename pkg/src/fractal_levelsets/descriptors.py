"""JSON function descriptors and sample-trace CSVs.

A descriptor is an object with a ``kind`` field:

``{"kind": "phi", "n": 3, "m": 2}``
``{"kind": "affine", "gradient": [1, 0], "offset": 0}``
``{"kind": "compose", "n": 3, "m": 2, "h": {"kind": "affine", ...}}``
``{"kind": "mcshane", "points": [[0], [1]], "values": [0, 1], "c": 1, "alpha": 0.5}``
``{"kind": "pwa", "simplices": [...], "values": [...]}`` or
``{"kind": "pwa", "source": {...}, "box": [lo, hi], "mesh": 0.1, "c_target": 1, "alpha": 0.5}``

An optional ``domain`` field (``{"interval": [lo, hi]}``, ``{"box": [lo, hi]}``
or ``{"ifs": ref}``) tells the certifier where to sample pairs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .holder import (AffineFunction, AttractorSampler, AuxiliaryFunction, BoxSampler,
                     IntervalSampler, McShaneExtension, compose)
from .pwa import PiecewiseAffine, pwa_approximate

KINDS = ("phi", "affine", "pwa", "compose", "mcshane")


class DescriptorError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(d, key, path):
    if key not in d:
        raise DescriptorError(f"{path}.{key}", "missing field")
    return d[key]


def build_function(desc: dict, path: str = "fn"):
    """Instantiate the evaluable function described by ``desc``."""
    if not isinstance(desc, dict):
        raise DescriptorError(path, "descriptor must be an object")
    kind = _get(desc, "kind", path)
    try:
        if kind == "phi":
            return AuxiliaryFunction(int(_get(desc, "n", path)), int(_get(desc, "m", path)))
        if kind == "affine":
            return AffineFunction(_get(desc, "gradient", path), float(desc.get("offset", 0.0)))
        if kind == "compose":
            aux = AuxiliaryFunction(int(_get(desc, "n", path)), int(_get(desc, "m", path)))
            h = build_function(_get(desc, "h", path), f"{path}.h")
            if not isinstance(h, AffineFunction):
                raise DescriptorError(f"{path}.h", "inner function must be affine")
            return compose(aux, h, desc.get("tol"))
        if kind == "mcshane":
            return McShaneExtension(_get(desc, "points", path), _get(desc, "values", path),
                                    float(_get(desc, "c", path)), float(_get(desc, "alpha", path)))
        if kind == "pwa":
            if "simplices" in desc:
                return PiecewiseAffine(np.asarray(desc["simplices"], float),
                                       np.asarray(_get(desc, "values", path), float),
                                       float(desc.get("c", np.inf)), float(desc.get("alpha", 1.0)))
            src = build_function(_get(desc, "source", path), f"{path}.source")
            lo, hi = _get(desc, "box", path)
            return pwa_approximate(src, (lo, hi), float(_get(desc, "mesh", path)),
                                   float(_get(desc, "c_target", path)), float(_get(desc, "alpha", path)),
                                   seed=int(desc.get("seed", 0)))
    except DescriptorError:
        raise
    except (TypeError, ValueError) as exc:
        raise DescriptorError(path, str(exc)) from None
    raise DescriptorError(f"{path}.kind", f"unknown kind {kind!r}; expected one of {KINDS}")


def build_sampler(desc: dict, fn, resolve_system=None):
    """Pair sampler from the descriptor's ``domain`` (defaults: ``[0, 1]`` or the unit box)."""
    dom = desc.get("domain")
    if dom is None:
        p = getattr(fn, "dim", 1)
        return IntervalSampler(0.0, 1.0) if p == 1 else BoxSampler((0.0,) * p, (1.0,) * p)
    if "interval" in dom:
        lo, hi = dom["interval"]
        return IntervalSampler(float(lo), float(hi))
    if "box" in dom:
        lo, hi = dom["box"]
        return BoxSampler(tuple(map(float, lo)), tuple(map(float, hi)))
    if "ifs" in dom:
        if resolve_system is None:
            raise DescriptorError("fn.domain.ifs", "no system resolver available")
        return AttractorSampler(resolve_system(dom["ifs"]))
    raise DescriptorError("fn.domain", "expected one of interval, box, ifs")


def load_descriptor(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DescriptorError("fn", f"invalid JSON: {exc}") from None


def write_trace(path, points, values) -> None:
    """CSV with columns ``x_0, ..., x_{p-1}, value``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{j}" for j in range(pts.shape[1])] + ["value"])
        for row, v in zip(pts, vals):
            w.writerow(["%.17g" % x for x in row] + ["%.17g" % v])


def read_trace(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1]
