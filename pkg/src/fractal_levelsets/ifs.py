"""Self-similar sets: similarity maps, Moran dimension and certified grid covers."""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from ._accel import max_workers

ORTHO_TOL = 1e-12
DEFAULT_MAX_DEPTH = 64


class DepthOverflowError(RuntimeError):
    """Word expansion would need more levels than the configured limit."""

    def __init__(self, required: int, limit: int):
        super().__init__(f"cover needs word depth {required}, limit is {limit}")
        self.required = required
        self.limit = limit


def parse_real(value) -> float:
    """Parse a JSON number or a rational string such as ``"1/3"``."""
    if isinstance(value, bool):
        raise TypeError("booleans are not reals")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    raise TypeError(f"expected a real number, got {type(value).__name__}")


@dataclass(frozen=True, eq=False)
class SimilarityMap:
    """``x -> ratio * orthogonal @ x + translation``."""

    ratio: float
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        ratio = float(self.ratio)
        orth = np.array(self.orthogonal, dtype=np.float64)
        trans = np.array(self.translation, dtype=np.float64).reshape(-1)
        p = trans.size
        if orth.shape != (p, p):
            orth = orth.reshape(p, p)
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
        if np.max(np.abs(orth.T @ orth - np.eye(p))) > ORTHO_TOL:
            raise ValueError("orthogonal part is not orthogonal to 1e-12")
        orth.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "orthogonal", orth)
        object.__setattr__(self, "translation", trans)

    @property
    def dim(self) -> int:
        return self.translation.size

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.ratio * x @ self.orthogonal.T + self.translation

    def fixed_point(self) -> np.ndarray:
        a = np.eye(self.dim) - self.ratio * self.orthogonal
        return np.linalg.solve(a, self.translation)

    def __eq__(self, other):
        if not isinstance(other, SimilarityMap):
            return NotImplemented
        return (self.ratio == other.ratio
                and np.array_equal(self.orthogonal, other.orthogonal)
                and np.array_equal(self.translation, other.translation))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SimilaritySystem:
    maps: tuple
    ambient_dim: int
    connected_assertion: bool = False
    osc_assertion: bool = False

    def __post_init__(self):
        maps = tuple(self.maps)
        object.__setattr__(self, "maps", maps)
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be >= 1")
        for i, mp in enumerate(maps):
            if mp.dim != self.ambient_dim:
                raise ValueError(f"map {i} has dimension {mp.dim}, expected {self.ambient_dim}")

    def __eq__(self, other):
        if not isinstance(other, SimilaritySystem):
            return NotImplemented
        return (self.ambient_dim == other.ambient_dim and self.maps == other.maps
                and self.connected_assertion == other.connected_assertion
                and self.osc_assertion == other.osc_assertion)

    __hash__ = None

    # -- array views used by kernels -------------------------------------
    @property
    def ratios(self) -> np.ndarray:
        return np.array([mp.ratio for mp in self.maps])

    @property
    def orthogonals(self) -> np.ndarray:
        return np.array([mp.orthogonal for mp in self.maps]).reshape(-1, self.ambient_dim, self.ambient_dim)

    @property
    def translations(self) -> np.ndarray:
        return np.array([mp.translation for mp in self.maps]).reshape(-1, self.ambient_dim)

    def fixed_points(self) -> np.ndarray:
        return np.array([mp.fixed_point() for mp in self.maps])

    def bounding_ball(self) -> tuple[np.ndarray, float]:
        """Ball ``B(c, R)`` with ``S_i(B) ⊆ B`` for every map, hence ``F ⊆ B``.

        ``c`` is the centroid of the fixed points and
        ``R = max_i |S_i(c) - c| / (1 - r_i)``.
        """
        self._require_maps()
        c = self.fixed_points().mean(axis=0)
        radius = 0.0
        for mp in self.maps:
            radius = max(radius, float(np.linalg.norm(mp(c) - c)) / (1.0 - mp.ratio))
        return c, radius

    def diameter_bound(self) -> float:
        return 2.0 * self.bounding_ball()[1]

    def box_is_invariant(self, lo, hi, tol: float = 1e-12) -> bool:
        """True when every map sends the box ``[lo, hi]`` into itself (so ``F`` lies in it)."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        slack = tol * max(1.0, float(np.max(hi - lo)))
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        for mp in self.maps:
            img = mp(corners)
            if np.any(img < lo - slack) or np.any(img > hi + slack):
                return False
        return True

    def certified_bbox(self, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing ``F``.

        Uses the sampled bounding box itself when it is invariant, otherwise
        pads it by the sampling gap.
        """
        self._require_maps()
        if depth is None:
            depth = _depth_for(len(self.maps), 20000)
        pts = self.sample_points(depth)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if np.all(hi > lo) and self.box_is_invariant(lo, hi):
            return lo, hi
        gap = self.sample_spacing(depth)
        return lo - gap, hi + gap

    def bounding_cube(self) -> tuple[np.ndarray, float]:
        """Cube ``origin + [0, extent]^p`` containing the attractor."""
        lo, hi = self.certified_bbox()
        extent = float(np.max(hi - lo))
        if extent == 0.0:
            return lo - 0.5, 1.0
        return lo, extent

    def sample_points(self, depth: int) -> np.ndarray:
        """Images of the maps' fixed points under every word of length ``depth``.

        All returned points lie on the attractor, and every attractor point is
        within ``max_ratio**depth * diameter_bound()`` of one of them.
        """
        self._require_maps()
        pts = self.fixed_points()
        orth = self.orthogonals
        trans = self.translations
        ratios = self.ratios
        for _ in range(depth):
            pts = np.concatenate([ratios[i] * pts @ orth[i].T + trans[i]
                                  for i in range(len(self.maps))])
        return pts

    def sample_spacing(self, depth: int) -> float:
        return float(self.ratios.max()) ** depth * self.diameter_bound()

    def projection_bounds(self, direction, depth: int = 8) -> tuple[float, float]:
        """Certified interval containing ``<direction, x>`` over the attractor."""
        u = np.asarray(direction, dtype=np.float64)
        vals = self.sample_points(depth) @ u
        slack = self.sample_spacing(depth) * float(np.linalg.norm(u))
        return float(vals.min() - slack), float(vals.max() + slack)

    def attractor_diameter(self, depth: int = 8) -> float:
        """Upper bound on diam(F): sampled diameter plus twice the sampling gap."""
        pts = self.sample_points(min(depth, _depth_for(len(self.maps), 4000)))
        if len(pts) > 1:
            from scipy.spatial import ConvexHull, QhullError
            hull_pts = pts
            if self.ambient_dim > 1 and len(pts) > self.ambient_dim + 1:
                try:
                    hull_pts = pts[ConvexHull(pts).vertices]
                except QhullError:
                    pass
            diff = hull_pts[:, None, :] - hull_pts[None, :, :]
            diam = float(np.sqrt((diff ** 2).sum(-1)).max())
        else:
            diam = 0.0
        depth_used = min(depth, _depth_for(len(self.maps), 4000))
        return diam + 2.0 * self.sample_spacing(depth_used)

    def _require_maps(self):
        if not self.maps:
            raise ValueError("similarity system has no maps")

    # -- serialization ---------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "maps": [{"ratio": mp.ratio,
                      "orthogonal": mp.orthogonal.reshape(-1).tolist(),
                      "translation": mp.translation.tolist()} for mp in self.maps],
            "connected": self.connected_assertion,
            "osc": self.osc_assertion,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SimilaritySystem":
        try:
            p = int(data["ambient_dim"])
            raw_maps = data["maps"]
        except KeyError as exc:
            raise ValueError(f"IFS definition is missing field {exc.args[0]!r}") from None
        maps = []
        for i, entry in enumerate(raw_maps):
            try:
                ratio = parse_real(entry["ratio"])
                orth = entry.get("orthogonal")
                orth = np.eye(p) if orth is None else np.array([parse_real(v) for v in orth]).reshape(p, p)
                trans = np.array([parse_real(v) for v in entry["translation"]])
                maps.append(SimilarityMap(ratio, orth, trans))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"maps[{i}]: {exc}") from None
        return cls(tuple(maps), p, bool(data.get("connected", False)), bool(data.get("osc", False)))

    @classmethod
    def load(cls, path) -> "SimilaritySystem":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")


def _depth_for(nmaps: int, budget: int) -> int:
    if nmaps <= 1:
        return 0
    return max(0, int(math.log(budget) / math.log(nmaps)))


def moran_dimension(system: SimilaritySystem, tol: float = 1e-12) -> float:
    """Similarity dimension: the ``s`` with ``sum(r_i**s) == 1``, by bisection."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    system._require_maps()
    ratios = system.ratios
    if len(ratios) == 1:
        return 0.0

    def excess(s):
        return math.fsum(ratios ** s) - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = lo if abs(excess(lo)) <= abs(excess(hi)) else hi
    if abs(excess(s)) >= tol:
        raise ArithmeticError(f"bisection stalled with residual {excess(s):.3e}")
    return s


# ---------------------------------------------------------------------------
# Grids and cell sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    base: int
    level: int
    origin: tuple
    extent: float

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("base must be >= 2")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        object.__setattr__(self, "origin", tuple(float(v) for v in np.ravel(self.origin)))
        object.__setattr__(self, "extent", float(self.extent))
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def side(self) -> int:
        """Cells per axis, ``base**level``."""
        return self.base ** self.level

    @property
    def delta(self) -> float:
        return self.extent / self.side

    def at_level(self, level: int) -> "GridSpec":
        return GridSpec(self.base, level, self.origin, self.extent)

    def index_of(self, points) -> np.ndarray:
        """Clamped half-open cell indices of ``points`` (shape ``(N, p)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        u = (pts - np.asarray(self.origin)) / self.delta
        idx = np.floor(u).astype(np.int64)
        return np.clip(idx, 0, self.side - 1)

    def centers(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.float64).reshape(-1, self.dim)
        return np.asarray(self.origin) + (cells + 0.5) * self.delta

    def keys(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, self.dim)
        mul = self.side ** np.arange(self.dim, dtype=object)
        if self.side ** self.dim >= 2 ** 62:
            raise OverflowError("grid too fine for 64-bit cell keys")
        return cells @ np.asarray(mul, dtype=np.int64)

    def cells_from_keys(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty((keys.size, self.dim), np.int64)
        rem = keys.copy()
        for j in range(self.dim):
            out[:, j] = rem % self.side
            rem //= self.side
        return out

    @classmethod
    def for_system(cls, system: SimilaritySystem, base: int, level: int = 0) -> "GridSpec":
        origin, extent = system.bounding_cube()
        return cls(base, level, tuple(origin), extent)

    @classmethod
    def unit(cls, dim: int, base: int, level: int = 0) -> "GridSpec":
        return cls(base, level, (0.0,) * dim, 1.0)


@dataclass(frozen=True, eq=False)
class CellSet:
    """Sparse set of occupied cells, stored sorted by linear key."""

    spec: GridSpec
    cells: np.ndarray
    system: SimilaritySystem | None = field(default=None, repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.spec.dim)
        if cells.size and (cells.min() < 0 or cells.max() > self.spec.side - 1):
            raise ValueError("cell index outside [0, base**level - 1]")
        keys = self.spec.keys(cells)
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            keep = np.concatenate([[True], keys[1:] != keys[:-1]])
            order = order[keep]
            keys = keys[keep]
        cells = cells[order]
        cells.setflags(write=False)
        keys.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "_keys", keys)

    @classmethod
    def from_keys(cls, spec: GridSpec, keys, system=None) -> "CellSet":
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        return cls(spec, spec.cells_from_keys(keys), system)

    @classmethod
    def full(cls, spec: GridSpec) -> "CellSet":
        axes = [np.arange(spec.side, dtype=np.int64)] * spec.dim
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
        return cls(spec, grid)

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def level(self) -> int:
        return self.spec.level

    def centers(self) -> np.ndarray:
        return self.spec.centers(self.cells)

    def subset(self, mask) -> "CellSet":
        return CellSet(self.spec, self.cells[np.asarray(mask, dtype=bool)], self.system)

    def as_set(self) -> set:
        return {tuple(int(v) for v in row) for row in self.cells}

    def __len__(self) -> int:
        return self.cells.shape[0]

    def __contains__(self, idx) -> bool:
        key = self.spec.keys(np.asarray(idx, dtype=np.int64).reshape(1, -1))[0]
        pos = np.searchsorted(self._keys, key)
        return bool(pos < self._keys.size and self._keys[pos] == key)

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self._keys, other._keys)

    __hash__ = None


# ---------------------------------------------------------------------------
# Certified attractor covers
# ---------------------------------------------------------------------------


def _check_cube_contains(system: SimilaritySystem, spec: GridSpec):
    lo = np.asarray(spec.origin)
    hi = lo + spec.extent
    if system.box_is_invariant(lo, hi):
        return
    blo, bhi = system.certified_bbox()
    tol = 1e-12 * spec.extent
    if np.any(blo < lo - tol) or np.any(bhi > hi + tol):
        raise ValueError("grid bounding cube does not contain the attractor")


def required_depth(system: SimilaritySystem, spec: GridSpec) -> int:
    """Word depth after which every word ball has diameter ``<= delta / 2``."""
    _, radius = system.bounding_ball()
    if radius == 0.0:
        return 0
    target = spec.delta / 4.0
    if radius <= target:
        return 0
    return int(math.ceil(math.log(target / radius) / math.log(system.ratios.max())))


def attractor_levels(system: SimilaritySystem, spec: GridSpec, levels: Iterable[int],
                     max_depth: int = DEFAULT_MAX_DEPTH, workers: int | None = None) -> dict:
    """Certified covers at several levels from one word expansion.

    A word ``w`` is expanded until its ball ``S_w(B)`` has diameter at most
    ``delta_k / 2``; every cell whose closed cube meets that ball is marked.
    Since ``F ⊆ B`` and ``S_i(B) ⊆ B``, no cell meeting ``F`` is missed.
    """
    system._require_maps()
    if spec.dim != system.ambient_dim:
        raise ValueError("grid dimension does not match the system")
    _check_cube_contains(system, spec)
    levels = sorted(set(int(k) for k in levels))
    specs = [spec.at_level(k) for k in levels]
    need = required_depth(system, specs[-1])
    if need > max_depth:
        raise DepthOverflowError(need, max_depth)

    c0, radius = system.bounding_ball()
    # slack keeps boundary-touching cells in despite rounding
    grow = radius * 1e-9 + spec.extent * 1e-12
    thresholds = np.array([s.delta / 4.0 for s in specs])
    deltas = np.array([s.delta for s in specs])
    sides = np.array([s.side for s in specs], dtype=np.int64)
    for s in specs:
        s.keys(np.zeros((1, s.dim), np.int64))  # overflow check
    origin = np.asarray(spec.origin)
    ratios, orth, trans = system.ratios, system.orthogonals, system.translations

    nmaps = len(system.maps)
    q = 0
    while nmaps > 1 and nmaps ** q < 64 and q < need:
        q += 1
    prefixes = list(itertools.product(range(nmaps), repeat=q))

    def run(prefix):
        return kernels.expand_words(ratios, orth, trans, c0, radius + grow,
                                    np.array(prefix, dtype=np.int64), thresholds,
                                    origin, deltas, sides, max_depth)

    nw = workers if workers is not None else max_workers()
    chunks = [[] for _ in levels]

    def absorb(result):
        lvl, key = result
        for j in range(len(levels)):
            sel = key[lvl == j]
            if sel.size:
                chunks[j].append(np.unique(sel))

    if nw > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(nw) as pool:
            for res in pool.map(run, prefixes):
                absorb(res)
    else:
        for prefix in prefixes:
            absorb(run(prefix))

    out = {}
    for j, s in enumerate(specs):
        keys = np.unique(np.concatenate(chunks[j])) if chunks[j] else np.empty(0, np.int64)
        out[levels[j]] = CellSet.from_keys(s, keys, system)
    return out


def attractor_cells(system: SimilaritySystem, spec: GridSpec,
                    max_depth: int = DEFAULT_MAX_DEPTH) -> CellSet:
    return attractor_levels(system, spec, [spec.level], max_depth)[spec.level]


def children_keys(cells: CellSet) -> np.ndarray:
    spec = cells.spec
    child = spec.at_level(spec.level + 1)
    offsets = np.array(list(itertools.product(range(spec.base), repeat=spec.dim)), dtype=np.int64)
    kids = (cells.cells[:, None, :] * spec.base + offsets[None, :, :]).reshape(-1, spec.dim)
    return child.keys(kids)


def refine_cells(cells: CellSet, max_depth: int = DEFAULT_MAX_DEPTH) -> CellSet:
    """Level ``k+1`` cells among the children of ``cells``.

    Children are re-tested against the attractor when the cell set carries its
    system; otherwise every child is kept.
    """
    spec = cells.spec
    child = spec.at_level(spec.level + 1)
    if len(cells) == 0:
        return CellSet(child, np.empty((0, spec.dim), np.int64), cells.system)
    kids = children_keys(cells)
    if cells.system is None:
        return CellSet.from_keys(child, kids)
    fine = attractor_cells(cells.system, child, max_depth)
    keep = np.isin(fine.keys, kids, assume_unique=True)
    return CellSet.from_keys(child, fine.keys[keep], cells.system)


def count_cells(cellsets: Sequence[CellSet]) -> list[tuple[int, int]]:
    return [(c.level, len(c)) for c in cellsets]


# ---------------------------------------------------------------------------
# Stock systems
# ---------------------------------------------------------------------------


def sierpinski_gasket() -> SimilaritySystem:
    """Right-angle gasket with vertices (0,0), (1,0), (0,1)."""
    eye = np.eye(2)
    maps = tuple(SimilarityMap(0.5, eye, t) for t in ([0, 0], [0.5, 0], [0, 0.5]))
    return SimilaritySystem(maps, 2, True, True)


def sierpinski_carpet() -> SimilaritySystem:
    eye = np.eye(2)
    shifts = [(i / 3, j / 3) for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    maps = tuple(SimilarityMap(1 / 3, eye, t) for t in shifts)
    return SimilaritySystem(maps, 2, True, True)


def unit_interval(pieces: int = 2) -> SimilaritySystem:
    eye = np.eye(1)
    maps = tuple(SimilarityMap(1 / pieces, eye, [i / pieces]) for i in range(pieces))
    return SimilaritySystem(maps, 1, True, True)


STOCK_SYSTEMS = {
    "gasket": sierpinski_gasket,
    "carpet": sierpinski_carpet,
    "interval": unit_interval,
}
