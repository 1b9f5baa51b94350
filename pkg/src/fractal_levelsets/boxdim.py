"""Level-set and slice cell counting, log-log dimension fits and covering bounds."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from ._accel import max_workers
from .ifs import CellSet, GridSpec, SimilaritySystem, attractor_levels


class EmptyLevelSetsError(ValueError):
    """Every requested level value missed the function's range on the cover."""


@dataclass(frozen=True)
class LevelQuery:
    """Level value ``r`` with thickening ``tau_k = c * (sqrt(p) * delta_k)**alpha``."""

    value: float
    c: float
    alpha: float

    def __post_init__(self):
        if not self.c > 0 or not 0 < self.alpha <= 1:
            raise ValueError("thickening needs c > 0 and 0 < alpha <= 1")

    def tau(self, spec: GridSpec) -> float:
        return thickening(spec, self.c, self.alpha)


def thickening(spec: GridSpec, c: float, alpha: float) -> float:
    return c * (math.sqrt(spec.dim) * spec.delta) ** alpha


@dataclass(frozen=True)
class SliceSpec:
    """Hyperplane ``{x : <normal, x> = offset}``."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(-1)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError(f"slice normal must be a unit vector, |n| = {np.linalg.norm(n)!r}")
        object.__setattr__(self, "normal", tuple(float(v) for v in n))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.normal)


@dataclass(frozen=True)
class DimensionFit:
    levels: tuple
    counts: tuple
    slope: float
    intercept: float
    r_squared: float
    base: int

    @property
    def k_min(self) -> int:
        return self.levels[0]

    @property
    def k_max(self) -> int:
        return self.levels[-1]

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "counts": list(self.counts), "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared, "base": self.base}


@dataclass(frozen=True)
class SpectrumEstimate:
    level_values: tuple
    dims: tuple
    essential_inf_estimate: float
    percentile: float
    fits: tuple = field(default=(), repr=False)
    excluded: tuple = ()
    counts: tuple = field(default=(), repr=False)

    @property
    def median(self) -> float:
        return float(np.median(self.dims))

    def to_dict(self) -> dict:
        return {
            "level_values": list(self.level_values),
            "dims": list(self.dims),
            "essential_inf_estimate": self.essential_inf_estimate,
            "percentile": self.percentile,
            "median": self.median,
            "excluded": list(self.excluded),
            "fits": [f.to_dict() for f in self.fits],
        }


# ---------------------------------------------------------------------------
# Cell selection
# ---------------------------------------------------------------------------


def _values_at_centers(f: Callable, cells: CellSet) -> np.ndarray:
    if len(cells) == 0:
        return np.empty(0)
    return np.asarray(f(cells.centers()), dtype=np.float64).reshape(-1)


def level_cells(f: Callable, cells: CellSet, query: LevelQuery) -> CellSet:
    """Cells whose center value lies within ``tau_k`` of the level value."""
    vals = _values_at_centers(f, cells)
    return cells.subset(np.abs(vals - query.value) <= query.tau(cells.spec))


def slice_cells(cells: CellSet, slice_: SliceSpec, thickness: float | None = None) -> CellSet:
    """Cells whose center is within ``thickness`` of the hyperplane."""
    spec = cells.spec
    floor = math.sqrt(spec.dim) * spec.delta / 2.0
    if thickness is None:
        thickness = floor
    elif thickness < floor * (1 - 1e-12):
        raise ValueError(f"thickness {thickness} below half the cell diagonal {floor}")
    if len(cells) == 0:
        return cells
    d = cells.centers() @ slice_.vector
    return cells.subset(np.abs(d - slice_.offset) <= thickness)


def slab_oracle(cells: CellSet, gradient, offset: float, value: float, half_width: float) -> set:
    """Cells whose closed cube meets ``{x : |<g, x> + b - r| <= w}``, in exact arithmetic.

    Cell ``i`` spans ``origin + delta * [i, i + 1]`` per axis; the affine
    image of that cube is the interval ``g . x_lo + b + [sum min(g_j, 0),
    sum max(g_j, 0)] * delta``, which is compared against ``[r - w, r + w]``.
    """
    spec = cells.spec
    g = [Fraction(float(v)) for v in np.asarray(gradient, float).reshape(-1)]
    b, r, w = Fraction(float(offset)), Fraction(float(value)), Fraction(float(half_width))
    origin = [Fraction(float(o)) for o in spec.origin]
    delta = Fraction(float(spec.extent)) / spec.base ** spec.level
    neg = sum(min(gj, 0) for gj in g) * delta
    pos = sum(max(gj, 0) for gj in g) * delta
    out = set()
    for idx in cells.cells:
        lo = b + sum(gj * (oj + int(ij) * delta) for gj, oj, ij in zip(g, origin, idx))
        if lo + neg <= r + w and lo + pos >= r - w:
            out.add(tuple(int(v) for v in idx))
    return out


def equivalent_slab_width(spec: GridSpec, gradient, tau: float) -> float:
    """Half-width ``w`` for which the center test with ``tau`` equals the cube/slab test.

    A cube meets the slab of half-width ``w`` exactly when its center value
    is within ``w + delta/2 * |g|_1``.
    """
    return tau - spec.delta / 2.0 * float(np.abs(np.asarray(gradient, float)).sum())


# ---------------------------------------------------------------------------
# Fits and bounds
# ---------------------------------------------------------------------------


def fit_dimension(counts: Sequence[tuple[int, int]], base: int,
                  k_min: int | None = None, k_max: int | None = None) -> DimensionFit:
    """OLS slope of ``log N_k`` against ``k log(base)`` over ``[k_min, k_max]``."""
    pts = sorted((int(k), int(n)) for k, n in counts)
    if k_min is not None:
        pts = [(k, n) for k, n in pts if k >= k_min]
    if k_max is not None:
        pts = [(k, n) for k, n in pts if k <= k_max]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 levels in the fit window, got {len(pts)}")
    if any(n <= 0 for _, n in pts):
        raise ValueError("zero count in fit window: the level value misses the function's range")
    ks = np.array([k for k, _ in pts], dtype=np.float64)
    x = ks * math.log(base)
    y = np.log(np.array([n for _, n in pts], dtype=np.float64))
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sxy = float(np.sum((x - xm) * (y - ym)))
    constant = bool(np.all(y == y[0]))
    slope = 0.0 if constant else sxy / sxx
    intercept = float(y[0]) if constant else float(ym - slope * xm)
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if constant or syy == 0.0 else max(0.0, 1.0 - float(np.sum((y - intercept - slope * x) ** 2)) / syy)
    return DimensionFit(tuple(int(k) for k in ks), tuple(n for _, n in pts),
                        float(slope), intercept, float(r2), int(base))


def window_slopes(counts: Sequence[tuple[int, int]], base: int, width: int = 3) -> list:
    """Slopes over every contiguous window of ``width`` levels (limsup/liminf diagnostic)."""
    pts = sorted(counts)
    out = []
    for i in range(len(pts) - width + 1):
        sub = pts[i:i + width]
        if all(n > 0 for _, n in sub):
            out.append((sub[0][0], sub[-1][0], fit_dimension(sub, base).slope))
    return out


def covering_upper_bound(l: float, rho: float, alpha: float) -> float:
    """``log l / log rho - alpha``; returned raw, possibly negative."""
    if not l > 1 or not rho > 1 or not 0 < alpha <= 1:
        raise ValueError("need l > 1, rho > 1 and 0 < alpha <= 1")
    return math.log(l) / math.log(rho) - alpha


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


def default_window(levels: Sequence[int]) -> tuple[int, int]:
    """Drop the two coarsest levels when that still leaves three points."""
    ks = sorted(levels)
    lo = ks[2] if len(ks) >= 5 else ks[0]
    return lo, ks[-1]


def level_counts(values: np.ndarray, level_values: np.ndarray, tau: float) -> np.ndarray:
    """Number of entries of ``values`` within ``tau`` of each level value."""
    v = np.sort(values)
    lo = np.searchsorted(v, level_values - tau, side="left")
    hi = np.searchsorted(v, level_values + tau, side="right")
    return (hi - lo).astype(np.int64)


def count_table(f: Callable, covers: dict, level_values, rule: tuple[float, float],
                workers: int | None = None) -> list[tuple[float, int, int]]:
    """``(r, k, N_k)`` records sorted by ``(r, k)``.

    Each level is evaluated once and counted for all values at once; levels
    run on a thread pool since evaluation releases the GIL.
    """
    rs = np.asarray(list(level_values), dtype=np.float64)
    c, alpha = rule

    def one(k):
        cover = covers[k]
        vals = _values_at_centers(f, cover)
        return k, level_counts(vals, rs, thickening(cover.spec, c, alpha))

    ks = sorted(covers)
    with ThreadPoolExecutor(max_workers=workers or max_workers()) as ex:
        per_level = dict(ex.map(one, ks))
    return [(float(r), k, int(per_level[k][i])) for i, r in enumerate(rs) for k in ks]


def spectrum_from_counts(table, base: int, percentile: float = 10.0,
                         k_min: int | None = None, k_max: int | None = None) -> SpectrumEstimate:
    """Fit every level value's counts and summarise the dims by a percentile."""
    if not 0 <= percentile <= 100:
        raise ValueError("percentile must lie in [0, 100]")
    by_r: dict[float, list] = {}
    for r, k, n in table:
        by_r.setdefault(r, []).append((k, n))
    values, dims, fits, excluded = [], [], [], []
    for r, rows in by_r.items():
        if k_min is None or k_max is None:
            lo, hi = default_window([k for k, _ in rows])
            lo = lo if k_min is None else k_min
            hi = hi if k_max is None else k_max
        else:
            lo, hi = k_min, k_max
        window = [(k, n) for k, n in rows if lo <= k <= hi]
        if any(n == 0 for _, n in window):
            excluded.append(r)
            continue
        fit = fit_dimension(window, base)
        values.append(r)
        dims.append(fit.slope)
        fits.append(fit)
    if not dims:
        raise EmptyLevelSetsError("all level values gave empty level sets")
    est = float(np.percentile(dims, percentile))
    return SpectrumEstimate(tuple(values), tuple(dims), est, float(percentile),
                            tuple(fits), tuple(excluded), tuple(table))


def spectrum(f: Callable, system: SimilaritySystem, spec: GridSpec, levels: Iterable[int],
             level_values, query_rule: tuple[float, float], percentile: float = 10.0,
             k_min: int | None = None, k_max: int | None = None,
             covers: dict | None = None, workers: int | None = None) -> SpectrumEstimate:
    """Level-set dimension estimates for many values over one family of covers."""
    levels = sorted(set(int(k) for k in levels))
    if not list(level_values):
        raise ValueError("level_values must be non-empty")
    if covers is None:
        covers = attractor_levels(system, spec, levels, workers=workers)
    covers = {k: covers[k] for k in levels}
    table = count_table(f, covers, level_values, query_rule, workers)
    return spectrum_from_counts(table, spec.base, percentile, k_min, k_max)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _g(x: float) -> str:
    return "%.17g" % x


def write_counts_csv(path, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "k", "N_k"])
        for r, k, n in sorted(table):
            w.writerow([_g(r), k, n])


def write_fits_csv(path, values, fits) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "slope", "intercept", "r_squared", "k_min", "k_max"])
        for r, fit in zip(values, fits):
            w.writerow([_g(r), _g(fit.slope), _g(fit.intercept), _g(fit.r_squared),
                        fit.k_min, fit.k_max])
