"""Explicit Hölder functions: the zig-zag auxiliary family and its companions.

The auxiliary function with parameters ``(n, m)`` is the limit of piecewise
linear approximants.  The first approximant is linear on each ``1/(nm)`` grid
interval and, on ``[i/m, (i+1)/m]``, zig-zags ``n`` times between ``i/m`` and
``(i+1)/m`` starting upwards.  Each later approximant replaces every linear
piece by an affine copy of the first one with the same endpoint values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Integral
from typing import Callable

import numpy as np

from . import kernels

_QUANT_BITS = 50


class InconsistentSamplesError(ValueError):
    """Samples violate the requested Hölder condition."""

    def __init__(self, i: int, j: int, ratio: float):
        super().__init__(f"samples {i} and {j} violate the Hölder bound (ratio {ratio:.6g})")
        self.pair = (i, j)
        self.ratio = ratio


class SearchExhaustedError(RuntimeError):
    pass


def _check_nm(n, m):
    if isinstance(n, bool) or not isinstance(n, Integral):
        raise ValueError(f"n must be an odd integer >= 3, got {n!r}")
    if isinstance(m, bool) or not isinstance(m, Integral):
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    if n < 3 or n % 2 == 0:
        raise ValueError(f"n must be an odd integer >= 3, got {n}")
    if m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")


def holder_exponent(n: int, m: int) -> float:
    """``log m / (log n + log m)``."""
    _check_nm(n, m)
    return math.log(m) / (math.log(n) + math.log(m))


@dataclass(frozen=True)
class AuxiliaryFunction:
    n: int
    m: int

    def __post_init__(self):
        _check_nm(self.n, self.m)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))

    @property
    def alpha(self) -> float:
        return holder_exponent(self.n, self.m)

    @property
    def nm(self) -> int:
        return self.n * self.m

    @property
    def dim(self) -> int:
        return 1

    # -- first iteration tables ------------------------------------------
    @cached_property
    def _tables(self):
        n, m = self.n, self.m
        num = [i + (j % 2) for i in range(m) for j in range(n)]
        num.append(m)
        # breakpoint value at d/(nm) is num[d]/m; piece d rises by (num[d+1]-num[d])/m
        y0 = np.array([v / m for v in num[:-1]])
        step = np.array([(num[d + 1] - num[d]) / m for d in range(n * m)])
        exact = [Fraction(v, m) for v in num]
        return y0, step, exact

    @cached_property
    def _quant(self):
        nm = self.nm
        L = int(_QUANT_BITS * math.log(2) / math.log(nm))
        powers = np.array([nm ** j for j in range(L + 1)], dtype=np.int64)
        return L, powers

    @property
    def quant_level(self) -> int:
        """Grid level ``L`` on which float arguments are evaluated."""
        return self._quant[0]

    def breakpoints(self) -> list[Fraction]:
        """Values of the first approximant at ``j/(nm)``, ``j = 0..nm``."""
        return list(self._tables[2])

    # -- evaluation -------------------------------------------------------
    def quantize(self, x) -> np.ndarray:
        """Fold ``x`` into ``[0, 1]`` by reflection and round onto the level-L grid."""
        y = np.mod(np.asarray(x, dtype=np.float64), 2.0)
        y = np.where(y > 1.0, 2.0 - y, y)
        L, powers = self._quant
        return np.rint(y * float(powers[L])).astype(np.int64)

    def evaluate(self, x, depth: int | None = None) -> np.ndarray:
        """Vectorized ``phi`` (or its depth-``depth`` approximant) on reals."""
        x = np.asarray(x, dtype=np.float64)
        L, powers = self._quant
        y0, step, _ = self._tables
        q = self.quantize(x.reshape(-1))
        d = L if depth is None else int(depth)
        out = kernels.phi_quantized(q, powers, self.nm, self.m, y0, step, d)
        return out.reshape(x.shape)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ValueError("auxiliary function is defined on the real line")
            x = x[:, 0]
        return self.evaluate(x)

    def exact(self, x, depth: int) -> tuple[Fraction, bool]:
        """Depth-``depth`` approximant at a rational ``x`` in exact arithmetic.

        Returns ``(value, is_grid_point)``; on grid points of level at most
        ``depth`` the value equals the limit function exactly.
        """
        t = Fraction(x) % 2
        if t > 1:
            t = 2 - t
        if t == 1:
            return Fraction(1), True
        _, _, exact = self._tables
        nm, m = self.nm, self.m
        a, s = Fraction(0), Fraction(1)
        for _ in range(depth):
            t *= nm
            dg = int(t)  # floor, t >= 0
            t -= dg
            a += s * exact[dg]
            s *= exact[dg + 1] - exact[dg]
            if t == 0:
                return a, True
        return a + s * t, t == 0

    @cached_property
    def holder_constant(self) -> float:
        """Largest ``|phi(x)-phi(y)| / |x-y|**alpha`` over level-4 grid pairs (capped at 2000 points).

        The sup over all pairs is at least this value; the grid sup settles
        by level 4 (e.g. 1.8616, 1.8634 at levels 4, 5 for ``(3, 2)``).
        """
        level = 4
        while self.nm ** level > 2000 and level > 1:
            level -= 1
        N = self.nm ** level
        vals = np.array([float(self.exact(Fraction(i, N), level)[0]) for i in range(N + 1)])
        alpha = self.alpha
        best = 0.0
        for i in range(N):
            d = np.arange(1, N + 1 - i) / N
            best = max(best, float((np.abs(vals[i + 1:] - vals[i]) / d ** alpha).max()))
        return best


def phi_eval(aux: AuxiliaryFunction, x, depth: int) -> tuple[float, float]:
    """Depth-``depth`` approximant of ``phi`` at ``x`` with an error bound.

    Rational inputs (``int`` or ``Fraction``) use exact arithmetic, and a
    grid point of level ``<= depth`` reports error ``0``.  Float inputs are
    rounded onto the level-``L`` grid first; that rounding is included in the
    bound via the sampled Hölder constant.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    m = aux.m
    if isinstance(x, (Fraction, Integral)) and not isinstance(x, bool):
        value, on_grid = aux.exact(x, depth)
        return float(value), 0.0 if on_grid else float(Fraction(1, m ** depth))
    xf = float(x)
    value = float(aux.evaluate(np.array([xf]), depth)[0])
    L, powers = aux._quant
    y = xf % 2.0
    y = 2.0 - y if y > 1.0 else y
    scaled = y * float(powers[L])
    q = int(round(scaled))
    rounding = abs(scaled - q) / float(powers[L])
    err = 0.0
    if rounding > 0:
        err += aux.holder_constant * 1.01 * rounding ** aux.alpha
    tail = q % int(powers[L - min(depth, L)]) if depth < L else 0
    if tail:
        err += float(m) ** -depth
    return value, err


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------


def permitted_pair(alpha: float, epsilon: float, K: int, m_ceiling: int = 100_000) -> tuple[int, int]:
    """Smallest ``m > K`` (then smallest odd ``n``) with exponent in ``(alpha + eps/2, alpha + eps)``."""
    if not (alpha > 0 and epsilon > 0 and alpha + epsilon < 1):
        raise ValueError("need 0 < alpha, 0 < epsilon, alpha + epsilon < 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    lo, hi = alpha + epsilon / 2, alpha + epsilon
    for m in range(int(K) + 1, m_ceiling + 1):
        # exponent decreases in n: need m**(1/hi - 1) < n < m**(1/lo - 1)
        n = max(3, int(math.floor(m ** (1.0 / hi - 1.0))) - 2)
        if n % 2 == 0:
            n += 1
        upper = m ** (1.0 / lo - 1.0) + 2
        while n <= upper:
            a = holder_exponent(n, m)
            if lo < a < hi:
                return n, m
            if a <= lo:
                break
            n += 2
    raise SearchExhaustedError(f"no permitted pair with {K} < m <= {m_ceiling} for ({lo}, {hi})")


def k_epsilon(c: float, alpha: float, epsilon: float, lipschitz: float,
              phi_constant: float = 1.0) -> int:
    """Smallest ``K`` for which the two difference bounds cover every distance.

    Small distances ``d <= d0`` are handled by
    ``phi_constant * (lipschitz * d)**(alpha + eps/2) <= d**alpha``; large ones,
    ``d >= d1``, by ``c * d**alpha + 2/K <= d**alpha``.  ``K`` is minimal with
    ``d1 <= d0``, i.e. ``2/K <= (1 - c) * d0**alpha``.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    beta = alpha + epsilon / 2
    if not (0 < alpha < beta < 1):
        raise ValueError("need 0 < alpha < alpha + epsilon/2 < 1")
    if lipschitz <= 0 or phi_constant <= 0:
        raise ValueError("lipschitz and phi_constant must be positive")
    log_d0 = -(math.log(phi_constant) + beta * math.log(lipschitz)) / (epsilon / 2)
    log_bound = math.log1p(-c) + alpha * log_d0
    if log_bound > math.log(2.0):
        return 1
    bound = math.exp(log_bound)
    K = max(1, math.ceil(2.0 / bound))
    while K > 1 and 2.0 / (K - 1) <= bound:
        K -= 1
    while 2.0 / K > bound:
        K += 1
    return K


# ---------------------------------------------------------------------------
# Affine pieces and compositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineFunction:
    gradient: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        g = np.array(self.gradient, dtype=np.float64).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.gradient.size

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.gradient))

    @property
    def holder(self):
        return (self.lipschitz, 1.0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        return x @ self.gradient + self.offset


@dataclass(frozen=True, eq=False)
class ComposedFunction:
    """``x -> phi(h(x))`` with ``phi`` reflected outside ``[0, 1]``."""

    aux: AuxiliaryFunction
    h: AffineFunction
    depth: int | None = None

    @property
    def dim(self) -> int:
        return self.h.dim

    @property
    def holder(self):
        """Global Hölder data ``(C_phi * M**a, a)`` with ``a`` the auxiliary exponent."""
        a = self.aux.alpha
        return (self.aux.holder_constant * self.h.lipschitz ** a, a)

    def __call__(self, x) -> np.ndarray:
        return self.aux.evaluate(self.h(x), self.depth)


def compose(aux: AuxiliaryFunction, h: AffineFunction, tol: float | None = None) -> ComposedFunction:
    """``phi_{n,m} o h``; ``tol`` picks the approximant depth (``None``: full precision)."""
    depth = None
    if tol is not None:
        if tol <= 0:
            raise ValueError("tol must be positive")
        depth = max(1, math.ceil(math.log(1.0 / tol) / math.log(aux.m)))
    return ComposedFunction(aux, h, depth)


# ---------------------------------------------------------------------------
# Hölder extension
# ---------------------------------------------------------------------------


def _pairwise_check(points, values, c, alpha, rtol=1e-12):
    n = len(values)
    for i in range(n - 1):
        d = np.sqrt(((points[i + 1:] - points[i]) ** 2).sum(axis=1))
        dv = np.abs(values[i + 1:] - values[i])
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = c * d ** alpha
        bad = dv > bound * (1 + rtol) + 1e-300
        if bad.any():
            j = int(np.argmax(bad))
            ratio = float(dv[j] / d[j] ** alpha) if d[j] > 0 else math.inf
            raise InconsistentSamplesError(i, i + 1 + j, ratio)


@dataclass(frozen=True, eq=False)
class McShaneExtension:
    """``x -> min_i (v_i + c |x - x_i|**alpha)``: a ``c``-Hölder-``alpha`` extension."""

    points: np.ndarray
    values: np.ndarray
    c: float
    alpha: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(vals) == 0 or len(vals) != len(pts):
            raise ValueError("need a non-empty, matching list of points and values")
        if not (self.c > 0 and 0 < self.alpha <= 1):
            raise ValueError("need c > 0 and 0 < alpha <= 1")
        _pairwise_check(pts, vals, self.c, self.alpha)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def holder(self):
        return (self.c, self.alpha)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        out = np.empty(len(x))
        chunk = max(1, 2_000_000 // len(self.values))
        for s in range(0, len(x), chunk):
            q = x[s:s + chunk]
            d = np.sqrt(((q[:, None, :] - self.points[None, :, :]) ** 2).sum(-1))
            out[s:s + chunk] = (self.values[None, :] + self.c * d ** self.alpha).min(axis=1)
        return out


def mcshane_extend(samples, c: float, alpha: float, query) -> float | np.ndarray:
    """Evaluate the McShane extension of ``samples = [(point, value), ...]`` at ``query``."""
    pts = [np.atleast_1d(np.asarray(p, dtype=np.float64)) for p, _ in samples]
    vals = [float(v) for _, v in samples]
    ext = McShaneExtension(np.array(pts), np.array(vals), c, alpha)
    q = np.asarray(query, dtype=np.float64)
    if q.ndim <= 1 and q.size == ext.dim:
        return float(ext(q.reshape(1, -1))[0])
    return ext(q)


# ---------------------------------------------------------------------------
# Sampled certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderCertificate:
    constant: float
    exponent: float
    sample_count: int
    max_ratio: float
    seed: int
    worst_pair: tuple = field(default=(), compare=False)

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.constant


@dataclass(frozen=True)
class IntervalSampler:
    """Pairs in ``[lo, hi]``; ``quantum`` snaps points onto a grid of that spacing."""

    lo: float = 0.0
    hi: float = 1.0
    quantum: float | None = None

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def __call__(self, rng, scale, n):
        d = rng.uniform(0.5, 1.0, n) * min(scale, self.diameter)
        x = rng.uniform(self.lo, self.hi - d)
        y = x + d
        if self.quantum:
            q = self.quantum
            x = self.lo + np.rint((x - self.lo) / q) * q
            y = self.lo + np.rint((y - self.lo) / q) * q
        return x[:, None], y[:, None]


@dataclass(frozen=True)
class BoxSampler:
    lo: tuple
    hi: tuple

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def __call__(self, rng, scale, n):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        p = lo.size
        x = rng.uniform(lo, hi, size=(n, p))
        v = rng.normal(size=(n, p))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        y = np.clip(x + v * (rng.uniform(0.5, 1.0, n) * scale)[:, None], lo, hi)
        return x, y


@dataclass(frozen=True, eq=False)
class AttractorSampler:
    """Pairs of attractor points sharing a word prefix sized to the target scale."""

    system: object
    depth: int = 40

    @property
    def diameter(self) -> float:
        return self.system.attractor_diameter()

    def _points(self, letters):
        sys = self.system
        ratios, orth, trans = sys.ratios, sys.orthogonals, sys.translations
        pts = np.broadcast_to(sys.fixed_points()[0], (letters.shape[0], sys.ambient_dim)).copy()
        for j in range(letters.shape[1] - 1, -1, -1):
            col = letters[:, j]
            for i in range(len(sys.maps)):
                sel = col == i
                if sel.any():
                    pts[sel] = ratios[i] * pts[sel] @ orth[i].T + trans[i]
        return pts

    def __call__(self, rng, scale, n):
        nmaps = len(self.system.maps)
        rmax = float(self.system.ratios.max())
        share = int(max(0, math.floor(math.log(min(1.0, scale / self.diameter)) / math.log(rmax))))
        share = min(share, self.depth - 1)
        a = rng.integers(0, nmaps, size=(n, self.depth))
        b = rng.integers(0, nmaps, size=(n, self.depth))
        b[:, :share] = a[:, :share]
        return self._points(a), self._points(b)


def holder_certify(f: Callable, domain_sampler, c: float, alpha: float, pairs: int,
                   seed: int, octaves: int = 32) -> HolderCertificate:
    """Sampled Hölder check with equal pair counts per dyadic distance octave."""
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    octaves = max(1, min(octaves, pairs))
    per = [pairs // octaves + (1 if j < pairs % octaves else 0) for j in range(octaves)]
    streams = np.random.SeedSequence(seed).spawn(octaves)
    diam = float(domain_sampler.diameter)
    best, worst = 0.0, ()
    for j, (count, ss) in enumerate(zip(per, streams)):
        if count == 0:
            continue
        rng = np.random.default_rng(ss)
        x, y = domain_sampler(rng, diam * 2.0 ** -j, count)
        fx = np.asarray(f(x), dtype=np.float64).reshape(-1)
        fy = np.asarray(f(y), dtype=np.float64).reshape(-1)
        dist = np.sqrt(((np.asarray(x) - np.asarray(y)) ** 2).reshape(count, -1).sum(axis=1))
        ok = dist > 0
        if not ok.any():
            continue
        ratio = np.abs(fx[ok] - fy[ok]) / dist[ok] ** alpha
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best = float(ratio[k])
            idx = np.flatnonzero(ok)[k]
            worst = (tuple(np.atleast_1d(x[idx]).tolist()), tuple(np.atleast_1d(y[idx]).tolist()))
    return HolderCertificate(float(c), float(alpha), int(pairs), best, int(seed), worst)
