"""Piecewise affine functions on simplices and the translation search."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .holder import BoxSampler, HolderCertificate, holder_certify

DEGENERACY = 1e-14


class CertificationError(RuntimeError):
    def __init__(self, message, certificate: HolderCertificate):
        super().__init__(message)
        self.certificate = certificate


class BudgetExhaustedError(RuntimeError):
    def __init__(self, best, violating):
        super().__init__(f"no admissible translation found; best candidate {best.tolist()} "
                         f"leaves simplices {violating} on the boundary")
        self.best = best
        self.violating = violating


def _kuhn_permutations(p):
    return [np.array(perm) for perm in itertools.permutations(range(p))]


def _affine_fit(verts, vals):
    """Gradient and offset of the affine map through ``p+1`` vertex values."""
    a = verts[:, 1:, :] - verts[:, :1, :]
    b = vals[:, 1:] - vals[:, :1]
    grad = np.linalg.solve(a, b[..., None])[..., 0]
    offset = vals[:, 0] - np.einsum("sp,sp->s", grad, verts[:, 0, :])
    return grad, offset


@dataclass(frozen=True, eq=False)
class PiecewiseAffine:
    """Affine pieces on non-overlapping simplices.

    ``simplices`` has shape ``(S, p+1, p)`` and ``vertex_values`` shape
    ``(S, p+1)``.  Functions built by :func:`pwa_approximate` also carry the
    underlying Kuhn grid, which gives O(1) point location.
    """

    simplices: np.ndarray
    vertex_values: np.ndarray
    holder_constant: float = math.inf
    holder_exponent: float = 1.0
    shift: np.ndarray | None = None
    _grid: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        simp = np.array(self.simplices, dtype=np.float64)
        vals = np.array(self.vertex_values, dtype=np.float64)
        if simp.ndim != 3 or simp.shape[2] + 1 != simp.shape[1]:
            raise ValueError("simplices must have shape (S, p+1, p)")
        if vals.shape != simp.shape[:2]:
            raise ValueError("vertex_values must have shape (S, p+1)")
        vol = np.abs(np.linalg.det(simp[:, 1:, :] - simp[:, :1, :])) / math.factorial(simp.shape[2])
        if np.any(vol <= DEGENERACY):
            raise ValueError("degenerate simplex")
        shift = np.zeros(simp.shape[2]) if self.shift is None else np.asarray(self.shift, float)
        object.__setattr__(self, "simplices", simp)
        object.__setattr__(self, "vertex_values", vals)
        object.__setattr__(self, "shift", shift)
        grad, off = _affine_fit(simp, vals)
        object.__setattr__(self, "_grad", grad)
        object.__setattr__(self, "_off", off)

    @property
    def dim(self) -> int:
        return self.simplices.shape[2]

    @property
    def holder(self):
        return (self.holder_constant, self.holder_exponent)

    @property
    def gradients(self) -> np.ndarray:
        return self._grad

    @property
    def offsets(self) -> np.ndarray:
        return self._off

    def pieces(self):
        from .holder import AffineFunction
        return [AffineFunction(g, b) for g, b in zip(self._grad, self._off)]

    def placed_simplices(self) -> np.ndarray:
        """Simplices in the frame where the function is evaluated (``S - shift``)."""
        return self.simplices - self.shift

    def translated(self, u) -> "PiecewiseAffine":
        """``x -> f(x + u)``; its simplices are ``S - u``."""
        return PiecewiseAffine(self.simplices, self.vertex_values, self.holder_constant,
                               self.holder_exponent, self.shift + np.asarray(u, float), self._grid)

    def barycentric(self, x):
        """Barycentric coordinates of ``x`` (N, p) in every simplex -> (N, S, p+1)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim) + self.shift
        simp = self.simplices
        t = np.transpose(simp[:, 1:, :] - simp[:, :1, :], (0, 2, 1))
        tinv = np.linalg.inv(t)
        rel = x[:, None, :] - simp[None, :, 0, :]
        lam = np.einsum("sij,nsj->nsi", tinv, rel)
        return np.concatenate([1.0 - lam.sum(-1, keepdims=True), lam], axis=-1)

    def locate(self, x) -> np.ndarray:
        """Index of a simplex containing each point (-1 when outside all)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        if self._grid is not None:
            return self._grid_locate(x + self.shift)
        out = np.full(len(x), -1, np.int64)
        for s in range(0, len(x), 4096):
            lam = self.barycentric(x[s:s + 4096])
            inside = lam.min(axis=-1) >= -1e-12
            has = inside.any(axis=1)
            out[s:s + 4096][has] = np.argmax(inside, axis=1)[has]
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        idx = self.locate(x)
        if np.any(idx < 0):
            raise ValueError("point outside the triangulated domain")
        return np.einsum("np,np->n", self._grad[idx], x + self.shift) + self._off[idx]

    # -- Kuhn grid support -------------------------------------------------
    def _grid_locate(self, x):
        lo, spacing, shape, perms = self._grid
        p = self.dim
        u = (x - lo) / spacing
        cell = np.clip(np.floor(u).astype(np.int64), 0, np.asarray(shape) - 1)
        frac = u - cell
        order = np.argsort(-frac, axis=1, kind="stable")
        # permutation rank in itertools.permutations order
        rank = np.zeros(len(x), np.int64)
        remaining = np.tile(np.arange(p), (len(x), 1))
        for j in range(p):
            pos = np.argmax(remaining == order[:, j:j + 1], axis=1)
            rank = rank * (p - j) + pos
            keep = np.ones_like(remaining, dtype=bool)
            keep[np.arange(len(x)), pos] = False
            remaining = remaining[keep].reshape(len(x), p - j - 1)
        lin = np.ravel_multi_index(tuple(cell.T), shape)
        return lin * len(perms) + rank

    def validate(self, samples: int = 2000, seed: int = 0) -> None:
        """Check continuity across shared vertices and sampled interior-disjointness."""
        verts = self.simplices.reshape(-1, self.dim)
        vals = self.vertex_values.reshape(-1)
        key = np.round(verts / 1e-9).astype(np.int64)
        _, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        lo = np.full(inv.max() + 1, np.inf)
        hi = np.full(inv.max() + 1, -np.inf)
        np.minimum.at(lo, inv, vals)
        np.maximum.at(hi, inv, vals)
        if np.max(hi - lo) > 1e-9:
            raise ValueError("pieces disagree on shared vertices")
        rng = np.random.default_rng(seed)
        box_lo, box_hi = verts.min(axis=0), verts.max(axis=0)
        pts = rng.uniform(box_lo, box_hi, size=(samples, self.dim)) - self.shift
        for s in range(0, samples, 1024):
            lam = self.barycentric(pts[s:s + 1024])
            strict = (lam.min(axis=-1) > 1e-9).sum(axis=1)
            if np.any(strict > 1):
                raise ValueError("simplices overlap")


def kuhn_simplices(lo, hi, shape):
    """Freudenthal/Kuhn triangulation of a box split into ``shape`` cubes."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    shape = tuple(int(s) for s in shape)
    p = lo.size
    spacing = (hi - lo) / np.asarray(shape)
    perms = _kuhn_permutations(p)
    cells = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), -1).reshape(-1, p)
    out = np.empty((len(cells), len(perms), p + 1, p), np.int64)
    for k, perm in enumerate(perms):
        v = cells.copy()
        out[:, k, 0] = v
        for j in range(p):
            v = v.copy()
            v[:, perm[j]] += 1
            out[:, k, j + 1] = v
    return out.reshape(-1, p + 1, p), spacing, perms


def pwa_approximate(f, domain_box, mesh: float, c_target: float, alpha: float,
                    pairs: int = 20000, seed: int = 0, sampler=None,
                    source_constant: float | None = None) -> PiecewiseAffine:
    """Kuhn-mesh interpolant of ``f`` made locally non-constant and certified.

    Simplices have diameter ``<= mesh``.  Constant pieces are broken by
    nudging one of their vertex values by at most
    ``mesh**alpha * (c_target - c_f) / 4`` where ``c_f`` is the sampled
    constant of ``f``.
    """
    lo, hi = (np.asarray(b, float) for b in domain_box)
    p = lo.size
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    step = mesh / math.sqrt(p)
    shape = np.maximum(1, np.ceil((hi - lo) / step - 1e-12).astype(np.int64))
    idx, spacing, perms = kuhn_simplices(lo, hi, shape)
    grid_axes = [lo[j] + np.arange(shape[j] + 1) * spacing[j] for j in range(p)]
    grid_axes = [np.where(np.arange(shape[j] + 1) == shape[j], hi[j], a) for j, a in enumerate(grid_axes)]
    mesh_pts = np.stack(np.meshgrid(*grid_axes, indexing="ij"), -1)
    grid_vals = np.asarray(f(mesh_pts.reshape(-1, p)), dtype=np.float64).reshape(tuple(shape + 1))

    sampler = sampler or BoxSampler(tuple(lo), tuple(hi))
    if source_constant is None:
        source_constant = holder_certify(f, sampler, c_target, alpha, pairs, seed).max_ratio
    if source_constant >= c_target:
        raise ValueError(f"source constant {source_constant:.6g} is not below c_target {c_target}")
    nudge = mesh ** alpha * (c_target - source_constant) / 4.0

    simp = mesh_pts[tuple(np.moveaxis(idx, -1, 0))]
    # each vertex moves at most once, so every value stays within ``nudge`` of f
    rng = np.random.default_rng(seed)
    moved = np.zeros(grid_vals.shape, dtype=bool)
    while True:
        vals = grid_vals[tuple(np.moveaxis(idx, -1, 0))]
        flat = np.flatnonzero(np.ptp(vals, axis=1) == 0.0)
        progress = False
        for s in flat:
            free = [tuple(v) for v in idx[s][::-1] if not moved[tuple(v)]]
            if not free:
                continue
            grid_vals[free[0]] += nudge * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
            moved[free[0]] = True
            progress = True
        if not progress:
            break
    vals = grid_vals[tuple(np.moveaxis(idx, -1, 0))]

    out = PiecewiseAffine(simp, vals, c_target, alpha, None, (lo, spacing, tuple(shape), perms))
    cert = holder_certify(out, sampler, c_target, alpha, pairs, seed + 1)
    if cert.max_ratio >= c_target:
        raise CertificationError(
            f"interpolant ratio {cert.max_ratio:.6g} >= {c_target} at {cert.worst_pair}", cert)
    object.__setattr__(out, "holder_constant", c_target)
    return out


# ---------------------------------------------------------------------------
# Translation search
# ---------------------------------------------------------------------------


def _inward_facets(simp):
    """Unit inward normals ``(S, p+1, p)`` and offsets so ``h(x) = n.x - b >= 0`` inside."""
    S, k, p = simp.shape
    normals = np.empty((S, k, p))
    offsets = np.empty((S, k))
    for f in range(k):
        face = np.delete(simp, f, axis=1)
        opp = simp[:, f, :]
        if p == 1:
            nvec = np.ones((S, 1))
        else:
            e = face[:, 1:, :] - face[:, :1, :]
            # normal = null vector of the face edges
            _, _, vt = np.linalg.svd(e)
            nvec = vt[:, -1, :]
        b = np.einsum("sp,sp->s", nvec, face[:, 0, :])
        sign = np.sign(np.einsum("sp,sp->s", nvec, opp) - b)
        nvec = nvec * sign[:, None]
        b = b * sign
        normals[:, f] = nvec
        offsets[:, f] = b
    return normals, offsets


@dataclass(frozen=True)
class TranslationResult:
    u: np.ndarray
    margins: np.ndarray
    margin: float
    candidates: int

    @property
    def ok(self) -> bool:
        return bool(np.all(self.margins > 0))


def simplex_scores(simplices, points) -> np.ndarray:
    """Max over points of the inward depth ``min_f h_f(x)`` for each simplex."""
    normals, offsets = _inward_facets(simplices)
    out = np.empty(len(simplices))
    chunk = max(1, (1 << 22) // max(1, len(points) * normals.shape[1]))
    for s in range(0, len(simplices), chunk):
        h = np.einsum("skp,np->skn", normals[s:s + chunk], points) - offsets[s:s + chunk, :, None]
        out[s:s + chunk] = h.min(axis=1).max(axis=1)
    return out


def translation_adjust(pwa: PiecewiseAffine, system, budget: int, seed: int,
                       bound: float | None = None, depth: int = 8) -> TranslationResult:
    """Find a small ``u`` making every simplex ``S - u`` non-boundary for the attractor.

    A simplex passes when some sampled attractor point sits deeper than the
    sampling gap inside it, or every sample is farther than the gap outside
    it; the reported margin is ``|score| - gap``.
    """
    pts = system.sample_points(depth)
    gap = system.sample_spacing(depth)
    simp = pwa.placed_simplices()
    if bound is None:
        edges = np.linalg.norm(simp[:, 1:, :] - simp[:, :1, :], axis=-1)
        bound = 0.25 * float(edges.min())
    rng = np.random.default_rng(seed)

    def evaluate(u):
        scores = simplex_scores(simp - u, pts)
        return np.abs(scores) - gap

    best_u, best = np.zeros(pwa.dim), evaluate(np.zeros(pwa.dim))
    if np.all(best > 0):
        return TranslationResult(best_u, best, gap, 1)
    for _ in range(budget):
        v = rng.normal(size=pwa.dim)
        v *= bound * rng.uniform() ** (1.0 / pwa.dim) / np.linalg.norm(v)
        margins = evaluate(v)
        if margins.min() > best.min():
            best_u, best = v, margins
    if np.all(best > 0):
        return TranslationResult(best_u, best, gap, budget + 1)
    raise BudgetExhaustedError(best_u, np.flatnonzero(best <= 0).tolist())
