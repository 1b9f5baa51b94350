"""End-to-end experiments: level-set dimensions, bound audit, slices, auxiliary level sets."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxdim import (SpectrumEstimate, fit_dimension, spectrum,
                     window_slopes, write_counts_csv, write_fits_csv)
from .holder import AffineFunction, AuxiliaryFunction, compose, k_epsilon, permitted_pair
from .ifs import (STOCK_SYSTEMS, CellSet, GridSpec, SimilaritySystem, attractor_levels,
                  moran_dimension)

R2_GATE = 0.95
AUDIT_SLACK = 0.1


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def resolve_system(ref: str, base_dir: str | Path | None = None) -> SimilaritySystem:
    """Stock system name (``gasket``, ``carpet``, ...) or path to an IFS JSON file."""
    if ref in STOCK_SYSTEMS:
        return STOCK_SYSTEMS[ref]()
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None and not path.exists():
        path = Path(base_dir) / path
    if not path.exists():
        raise FileNotFoundError(f"IFS file not found: {ref}")
    return SimilaritySystem.load(path)


@dataclass(frozen=True)
class ExperimentConfig:
    system_ref: str = "gasket"
    alpha: float = 0.3
    epsilon: float = 0.1
    seed: int = 0
    levels: tuple = (2, 5)
    num_level_values: int = 20
    percentile: float = 10.0
    base_override: int | None = None
    h_holder: float = 0.1

    def __post_init__(self):
        lv = self.levels
        if not isinstance(lv, (list, tuple)) or len(lv) != 2:
            raise ConfigError("levels", "must be a pair [k_min, k_max]")
        object.__setattr__(self, "levels", (_as_int("levels[0]", lv[0]), _as_int("levels[1]", lv[1])))
        for name in ("alpha", "epsilon", "percentile", "h_holder"):
            object.__setattr__(self, name, _as_float(name, getattr(self, name)))
        for name in ("seed", "num_level_values"):
            object.__setattr__(self, name, _as_int(name, getattr(self, name)))
        if self.base_override is not None:
            object.__setattr__(self, "base_override", _as_int("base_override", self.base_override))
            if self.base_override < 2:
                raise ConfigError("base_override", "must be >= 2")
        if not isinstance(self.system_ref, str) or not self.system_ref:
            raise ConfigError("system_ref", "must be a non-empty string")
        if not 0 < self.alpha < self.alpha + self.epsilon < 1:
            raise ConfigError("alpha", "need 0 < alpha < alpha + epsilon < 1")
        k_min, k_max = self.levels
        if k_min < 0 or k_max < k_min + 2:
            raise ConfigError("levels", "need 0 <= k_min and k_max >= k_min + 2")
        if self.num_level_values < 1:
            raise ConfigError("num_level_values", "must be >= 1")
        if not 0 <= self.percentile <= 100:
            raise ConfigError("percentile", "must lie in [0, 100]")
        if not 0 < self.h_holder < 1:
            raise ConfigError("h_holder", "must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


def _as_int(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise ConfigError(path, f"expected an integer, got {v!r}")
    return int(v)


def _as_float(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return v


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _fingerprint(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass
class ExperimentReport:
    s: float
    alpha_nm: float
    predicted: float
    spectrum: SpectrumEstimate
    upper_bound_violations: list
    runtime_ms: int
    config_echo: ExperimentConfig
    n: int = 0
    m: int = 0
    K: int = 0
    gradient: tuple = ()
    lipschitz: float = 0.0
    thickening: tuple = ()
    cover_counts: tuple = ()
    low_confidence: tuple = ()
    window_diagnostics: dict = field(default_factory=dict)

    @property
    def median(self) -> float:
        return self.spectrum.median

    @property
    def confident_fraction(self) -> float:
        fits = self.spectrum.fits
        return sum(f.r_squared >= R2_GATE for f in fits) / len(fits)

    def to_dict(self, runtime: bool = True) -> dict:
        d = {
            "kind": "main",
            "s": self.s, "alpha_nm": self.alpha_nm, "predicted": self.predicted,
            "n": self.n, "m": self.m, "K": self.K,
            "median": self.median,
            "confident_fraction": self.confident_fraction,
            "gradient": list(self.gradient), "lipschitz": self.lipschitz,
            "thickening": list(self.thickening),
            "cover_counts": [list(r) for r in self.cover_counts],
            "spectrum": self.spectrum.to_dict(),
            "low_confidence": list(self.low_confidence),
            "upper_bound_violations": list(self.upper_bound_violations),
            "window_diagnostics": self.window_diagnostics,
            "config_echo": self.config_echo.to_dict(),
        }
        if runtime:
            d["runtime_ms"] = self.runtime_ms
        return d

    def fingerprint(self) -> str:
        """Hash of everything except wall-clock time."""
        return _fingerprint(self.to_dict(runtime=False))


@dataclass
class AuditReport:
    s_fit: float
    alpha_cert: float
    slack: float
    bound: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"kind": "audit", **dataclasses.asdict(self)}


@dataclass
class SliceSurveyReport:
    s: float
    predicted: float
    directions: list
    per_direction_medians: list
    global_median: float
    skipped: list
    dims: list
    runtime_ms: int
    seed: int
    levels: tuple

    def to_dict(self, runtime: bool = True) -> dict:
        d = {k: v for k, v in dataclasses.asdict(self).items() if runtime or k != "runtime_ms"}
        d["kind"] = "slices"
        d["levels"] = list(self.levels)
        return d

    def fingerprint(self) -> str:
        return _fingerprint(self.to_dict(runtime=False))


@dataclass
class PhiLevelsetReport:
    n: int
    m: int
    predicted: float
    median: float
    spectrum: SpectrumEstimate
    runtime_ms: int
    seed: int
    levels: tuple

    def to_dict(self, runtime: bool = True) -> dict:
        d = {"kind": "phi_levelsets", "n": self.n, "m": self.m, "predicted": self.predicted,
             "median": self.median, "spectrum": self.spectrum.to_dict(), "seed": self.seed,
             "levels": list(self.levels)}
        if runtime:
            d["runtime_ms"] = self.runtime_ms
        return d

    def fingerprint(self) -> str:
        return _fingerprint(self.to_dict(runtime=False))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _random_unit(rng, p):
    v = rng.normal(size=p)
    return v / np.linalg.norm(v)


def central_values(lo, hi, count):
    """``count`` equispaced values across the central 80% of ``[lo, hi]``."""
    a, b = lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)
    if count == 1:
        return np.array([(a + b) / 2])
    return a + (b - a) * np.arange(count) / (count - 1)


def run_main(config: ExperimentConfig, base_dir=None, workers: int | None = None) -> ExperimentReport:
    """Level-set dimension spectrum of ``phi_{n,m} o h`` on the configured attractor."""
    t0 = time.perf_counter()
    system = resolve_system(config.system_ref, base_dir)
    if not (system.connected_assertion and system.osc_assertion):
        raise ValueError("the system must assert connectedness and the open set condition")
    s = moran_dimension(system)
    p = system.ambient_dim
    rng = np.random.default_rng(config.seed)

    # base affine map: random unit direction, scaled into [0, 1] and to the Hölder budget
    u = _random_unit(rng, p)
    lo, hi = system.projection_bounds(u)
    diam = system.attractor_diameter()
    M = min(1.0 / (hi - lo), config.h_holder / diam ** (1.0 - config.alpha))
    h = AffineFunction(u * M, -M * lo)
    c_h = M * diam ** (1.0 - config.alpha)

    probe = AuxiliaryFunction(3, 2)
    K = k_epsilon(c_h, config.alpha, config.epsilon, M, probe.holder_constant)
    n, m = permitted_pair(config.alpha, config.epsilon, K)
    aux = AuxiliaryFunction(n, m)
    K = k_epsilon(c_h, config.alpha, config.epsilon, M, aux.holder_constant)
    g = compose(aux, h)

    base = config.base_override or n * m
    k_min, k_max = config.levels
    spec = GridSpec.for_system(system, base)
    covers = attractor_levels(system, spec, range(k_min, k_max + 1), workers=workers)
    finest = np.asarray(g(covers[k_max].centers()))
    values = central_values(float(finest.min()), float(finest.max()), config.num_level_values)
    rule = g.holder
    est = spectrum(g, system, spec, range(k_min, k_max + 1), values, rule,
                   config.percentile, k_min, k_max, covers=covers, workers=workers)
    cover_counts = tuple((k, len(covers[k])) for k in range(k_min, k_max + 1))
    low = tuple(r for r, f in zip(est.level_values, est.fits) if f.r_squared < R2_GATE)
    diag = {}
    for r, f in zip(est.level_values, est.fits):
        diag["%.17g" % r] = [list(w) for w in window_slopes(list(zip(f.levels, f.counts)), base)]

    report = ExperimentReport(
        s=s, alpha_nm=aux.alpha, predicted=s - aux.alpha, spectrum=est,
        upper_bound_violations=[], runtime_ms=0, config_echo=config,
        n=n, m=m, K=K, gradient=tuple(h.gradient.tolist()), lipschitz=M,
        thickening=tuple(rule), cover_counts=cover_counts, low_confidence=low,
        window_diagnostics=diag,
    )
    report.upper_bound_violations = run_upper_bound_audit(report).violations
    report.runtime_ms = int(round((time.perf_counter() - t0) * 1000))
    return report


def run_upper_bound_audit(report, slack: float = AUDIT_SLACK, counts_override=None) -> AuditReport:
    """Check every fitted level-set dimension against ``s_fit - alpha + slack``.

    ``report`` is an :class:`ExperimentReport` or its JSON dict.
    ``counts_override`` replaces every level-set count table (used to check
    that the auditor does flag impossible data).
    """
    d = report.to_dict() if isinstance(report, ExperimentReport) else report
    base = d["n"] * d["m"] if d["config_echo"].get("base_override") is None else d["config_echo"]["base_override"]
    s_fit = fit_dimension([tuple(r) for r in d["cover_counts"]], base).slope
    alpha_cert = float(d["alpha_nm"])
    bound = s_fit - alpha_cert + slack
    fits = d["spectrum"]["fits"]
    values = d["spectrum"]["level_values"]
    violations = []
    for r, fit in zip(values, fits):
        counts = list(zip(fit["levels"], fit["counts"]))
        if counts_override is not None:
            counts = list(counts_override)
        dim = fit_dimension(counts, base).slope
        if dim > bound:
            violations.append({"r": r, "dim": dim, "bound": bound})
    return AuditReport(s_fit, alpha_cert, slack, bound, violations)


def run_slice_survey(system: SimilaritySystem, num_directions: int = 20, offsets_per_direction: int = 20,
                     levels: tuple = (0, 5), seed: int = 0, base: int = 6,
                     workers: int | None = None) -> SliceSurveyReport:
    """Slice dimensions along random hyperplanes, compared with ``s - 1``."""
    t0 = time.perf_counter()
    s = moran_dimension(system)
    if s <= 1:
        raise ValueError(f"slice dimension drop needs dimension > 1, got {s}")
    k_min, k_max = levels
    spec = GridSpec.for_system(system, base)
    covers = attractor_levels(system, spec, range(k_min, k_max + 1), workers=workers)
    rng = np.random.default_rng(seed)
    p = system.ambient_dim
    directions, medians, skipped, dims = [], [], [], []
    for _ in range(num_directions):
        u = _random_unit(rng, p)
        lo, hi = system.projection_bounds(u)
        offs = lo + (hi - lo) * (np.arange(offsets_per_direction) + 0.5) / offsets_per_direction
        f = AffineFunction(u, 0.0)
        # thickness sqrt(p) * delta / 2 = half the cell diagonal
        try:
            est = spectrum(f, system, spec, range(k_min, k_max + 1), offs, (0.5, 1.0),
                           0.0, covers=covers, workers=workers)
        except ValueError:
            skipped.extend((u.tolist(), float(a)) for a in offs)
            directions.append(u.tolist())
            medians.append(float("nan"))
            continue
        directions.append(u.tolist())
        medians.append(est.median)
        dims.extend(est.dims)
        skipped.extend((u.tolist(), float(a)) for a in est.excluded)
    return SliceSurveyReport(s, s - 1.0, directions, medians, float(np.median(dims)), skipped,
                             [float(x) for x in dims],
                             int(round((time.perf_counter() - t0) * 1000)), int(seed), tuple(levels))


def run_phi_levelsets(n: int = 3, m: int = 2, levels: tuple = (4, 8), num_values: int = 50,
                      seed: int = 0, workers: int | None = None) -> PhiLevelsetReport:
    """Level-set dimensions of the auxiliary function on the full base-``nm`` grid of ``[0, 1]``."""
    t0 = time.perf_counter()
    aux = AuxiliaryFunction(n, m)
    k_min, k_max = levels
    spec = GridSpec.unit(1, aux.nm)
    covers = {k: CellSet.full(spec.at_level(k)) for k in range(k_min, k_max + 1)}
    rng = np.random.default_rng(seed)
    values = np.sort(rng.uniform(0.1, 0.9, num_values))
    est = spectrum(aux, None, spec, range(k_min, k_max + 1), values,
                   (aux.holder_constant, aux.alpha), 10.0, k_min, k_max, covers=covers, workers=workers)
    return PhiLevelsetReport(n, m, 1.0 - aux.alpha, est.median, est,
                             int(round((time.perf_counter() - t0) * 1000)), int(seed), tuple(levels))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_loglog(path, series) -> None:
    """``series,k,logN`` rows from ``{name: [(k, N), ...]}``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "k", "logN"])
        for name, rows in series.items():
            for k, count in rows:
                if count > 0:
                    w.writerow([name, k, "%.17g" % math.log(count)])


def write_report(report, output_dir) -> Path:
    """Write ``report.json`` plus companion count/fit/loglog CSVs; return the JSON path."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    est = getattr(report, "spectrum", None)
    if est is not None:
        write_counts_csv(out / "counts.csv", est.counts)
        write_fits_csv(out / "fits.csv", est.level_values, est.fits)
        series = {"r=%.17g" % r: list(zip(f.levels, f.counts)) for r, f in zip(est.level_values, est.fits)}
        if getattr(report, "cover_counts", None):
            series = {"cover": list(report.cover_counts), **series}
        write_loglog(out / "loglog.csv", series)
    return path
