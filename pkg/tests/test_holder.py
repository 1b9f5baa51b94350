import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractal_levelsets.holder import (AffineFunction, AttractorSampler, AuxiliaryFunction, BoxSampler,
                                      InconsistentSamplesError, IntervalSampler, McShaneExtension, compose,
                                      holder_certify, holder_exponent, k_epsilon, mcshane_extend,
                                      permitted_pair, phi_eval)
from fractal_levelsets.ifs import sierpinski_gasket

AUX = AuxiliaryFunction(3, 2)


# -- phi ------------------------------------------------------------------

def test_phi_examples():
    assert phi_eval(AUX, Fraction(0), 5) == (0.0, 0.0)
    assert phi_eval(AUX, Fraction(1, 6), 1) == (0.5, 0.0)
    assert phi_eval(AUX, -0.25, 12)[0] == phi_eval(AUX, 0.25, 12)[0]


def test_phi_breakpoints_zigzag():
    assert AUX.breakpoints() == [Fraction(v, 2) for v in (0, 1, 0, 1, 2, 1, 2)]


def test_phi_rejects_bad_depth():
    with pytest.raises(ValueError):
        phi_eval(AUX, 0.3, 0)


@pytest.mark.parametrize("depth", [1, 3, 6])
def test_phi_error_bound(depth):
    # deep exact value vs shallow approximant
    for i in range(1, 200):
        x = Fraction(i, 199)
        v, err = phi_eval(AUX, x, depth)
        exact, _ = AUX.exact(x, 30)
        assert abs(float(exact) - v) <= err + 1e-15


def test_float_error_bound_covers_exact():
    rng = np.random.default_rng(3)
    for x in rng.uniform(0, 1, 200):
        v, err = phi_eval(AUX, float(x), 8)
        exact, _ = AUX.exact(Fraction(float(x)), 40)
        assert abs(float(exact) - v) <= err + 1e-12


def test_grid_points_fixed_across_depths():
    for k in (1, 2, 3):
        N = 6 ** k
        for i in range(N + 1):
            assert phi_eval(AUX, Fraction(i, N), k) == phi_eval(AUX, Fraction(i, N), k + 1)


@pytest.mark.parametrize("nm_pair", [(3, 2), (5, 3), (3, 4)])
def test_interval_preservation(nm_pair):
    aux = AuxiliaryFunction(*nm_pair)
    m = aux.m
    x = np.random.default_rng(1).uniform(0, 1, 20000)
    y = aux(x)
    blk = np.minimum(np.floor(x * m), m - 1)
    assert np.all(y >= blk / m - 1e-12) and np.all(y <= (blk + 1) / m + 1e-12)


def test_sup_norm_on_grid():
    N = 6 ** 6
    x = np.arange(N + 1) / N
    assert np.max(np.abs(AUX.evaluate(x, 6) - x)) <= 0.5


@settings(max_examples=200, deadline=None)
@given(st.integers(-50 * 2 ** 30, 50 * 2 ** 30))
def test_reflection_symmetry(k):
    # dyadic inputs keep x + 2 exact; phi is only Hölder, so rounding x would be amplified
    x = k / 2 ** 30
    a = AUX(np.array([x, -x, x + 2.0]))
    assert a[0] == a[1] == a[2]


def test_phi_holder_constant_exceeds_one():
    # exact witness: phi(1/18) = 0, phi(1/9) = 1/2, so the ratio is 18**alpha / 2 > 1
    assert AUX.exact(Fraction(1, 18), 2)[0] == 0
    assert AUX.exact(Fraction(1, 9), 2)[0] == Fraction(1, 2)
    assert 0.5 * 18 ** AUX.alpha > 1.5
    assert AUX.holder_constant > 1.8


# -- exponents and parameters -----------------------------------------------

def test_holder_exponent_examples():
    assert holder_exponent(3, 2) == pytest.approx(math.log(2) / math.log(6), abs=1e-12)
    assert holder_exponent(3, 3) == pytest.approx(0.5, abs=1e-15)
    assert holder_exponent(9, 2) == pytest.approx(math.log(2) / math.log(18), abs=1e-12)


@pytest.mark.parametrize("n,m", [(4, 2), (1, 2), (3, 1), (3.0, 2)])
def test_holder_exponent_rejects(n, m):
    with pytest.raises(ValueError):
        holder_exponent(n, m)


@pytest.mark.parametrize("n,m", [(n, m) for n in (3, 7, 15, 101) for m in (2, 3, 10)])
def test_exponent_identity(n, m):
    assert abs(n - (n * m) ** (1 - holder_exponent(n, m))) < 1e-12 * n


def _scan(alpha, eps, K):
    for m in range(K + 1, 51):
        for n in range(3, 10 ** 6, 2):
            a = holder_exponent(n, m)
            if a <= alpha + eps / 2:
                break
            if a < alpha + eps:
                return n, m


@pytest.mark.parametrize("alpha,eps,K", [(0.3, 0.2, 2), (0.5, 0.4, 2), (0.3, 0.1, 1), (0.1, 0.05, 5)])
def test_permitted_pair_matches_scan(alpha, eps, K):
    n, m = permitted_pair(alpha, eps, K)
    assert alpha + eps / 2 < holder_exponent(n, m) < alpha + eps
    assert m > K
    assert (n, m) == _scan(alpha, eps, K)


def test_permitted_pair_excludes_3_2():
    assert permitted_pair(0.5, 0.4, 2) != (3, 2)


def test_k_epsilon_examples():
    assert k_epsilon(0.5, 0.5, 0.2, 1.0) == 4
    # limit c -> 0 with d0 -> 1 from above: 2/K <= 1 gives K = 2
    assert k_epsilon(1e-9, 0.5, 0.2, 1.0 - 1e-6) == 2
    with pytest.raises(ValueError):
        k_epsilon(1.0, 0.5, 0.2, 1.0)


@pytest.mark.parametrize("c,alpha,eps,lip", [(0.5, 0.5, 0.2, 1.0), (0.2, 0.3, 0.1, 3.0), (0.9, 0.2, 0.3, 0.5)])
def test_k_epsilon_minimal(c, alpha, eps, lip):
    K = k_epsilon(c, alpha, eps, lip)
    beta = alpha + eps / 2
    d0 = lip ** (-beta / (eps / 2))
    assert 2 / K <= (1 - c) * d0 ** alpha * (1 + 1e-12)
    if K > 1:
        assert 2 / (K - 1) > (1 - c) * d0 ** alpha


# -- compositions -------------------------------------------------------------

def test_compose_identity_sup_norm():
    g = compose(AUX, AffineFunction([1.0], 0.0))
    x = np.arange(6 ** 5 + 1) / 6 ** 5
    assert np.max(np.abs(g(x[:, None]) - x)) <= 0.5


def test_compose_constant():
    g = compose(AUX, AffineFunction([0.0, 0.0], 0.3))
    vals = g(np.random.default_rng(0).uniform(size=(50, 2)))
    assert np.all(vals == AUX(np.array([0.3]))[0])


def test_compose_tolerance_depth():
    g = compose(AUX, AffineFunction([1.0], 0.0), tol=1e-3)
    assert AUX.m ** -g.depth <= 1e-3


def test_composed_certificate_on_gasket():
    g = compose(AUX, AffineFunction([1.0, 0.0], 0.0))
    c, a = g.holder
    cert = holder_certify(g, AttractorSampler(sierpinski_gasket()), c, a, 20000, 0)
    assert cert.passed and cert.max_ratio <= c


# -- McShane -------------------------------------------------------------------

def test_mcshane_single_sample():
    assert mcshane_extend([((0.0, 0.0), 2.0)], 1.0, 0.5, (0.0, 0.0)) == 2.0
    assert mcshane_extend([((0.0, 0.0), 2.0)], 1.0, 0.5, (4.0, 0.0)) == pytest.approx(4.0)


def test_mcshane_tight_pair():
    d, c, a = 0.25, 2.0, 0.5
    samples = [((0.0,), 0.0), ((d,), c * d ** a)]
    assert mcshane_extend(samples, c, a, (0.0,)) == 0.0
    assert mcshane_extend(samples, c, a, (d,)) == pytest.approx(c * d ** a, abs=0)


def test_mcshane_inconsistent():
    with pytest.raises(InconsistentSamplesError) as info:
        mcshane_extend([((0.0,), 0.0), ((0.01,), 1.0)], 1.0, 0.5, (0.5,))
    assert info.value.pair == (0, 1)


def test_mcshane_reproduces_and_certifies():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (60, 2))
    vals = 0.5 * np.sin(3 * pts[:, 0]) * 0.3
    ext = McShaneExtension(pts, vals, 1.0, 0.7)
    assert np.array_equal(ext(pts), vals)
    cert = holder_certify(ext, BoxSampler((0, 0), (1, 1)), 1.0, 0.7, 10000, 0)
    assert cert.passed


# -- certification ------------------------------------------------------------

def test_certify_constant_and_identity():
    const = holder_certify(lambda x: np.zeros(len(x)), IntervalSampler(), 1.0, 0.5, 1000, 0)
    assert const.max_ratio == 0
    ident = holder_certify(lambda x: np.asarray(x)[:, 0], IntervalSampler(), 1.0, 1.0, 1000, 0)
    assert ident.max_ratio == pytest.approx(1.0, abs=1e-9)


def test_certify_deterministic():
    a = holder_certify(AUX, IntervalSampler(), 2.0, AUX.alpha, 5000, 7)
    b = holder_certify(AUX, IntervalSampler(), 2.0, AUX.alpha, 5000, 7)
    assert a == b


def test_certify_rejects_zero_pairs():
    with pytest.raises(ValueError):
        holder_certify(AUX, IntervalSampler(), 1.0, 0.5, 0, 0)
