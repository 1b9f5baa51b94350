"""The numba and numpy kernel paths must agree exactly."""
import numpy as np
import pytest

from fractal_levelsets import kernels
from fractal_levelsets.holder import AuxiliaryFunction
from fractal_levelsets.ifs import GridSpec, attractor_levels, sierpinski_carpet, sierpinski_gasket

pytestmark = pytest.mark.skipif(not kernels.jit_enabled(), reason="numba unavailable or disabled")


def _levels(system, base, levels, monkeypatch, nojit):
    if nojit:
        monkeypatch.setenv("FLL_NO_JIT", "1")
    else:
        monkeypatch.delenv("FLL_NO_JIT", raising=False)
    spec = GridSpec.for_system(system, base)
    return attractor_levels(system, spec, levels, workers=1)


@pytest.mark.parametrize("system,base,levels", [
    (sierpinski_gasket(), 2, [0, 1, 2, 3, 4]),
    (sierpinski_gasket(), 6, [1, 2, 3]),
    (sierpinski_carpet(), 3, [1, 2, 3]),
])
def test_cover_paths_agree(system, base, levels, monkeypatch):
    jit = _levels(system, base, levels, monkeypatch, nojit=False)
    ref = _levels(system, base, levels, monkeypatch, nojit=True)
    for k in levels:
        assert jit[k] == ref[k]


@pytest.mark.parametrize("nm_pair", [(3, 2), (5, 3), (9, 2)])
def test_phi_paths_agree(nm_pair, monkeypatch):
    aux = AuxiliaryFunction(*nm_pair)
    x = np.random.default_rng(0).uniform(-1.5, 2.5, 5000)
    monkeypatch.delenv("FLL_NO_JIT", raising=False)
    a = aux.evaluate(x, None)
    b = aux.evaluate(x, 6)
    monkeypatch.setenv("FLL_NO_JIT", "1")
    assert np.array_equal(a, aux.evaluate(x, None))
    assert np.array_equal(b, aux.evaluate(x, 6))


def test_capacity_retry_matches():
    g = sierpinski_gasket()
    spec = GridSpec.for_system(g, 2)
    c0, radius = g.bounding_ball()
    specs = [spec.at_level(k) for k in (3, 4)]
    args = (g.ratios, g.orthogonals, g.translations, c0, radius, np.zeros(0, np.int64),
            np.array([s.delta / 4 for s in specs]), np.asarray(spec.origin),
            np.array([s.delta for s in specs]), np.array([s.side for s in specs], np.int64), 40)
    small = kernels.expand_words(*args, capacity=8)
    big = kernels.expand_words(*args)
    assert np.array_equal(np.sort(small[1] * 4 + small[0]), np.sort(big[1] * 4 + big[0]))
