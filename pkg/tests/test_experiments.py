import json
import math

import numpy as np
import pytest

from fractal_levelsets.experiments import (ConfigError, ExperimentConfig, run_main, run_phi_levelsets,
                                           run_slice_survey, run_upper_bound_audit, write_report)
from fractal_levelsets.holder import holder_exponent
from fractal_levelsets.boxdim import fit_dimension
from fractal_levelsets.ifs import moran_dimension, sierpinski_gasket, unit_interval


@pytest.fixture(scope="module")
def small_report():
    return run_main(ExperimentConfig(levels=(1, 4), num_level_values=8, seed=3))


def test_config_validation():
    with pytest.raises(ConfigError, match="alpha"):
        ExperimentConfig(alpha=0.6, epsilon=0.4)
    with pytest.raises(ConfigError, match="levels"):
        ExperimentConfig(levels=(2, 3))
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig(seed="x")
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_round_trip():
    c = ExperimentConfig(system_ref="carpet", alpha=0.2, levels=[1, 4], base_override=5)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_report_prediction(small_report):
    r = small_report
    assert r.predicted == pytest.approx(moran_dimension(sierpinski_gasket()) - holder_exponent(r.n, r.m), abs=1e-12)
    assert r.alpha_nm == holder_exponent(r.n, r.m)
    assert ExperimentConfig.from_dict(r.to_dict()["config_echo"]) == r.config_echo


def test_report_deterministic(small_report):
    again = run_main(ExperimentConfig(levels=(1, 4), num_level_values=8, seed=3))
    assert again.fingerprint() == small_report.fingerprint()


def test_levels_values_in_central_range(small_report):
    vals = np.array(small_report.spectrum.level_values)
    assert np.all(np.diff(vals) > 0)


def test_audit_from_dict(small_report):
    d = json.loads(json.dumps(small_report.to_dict()))
    a = run_upper_bound_audit(d)
    b = run_upper_bound_audit(small_report)
    assert a.s_fit == b.s_fit and a.violations == b.violations


def test_audit_flags_full_grid(small_report):
    base = small_report.n * small_report.m
    forced = run_upper_bound_audit(small_report, counts_override=[(k, base ** (2 * k)) for k in range(1, 5)])
    assert len(forced.violations) == len(small_report.spectrum.fits)


def test_s_fit_gasket(gasket_covers_b6):
    # base 6 is the cover family of the main run; base 2 carries a slower boundary transient
    _, covers = gasket_covers_b6
    s_fit = fit_dimension([(k, len(c)) for k, c in covers.items()], 6, 2, 5).slope
    assert abs(s_fit - math.log(3) / math.log(2)) < 0.05


def test_slice_survey_small():
    rep = run_slice_survey(sierpinski_gasket(), 4, 6, (0, 4), seed=5)
    normals = np.array(rep.directions)
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    assert len({tuple(n) for n in normals.tolist()}) == 4
    again = run_slice_survey(sierpinski_gasket(), 4, 6, (0, 4), seed=5)
    assert again.directions == rep.directions


def test_slice_survey_needs_dimension_above_one():
    with pytest.raises(ValueError):
        run_slice_survey(unit_interval(), 2, 2, (0, 3))


def test_phi_levelsets_bounds():
    rep = run_phi_levelsets(3, 2, (3, 6), 10, seed=2)
    for _, k, n in rep.spectrum.counts:
        assert 1 <= n <= 6 ** k
    assert abs(rep.median - rep.predicted) < 0.1


def test_write_report(tmp_path, small_report):
    path = write_report(small_report, tmp_path)
    data = json.loads(path.read_text())
    assert data["kind"] == "main" and "runtime_ms" in data
    head = (tmp_path / "loglog.csv").read_text().splitlines()[0]
    assert head == "series,k,logN"
    assert (tmp_path / "counts.csv").exists() and (tmp_path / "fits.csv").exists()
