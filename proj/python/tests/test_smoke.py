import math

import numpy as np
import pytest

import wfr


def test_closed_forms():
    assert wfr.dist_to_zero(1.0) == pytest.approx(2.0, abs=1e-15)
    assert wfr.dist_proportional(1.0, 0.25) == pytest.approx(1.0, abs=1e-15)
    out = wfr.dirac_distance(1.0, 1.0, math.pi / 2)
    assert out["d2"] == pytest.approx(8 - 4 * math.sqrt(2), abs=1e-12)
    assert out["strategy"] == "transport"
    assert wfr.dirac_distance(1.0, 1.0, 4.0)["strategy"] == "stationary"
    assert wfr.w2_vs_d_gap(0.2) * 48 / 0.2**4 == pytest.approx(1.0, rel=1e-3)


def test_invalid_input_raises_value_error():
    with pytest.raises(ValueError):
        wfr.dist_to_zero(-1.0)
    grid = wfr.Grid.line(8, 0.0, 1.0)
    with pytest.raises(ValueError):
        wfr.GridMeasure(grid, np.ones(5))


def test_grid_measure_and_w2():
    grid = wfr.Grid.line(64, 0.0, 4.0)
    values = np.zeros(64)
    values[10:14] = 1.0
    a = wfr.GridMeasure(grid, values)
    b = wfr.GridMeasure(grid, np.roll(values, 8))
    assert a.mass == pytest.approx(0.25)
    np.testing.assert_array_equal(a.values, values)
    assert wfr.wasserstein2_1d(a, b) == pytest.approx(math.sqrt(0.25) * 8 * grid.spacing[0])
    lo, hi = wfr.bounded_lipschitz(a, b)
    assert 0.0 <= lo <= hi + 1e-6


def test_solver_small():
    grid = wfr.Grid.line(16, -2.0, 2.0)
    blob = wfr.rasterize_atoms(grid, [0.0], [1.0])
    opts = wfr.SolverOptions()
    opts.nt = 12
    opts.max_iter = 4000
    res = wfr.solve_distance(blob, blob.scaled(0.25), opts)
    assert res["d2"] == pytest.approx(1.0, rel=0.03)
    speeds = res["reparametrized_speeds"]
    assert np.std(speeds) / np.mean(speeds) < 0.02


def test_flow_logistic():
    grid = wfr.Grid.line(16, 0.0, 1.0)
    m = wfr.GridMeasure(grid, np.ones(16))
    rho0 = wfr.GridMeasure(grid, np.full(16, 0.5))
    tr = wfr.run_flow(m, rho0, t_end=1.0, dt=1e-3, sample_every=100)
    assert tr["final_state"][3] == pytest.approx(1 / (1 + math.exp(-1)), rel=1e-3)
    assert np.all(np.diff(tr["entropy"]) <= 0)


def test_beckner_is_reproducible():
    grid = wfr.Grid.line(32, 0.0, 1.0)
    a = wfr.estimate_beckner_constant(grid, 30, seed=4, validate=30)
    b = wfr.estimate_beckner_constant(grid, 30, seed=4, validate=30)
    assert a == b
    assert a["validation_ok"]


def test_verify_from_python():
    assert "closed_form" in wfr.suite_names()
    cases, xml = wfr.verify(["closed_form"])
    assert cases and all(c["passed"] for c in cases)
    assert xml.startswith("<?xml")
    assert wfr.verify(["none"])[0] == []
