import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterfit import harness
from clusterfit.harness import (ApproxConfig, EstimatorConfig, SweepConfig, approx_bench,
                                fit_slope, mspe, phase_scan, rate_sweep, run_sweep)
from clusterfit.targets import build_target, make_isotropic

ISO_1D = {"regime": "isotropic", "s": 2.0, "d": 1, "seed": 3}
ISO_2D = {"regime": "isotropic", "s": 2.0, "d": 2, "seed": 5}


def test_mspe_examples():
    f = make_isotropic(2.0, 2, seed=0)
    assert mspe(f, f) == 0.0
    assert mspe(lambda x: f(x) + 0.1, f) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ValueError):
        mspe(f, f, n_test=10)


def test_mspe_variance_halves_with_double_sample():
    f = make_isotropic(2.0, 1, seed=0)
    g = make_isotropic(1.0, 1, seed=1)
    small = [mspe(g, f, n_test=1000, seed=s) for s in range(300)]
    big = [mspe(g, f, n_test=2000, seed=s) for s in range(300, 600)]
    ratio = np.var(small, ddof=1) / np.var(big, ddof=1)
    assert 1.4 < ratio < 2.9


@given(st.floats(0.05, 3.0), st.floats(1e-3, 1e3),
       st.lists(st.integers(3, 10**6), min_size=3, max_size=10, unique=True))
def test_slope_exact_on_power_law(a, c, nm):
    slope, se = fit_slope(nm, [c * v ** (-a) for v in nm])
    assert slope == pytest.approx(-a, abs=1e-10)


def test_slope_needs_three_points():
    with pytest.raises(ValueError):
        fit_slope([10, 20, 20], [1.0, 0.5, 0.5])


def test_theory_exponents_attached():
    res = rate_sweep(ISO_2D, ([10, 20], [2]), replicates=1, estimator={"kind": "spline", "k": 2},
                     n_test=1000)
    assert res.theory_exponent == pytest.approx(-2 / 3)
    assert res.slope is None  # two nm values only
    res = rate_sweep(ISO_1D, ([10], [2]), replicates=1, estimator={"kind": "spline", "k": 2},
                     n_test=1000)
    assert res.theory_exponent == pytest.approx(-0.8)


def test_degenerate_sweep():
    cfg = SweepConfig(target={"regime": "constant", "value": 0.3, "d": 1}, n=[10, 20, 40],
                      m=[2], replicates=2, estimator={"kind": "mlp", "L": 1, "W": 4, "lr": 0.01,
                                                      "epochs": 1500, "restarts": 1})
    res = run_sweep(cfg)
    assert all(0 <= r[3] < 1e-4 for r in res.rows)
    assert all(r[4] == 0.0 for r in res.rows)


def test_sweep_rows_sorted_and_nonnegative():
    cfg = SweepConfig(target=ISO_1D, n=[20, 10], m=[3, 2], replicates=2,
                      noise={"kind": "gaussian", "scale": 0.5},
                      estimator={"kind": "spline", "k_c": 3.0}, n_test=1000)
    res = run_sweep(cfg)
    assert res.rows == sorted(res.rows)
    assert len(res.rows) == 8 and all(r[3] >= 0 for r in res.rows)
    assert res.slope is not None and math.isfinite(res.slope)


def test_phase_scan_reporting():
    cfg = SweepConfig(target=ISO_2D, n=[100], m=[2, 4, 8], replicates=2,
                      process={"kind": "fourier-gp", "scale": 1.0},
                      estimator={"kind": "spline", "k": 2}, n_test=1000)
    rep = phase_scan(cfg)
    assert rep.predicted_m == pytest.approx(10)
    assert rep.floor_ratio >= 0
    assert len(rep.local_slopes) == 2
    with pytest.raises(ValueError):
        phase_scan(SweepConfig(target=ISO_2D, n=[10, 20], m=[2]))


def test_approx_bench_constant_target():
    cfg = ApproxConfig(target={"regime": "constant", "value": -0.2, "d": 2}, archs=[[1, 3], [1, 6]],
                       n_train=500, n_test=1000, lr=0.01, epochs=1500, restarts=1)
    res = approx_bench(cfg)
    assert all(r[6] < 1e-2 and r[7] < 5e-2 for r in res.rows)


def test_approx_reference_slope():
    tree = {"s": 0.5, "K": 2, "children": [{"s": 3.0, "K": 2}, {"s": 1.0, "K": 1}]}
    cfg = ApproxConfig(target={"regime": "composition", "tree": tree}, archs=[[1, 3], [1, 6], [1, 12]],
                       n_train=300, n_test=1000, epochs=20, restarts=1)
    res = approx_bench(cfg)
    assert -2 * res.gamma == -0.5
    ref = [r[8] for r in res.rows]
    assert math.log(ref[-1] / ref[0]) / math.log(12 / 3) == pytest.approx(-0.5)


def test_estimator_config_validation():
    with pytest.raises(ValueError, match="estimator.bogus"):
        EstimatorConfig.from_config({"bogus": 1})
    with pytest.raises(ValueError, match="estimator.kind"):
        EstimatorConfig.from_config({"kind": "forest"})


def test_sweep_config_validation():
    with pytest.raises(ValueError, match="rate_sweep.m"):
        SweepConfig.from_config({"target": ISO_1D, "n": [10]})
    with pytest.raises(ValueError, match="rate_sweep.extra"):
        SweepConfig.from_config({"target": ISO_1D, "n": [10], "m": [2], "extra": 0})


def test_estimator_sizing():
    from clusterfit.datagen import generate_dataset

    f = build_target(ISO_1D)
    ds = generate_dataset(f, 50, 2, seed=0)
    _, _, k = harness.fit_estimator(EstimatorConfig(kind="spline", k_c=5.0), ds, f.spec)
    from clusterfit.splines import choose_k
    assert k == choose_k(50, 2, 2.0, 1, 5.0)
    est = EstimatorConfig(kind="mlp", budget_c=20.0, depth_share=0.3, epochs=5, restarts=1)
    _, _, size = harness.fit_estimator(est, ds, f.spec)
    from clusterfit.funclass import network_budget
    from clusterfit.relunet import expand_budget
    L, W = expand_budget(network_budget(50, 2, 2.0, 20.0), 0.3)
    assert size == L * W
