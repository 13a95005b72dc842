import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterfit.complexity import (Dictionary, default_grid, fixed_point, iota, localize,
                                   oracle_bound, phi_hat, rademacher_average, vc_size_bound)
from clusterfit.splines import basis_1d

rng = np.random.default_rng(0)


def ref(x):
    return np.sin(3 * x[:, 0])


def shifted(c):
    return lambda x: ref(x) + c


# E|mean of 100 fair signs|, summed exactly over the binomial distribution
ABS_SIGN_MEAN_100 = 0.07958923738717875
# n = m = 10, L = W = 3, b1 = b2 = b3 = 1, by direct substitution
VC_ANCHOR = 225.6694467879304


def test_reference_only_gives_zero():
    est, se = rademacher_average(Dictionary([ref], ref), rng.random((10, 10, 1)), draws=50)
    assert est == 0.0 and se == 0.0


def test_constant_shift_matches_binomial():
    c = 0.3
    est, se = rademacher_average(Dictionary([shifted(c)], ref), rng.random((10, 10, 1)),
                                 draws=20_000, seed=1)
    assert abs(est - c * ABS_SIGN_MEAN_100) <= 3 * se
    assert ABS_SIGN_MEAN_100 == pytest.approx(math.sqrt(2 / (math.pi * 100)), rel=0.01)


def test_enlarging_dictionary_never_lowers_estimate():
    x = rng.random((8, 5, 1))
    members = [shifted(c) for c in (0.1, -0.4, 0.2)] + [lambda z: np.cos(5 * z[:, 0])]
    vals = [rademacher_average(Dictionary(members[:i], ref), x, draws=300, seed=7)[0]
            for i in range(1, len(members) + 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_negation_symmetry():
    x = rng.random((6, 6, 1))
    members = [lambda z: np.cos(4 * z[:, 0]), lambda z: z[:, 0] ** 2]
    zero = lambda z: np.zeros(len(z))  # noqa: E731
    neg = [lambda z, f=f: -f(z) for f in members]
    a = rademacher_average(Dictionary(members, zero), x, draws=100, seed=3)
    b = rademacher_average(Dictionary(neg, zero), x, draws=100, seed=3)
    assert a == b


def test_localize():
    px = rng.random((2000, 1))
    members = [shifted(c) for c in (0.0, 0.1, 0.5, 1.0)]
    dic = Dictionary(members, ref)
    assert len(localize(dic, math.inf, px)) == 4
    assert len(localize(dic, 0.0, px)) == 1
    for r1, r2 in [(0.001, 0.02), (0.02, 0.3), (0.3, 2.0)]:
        small, big = localize(dic, r1, px), localize(dic, r2, px)
        assert set(map(id, small.members)) <= set(map(id, big.members))


class TestFixedPoint:
    grid = np.logspace(-6, 1, 400)

    def test_sqrt_half(self):
        assert fixed_point(self.grid, np.sqrt(self.grid) / 2) == pytest.approx(0.25, rel=1e-10)

    def test_zero(self):
        assert fixed_point(self.grid, np.zeros_like(self.grid)) == self.grid[0]

    def test_constant(self):
        assert fixed_point(self.grid, np.full_like(self.grid, 0.37)) == pytest.approx(0.37, rel=1e-10)

    @given(st.floats(0.01, 3.0))
    def test_scaled_sqrt(self, lam):
        assert fixed_point(self.grid, lam * np.sqrt(self.grid)) == pytest.approx(lam ** 2, rel=1e-9)

    def test_grid_too_narrow(self):
        g = np.logspace(-6, -3, 10)
        with pytest.raises(ValueError, match="too narrow"):
            fixed_point(g, np.ones_like(g))

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            fixed_point([0.1, 0.05], [0.0, 0.0])


def _spline_rays(k, directions, scales, seed):
    # a linear class is star-shaped; rays t * a over a fine grid of t mimic that
    r = np.random.default_rng(seed)
    memo = {}

    def basis(x):
        key = x.tobytes()
        if key not in memo:
            memo[key] = basis_1d(k, 2, x[:, 0])
        return memo[key]

    members = []
    for _ in range(directions):
        a = r.normal(size=k + 2)
        for t in np.logspace(-4, 0, scales):
            members.append(lambda x, a=t * a: basis(x) @ a)
    return Dictionary(members, lambda x: np.zeros(len(x)), "spline rays")


def test_phi_hat_sub_root_for_linear_class():
    dic = _spline_rays(5, 20, 200, 2)
    rep = phi_hat(dic, rng.random((30, 4, 1)), rng.random((1000, 1)), draws=400, seed=5)
    assert np.all(rep.phi >= 0)
    assert np.all(np.diff(rep.phi) >= 0)
    ratio = rep.phi / np.sqrt(rep.r_grid)
    slack = 3 * rep.stderr / np.sqrt(rep.r_grid)
    for i in range(len(ratio) - 1):
        if rep.sizes[i] > 0:
            assert ratio[i + 1] <= ratio[i] + slack[i] + slack[i + 1]
    assert rep.fixed_point is not None and rep.fixed_point > 0


def test_default_grid():
    g = default_grid(1.0)
    assert len(g) == 25 and g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(4.0)


def test_vc_size_bound_anchor():
    assert vc_size_bound(3, 3, 10, 10, 1, 1, 1) == pytest.approx(VC_ANCHOR, rel=1e-12)
    with pytest.raises(ValueError):
        vc_size_bound(1, 2, 10, 10, 1, 1, 1)


def test_vc_cross_sectional_case():
    L, W, n, b1, b3 = 3, 4, 50, 1.0, 0.5
    expected = b1 ** 2 / n + (L * W) ** 2 * math.log(L * W) * iota(n, 1, b1, 0, b3) * math.log(n) / n
    assert vc_size_bound(L, W, n, 1, b1, 0.0, b3) == pytest.approx(expected, rel=1e-14)


@given(st.integers(2, 6), st.integers(2, 6), st.integers(2, 500), st.integers(1, 50),
       st.floats(0.1, 3), st.floats(0, 3), st.floats(0, 3))
def test_bounds_monotone(L, W, n, m, b1, b2, b3):
    base = vc_size_bound(L, W, n, m, b1, b2, b3)
    assert vc_size_bound(L, W + 1, n, m, b1, b2, b3) > base
    for db in [(0.5, 0, 0), (0, 0.5, 0), (0, 0, 0.5)]:
        assert vc_size_bound(L, W, n, m, b1 + db[0], b2 + db[1], b3 + db[2]) >= base
        ob = oracle_bound(0.01, n, m, 0.001, b1 + db[0], b2 + db[1], b3 + db[2])
        assert ob >= oracle_bound(0.01, n, m, 0.001, b1, b2, b3)


def test_oracle_bound():
    assert oracle_bound(0.0, 1, 1, 0.0, 0.0, 0.0, 0.0) == 0.0
    v = oracle_bound(0.2, 50, 1000, 0.01, 1.0, 2.0, 0.5)
    assert v >= 0.2 and v >= (1 + 4) / 50
    with pytest.raises(ValueError):
        oracle_bound(-1.0, 1, 1, 0.0, 1, 1, 1)
