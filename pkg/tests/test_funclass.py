import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterfit.funclass import (Anisotropic, Composition, CompositionTree, Isotropic, Manifold,
                                 SmoothnessSpec, effective_smoothness, gamma_direct,
                                 gamma_recursive, harmonic_mean, minimax_rate, network_budget,
                                 phase_transition_m)
from strategies import trees

T = CompositionTree
EXAMPLE = T(0.5, 2, (T(3.0, 2), T(1.0, 1)))


def brute_gamma(tree):
    # enumerate root-to-node chains explicitly, multiply in the natural order
    best = math.inf
    stack = [(tree, [])]
    while stack:
        node, ancestors = stack.pop()
        eff = node.s
        for a in ancestors:
            eff *= min(1.0, a.s)
        best = min(best, eff / node.K)
        stack.extend((c, ancestors + [node]) for c in node.children)
    return best


class TestTree:
    def test_internal_node_needs_k_children(self):
        with pytest.raises(ValueError):
            T(1.0, 2, (T(1.0, 1),))

    def test_rejects_bad_nodes(self):
        with pytest.raises(ValueError):
            T(0.0, 1)
        with pytest.raises(ValueError):
            T(1.0, 0)

    def test_height_and_arity(self):
        assert EXAMPLE.height == 2
        assert EXAMPLE.leaf_arity() == 3
        assert T(2.0, 3).height == 1

    def test_config_roundtrip(self):
        assert T.from_config(EXAMPLE.to_config()) == EXAMPLE
        assert T.from_config([0.5, 2, [[3.0, 2], [1.0, 1]]]) == EXAMPLE

    def test_missing_key_is_named(self):
        with pytest.raises(ValueError, match="'K'"):
            T.from_config({"s": 1.0})


class TestGamma:
    def test_examples(self):
        assert gamma_direct(T(2.0, 3)) == pytest.approx(2 / 3)
        assert gamma_direct(EXAMPLE) == 0.25
        assert gamma_recursive(EXAMPLE) == 0.25
        assert gamma_direct(T(2.0, 1, (T(2.0, 1),))) == 2.0

    def test_effective_smoothness(self):
        assert effective_smoothness(EXAMPLE) == 0.5
        assert effective_smoothness(EXAMPLE, (0,)) == 1.5
        assert effective_smoothness(T(2.0, 1, (T(2.0, 1),)), (0,)) == 2.0
        with pytest.raises(IndexError):
            effective_smoothness(EXAMPLE, (5,))

    @given(trees())
    @settings(max_examples=300)
    def test_direct_equals_recursive(self, tree):
        assert gamma_direct(tree) == gamma_recursive(tree)

    @given(trees())
    @settings(max_examples=200)
    def test_matches_brute_force(self, tree):
        assert gamma_direct(tree) == pytest.approx(brute_gamma(tree), rel=1e-12)

    @given(trees())
    @settings(max_examples=200)
    def test_effective_smoothness_bounds(self, tree):
        for path, node in tree.walk():
            eff = effective_smoothness(tree, path)
            assert eff <= node.s
            chain = [tree.node(path[:i]) for i in range(len(path))]
            if all(a.s >= 1 for a in chain):
                assert eff == node.s


class TestHarmonicMean:
    def test_examples(self):
        assert harmonic_mean((2, 2)) == 2
        assert harmonic_mean((1, 2, 2)) == pytest.approx(1.5)
        assert harmonic_mean((0.5, 1.5)) == pytest.approx(0.75)

    def test_rejects_short_vectors(self):
        with pytest.raises(ValueError):
            harmonic_mean((1.0,))

    @given(st.lists(st.floats(0.05, 10), min_size=2, max_size=8))
    def test_between_min_and_max(self, s):
        h = harmonic_mean(s)
        assert min(s) * (1 - 1e-12) <= h <= max(s) * (1 + 1e-12)


class TestRates:
    def test_minimax_examples(self):
        assert minimax_rate(1, 1, 0.7) == 2.0
        assert minimax_rate(10, 10, 2.0) == pytest.approx(0.1 + 100 ** -0.8)
        assert minimax_rate(10, 10, 2.0) == pytest.approx(0.1252, abs=1e-4)

    @given(st.integers(1, 10**6), st.integers(1, 10**4), st.floats(0.05, 5))
    def test_minimax_monotone(self, n, m, r):
        assert minimax_rate(2 * n, m, r) < minimax_rate(n, m, r)
        assert minimax_rate(n, 2 * m, r) <= minimax_rate(n, m, r)
        assert minimax_rate(n, m, r) >= 1 / n

    def test_phase_transition_examples(self):
        assert phase_transition_m(100, 1.0) == pytest.approx(10)
        assert phase_transition_m(256, 2.0) == pytest.approx(4)
        assert phase_transition_m(100, 2 / 3) > phase_transition_m(100, 1.0)

    @given(st.integers(2, 10**6), st.floats(0.1, 5), st.floats(1.01, 100))
    def test_above_transition_parametric_dominates(self, n, r, factor):
        m = phase_transition_m(n, r) * factor
        a = 2 * r / (2 * r + 1)
        assert (n * m) ** (-a) <= 1 / n * (1 + 1e-12)

    def test_network_budget(self):
        assert network_budget(100, 100, 2.0, c=10) == 4
        assert network_budget(2, 2, 2.0) == 3

    @given(st.integers(1, 10**4), st.integers(3, 10**4), st.floats(0.1, 5), st.floats(0.1, 100))
    def test_network_budget_monotone_in_c(self, n, m, r, c):
        assert network_budget(n, m, r, 2 * c) >= network_budget(n, m, r, c) >= 3


class TestSmoothnessSpec:
    def test_ratios(self):
        assert SmoothnessSpec(Isotropic(2.0, 1)).ratio == 2.0
        assert SmoothnessSpec(Anisotropic((1.0, 2.0, 2.0))).ratio == pytest.approx(0.5)
        assert SmoothnessSpec(Composition(EXAMPLE, 3)).ratio == 0.25
        assert SmoothnessSpec(Manifold(2.0, 3, 1)).ratio == 2.0

    def test_rate_model(self):
        rm = SmoothnessSpec(Isotropic(2.0, 1)).rate_model()
        assert rm.rate_exponent == pytest.approx(0.8)
        assert rm.log_power == pytest.approx(16 * 2 / 5)

    def test_invalid_regimes(self):
        with pytest.raises(ValueError):
            SmoothnessSpec(Manifold(1.0, 2, 3))
        with pytest.raises(ValueError):
            SmoothnessSpec(Anisotropic((1.0,)))

    @pytest.mark.parametrize("spec", [
        SmoothnessSpec(Isotropic(2.0, 3), 2.0, 0.5),
        SmoothnessSpec(Anisotropic((1.0, 3.0))),
        SmoothnessSpec(Composition(EXAMPLE, 4)),
        SmoothnessSpec(Manifold(1.5, 3, 1)),
    ])
    def test_config_roundtrip(self, spec):
        assert SmoothnessSpec.from_config(spec.to_config()) == spec

    def test_missing_key(self):
        with pytest.raises(ValueError, match="smoothness.d"):
            SmoothnessSpec.from_config({"regime": "isotropic", "s": 1.0})
