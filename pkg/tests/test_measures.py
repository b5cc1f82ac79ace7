from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ldpchain import measures
from ldpchain.measures import (
    EmpiricalMeasure,
    PiecewiseDensity,
    as_word,
    empirical_measure,
    empirical_of_list,
    h_gauge,
    lp_distance,
    lp_within,
    mixture,
    restrict,
    tv_distance,
)


def _random_measure(rng: np.random.Generator, atoms: int, dim: int = 1) -> EmpiricalMeasure:
    points = np.round(rng.uniform(0.0, 2.0, size=(atoms, dim)), 3)
    return EmpiricalMeasure.from_points(points, rng.dirichlet(np.ones(atoms)))


def _deficiency_by_subsets(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    best = 0.0
    for mask in itertools.product([False, True], repeat=nu.size):
        chosen = np.array(mask)
        if chosen.any():
            best = max(best, float(nu.weights[chosen].sum() - mu.weights[adjacency[chosen].any(axis=0)].sum()))
    return best


class TestWords:
    def test_flat_sequence_is_read_as_scalar_letters(self):
        assert as_word([0.1, 0.2, 0.3]).shape == (3, 1)

    def test_dimension_mismatch_is_rejected(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            as_word([[0.1, 0.2]], dim=1)

    def test_empirical_measure_merges_repeated_letters(self):
        mu = empirical_measure([0.0, 0.0, 1.0])
        assert mu.size == 2
        assert mu.weight_of(0.0) == pytest.approx(2 / 3)

    def test_empirical_of_list_is_length_weighted(self):
        mu = empirical_of_list([[0.0], [1.0, 1.0, 1.0], []])
        assert mu.weight_of(1.0) == pytest.approx(0.75)

    def test_empirical_measure_of_empty_word_is_undefined(self):
        with pytest.raises(ValueError):
            empirical_measure(np.zeros((0, 1)))

    def test_text_record_is_exact(self):
        mu = EmpiricalMeasure.from_points(np.array([[0.1], [1 / 3]]), np.array([0.25, 0.75]))
        back = EmpiricalMeasure.from_text(mu.to_text())
        np.testing.assert_array_equal(back.atoms, mu.atoms)
        np.testing.assert_array_equal(back.weights, mu.weights)


class TestGauge:
    def test_vanishes_at_one(self):
        assert h_gauge(1.0) == 0.0

    def test_value(self):
        assert h_gauge(0.5) == pytest.approx(1.5)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            h_gauge(0.0)


class TestLevyProkhorov:
    @pytest.mark.parametrize("a", [0.0, 0.3, 0.999, 2.5])
    def test_point_masses(self, a):
        assert lp_distance(empirical_measure([0.0]), empirical_measure([a])) == pytest.approx(min(a, 1.0), abs=1e-9)

    def test_symmetric_and_below_total_variation(self, rng):
        # The subset oracle only enumerates sets on its second argument.
        for _ in range(1000):
            mu, nu = _random_measure(rng, int(rng.integers(1, 6))), _random_measure(rng, int(rng.integers(1, 6)))
            d = measures._lp_brute(mu, nu)
            assert d == pytest.approx(measures._lp_brute(nu, mu), abs=1e-12)
            assert d <= tv_distance(mu, nu) + 1e-12

    @pytest.mark.parametrize("dim", [1, 2])
    def test_brute_force_and_search_agree(self, rng, dim):
        for _ in range(1000):
            mu = _random_measure(rng, int(rng.integers(1, 7)), dim)
            nu = _random_measure(rng, int(rng.integers(1, 7)), dim)
            assert lp_distance(mu, nu, method="brute") == pytest.approx(lp_distance(mu, nu, method="search"), abs=1e-9)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_deficiency_solvers_agree(self, rng, dim):
        for _ in range(300):
            mu = _random_measure(rng, int(rng.integers(1, 7)), dim)
            nu = _random_measure(rng, int(rng.integers(1, 7)), dim)
            adjacency = measures._pairwise(nu.atoms, mu.atoms) <= rng.uniform(0.0, 1.0)
            expected = _deficiency_by_subsets(mu, nu, adjacency)
            assert measures._deficiency_flow(mu, nu, adjacency) == pytest.approx(expected, abs=1e-9)
            if dim == 1:
                assert measures._deficiency_interval(mu, nu, adjacency) == pytest.approx(expected, abs=1e-9)

    def test_within_matches_distance(self, rng):
        for _ in range(20):
            mu, nu = _random_measure(rng, 6), _random_measure(rng, 6)
            d = lp_distance(mu, nu)
            assert lp_within(mu, nu, d + 1e-7)
            if d > 1e-3:
                assert not lp_within(mu, nu, d - 1e-3)

    def test_two_dimensional_measures(self):
        mu = EmpiricalMeasure.from_points(np.array([[0.0, 0.0], [1.0, 0.0]]))
        nu = EmpiricalMeasure.from_points(np.array([[0.0, 0.2], [1.0, 0.0]]))
        assert lp_distance(mu, nu) == pytest.approx(0.2, abs=1e-9)

    def test_unknown_method(self):
        mu = empirical_measure([0.0])
        with pytest.raises(ValueError, match="Unknown LP method"):
            lp_distance(mu, mu, method="sinkhorn")


class TestMixturesAndDensities:
    def test_mixture_weights(self):
        mu = mixture([empirical_measure([0.0]), empirical_measure([1.0])], [0.3, 0.7])
        assert mu.weight_of(1.0) == pytest.approx(0.7)

    def test_restriction_is_normalised(self):
        mu = empirical_measure([0.0, 1.0, 2.0, 3.0])
        sub = restrict(mu, lambda pts: pts[:, 0] < 1.5)
        assert sub.size == 2
        assert sub.weights.sum() == pytest.approx(1.0)

    def test_density_proxy_keeps_box_masses(self):
        rho = PiecewiseDensity.from_boxes([([0.0], [1.0]), ([2.0], [3.0])], [0.8, 0.2])
        proxy = rho.proxy(4)
        assert proxy.density_proxy
        assert proxy.size == 8
        assert float(proxy.weights[proxy.atoms[:, 0] < 1.5].sum()) == pytest.approx(0.8)

    def test_mixed_density_drops_empty_boxes(self):
        a = PiecewiseDensity.from_boxes([([0.0], [1.0])])
        b = PiecewiseDensity.from_boxes([([2.0], [3.0])])
        assert a.mixed(b, 1.0).lows.shape[0] == 1
        assert math.isclose(float(a.mixed(b, 0.25).masses[0]), 0.25)
