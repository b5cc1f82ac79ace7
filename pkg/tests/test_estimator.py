from __future__ import annotations

import math

import numpy as np
import pytest

from ldpchain.errors import PreconditionError
from ldpchain.kernels.zoo import PiecewiseLinearMap
from ldpchain.measures import EmpiricalMeasure, PiecewiseDensity
from ldpchain.models import FAIL, PASS
from ldpchain.services.classes_service import discover_classes_1d
from ldpchain.services.estimator_service import (
    AtomIndicator,
    LpBall,
    PiecewiseConstant,
    convexity_scan,
    dv_entropy_lower_bound,
    dv_objective,
    estimate_ball_probability,
    rl_diagnostic,
    verify_coupling_probability,
    verify_decoupling_probability,
    verify_supermultiplicative,
)

UNIFORM = PiecewiseDensity.from_boxes([([0.0], [1.0])])


def _density(lo: float, hi: float) -> PiecewiseDensity:
    return PiecewiseDensity.from_boxes([([lo], [hi])])


class TestBallProbability:
    def test_radius_one_is_certain(self, iid_model):
        p_hat, lo, hi = estimate_ball_probability(iid_model, UNIFORM, 1.0, 10, 50, seed=0)
        assert (p_hat, hi) == (1.0, 1.0)
        assert 0.85 < lo < 1.0

    def test_rejects_bad_arguments(self, iid_model):
        with pytest.raises(PreconditionError):
            estimate_ball_probability(iid_model, UNIFORM, 0.0, 10, 50, seed=0)
        with pytest.raises(PreconditionError):
            estimate_ball_probability(iid_model, UNIFORM, 0.1, 10, 0, seed=0)

    def test_law_of_large_numbers(self, iid_model):
        p_hat, lo, hi = estimate_ball_probability(iid_model, UNIFORM, 0.2, 200, 200, seed=1)
        assert p_hat > 0.9
        assert lo <= p_hat <= hi

    def test_far_target_is_rare(self, iid_model):
        p_hat, _, _ = estimate_ball_probability(iid_model, _density(0.0, 0.1), 0.1, 50, 200, seed=1)
        assert p_hat == 0.0

    def test_nested_radii(self):
        center = EmpiricalMeasure.from_points(np.array([[0.0]]))
        ball = LpBall(center, (0.05, 0.2, 0.6))
        paths = np.array([[[0.0], [0.0]], [[0.0], [0.1]], [[0.5], [0.5]]])
        np.testing.assert_array_equal(
            ball(paths), [[True, True, True], [False, True, True], [False, False, True]]
        )


class TestRateSurface:
    def test_surface(self, iid_model):
        surface = rl_diagnostic(iid_model, UNIFORM, [0.1, 0.3, 1.0], [5, 10], 150, seed=4)
        assert len(surface.entries) == 6
        assert surface.monotonicity_violations == 0
        for n in (5, 10):
            hits = [surface.entry(n, d).hits for d in (0.1, 0.3, 1.0)]
            assert hits == sorted(hits)
            assert surface.entry(n, 1.0).estimate == 0.0
        assert surface.corner is not None

    def test_deterministic(self, iid_model):
        a = rl_diagnostic(iid_model, UNIFORM, [0.2, 0.4], [4, 8], 100, seed=2)
        b = rl_diagnostic(iid_model, UNIFORM, [0.2, 0.4], [4, 8], 100, seed=2)
        assert a.rows() == b.rows()

    def test_grids_must_increase(self, iid_model):
        with pytest.raises(PreconditionError):
            rl_diagnostic(iid_model, UNIFORM, [0.3, 0.1], [5], 10, seed=0)

    def test_censored_rows(self, iid_model):
        surface = rl_diagnostic(iid_model, _density(0.0, 0.1), [0.05], [40], 50, seed=0)
        row = surface.rows()[0]
        assert row["hits"] == 0
        assert row["estimate"] == "below resolution"
        assert surface.corner is None and surface.rl_proxy is None


class TestDonskerVaradhan:
    def test_constant_function_scores_zero(self, two_class_model):
        f = PiecewiseConstant.constant([-1.0], [2.0], 8)
        value, error = dv_objective(two_class_model, _density(0.2, 0.8), f)
        assert value == pytest.approx(0.0, abs=1e-9)
        assert error < 1e-4

    def test_atom_indicator(self, iid_model):
        mu = EmpiricalMeasure.from_points(np.array([[0.2], [0.7]]))
        value, error = dv_objective(iid_model, mu, AtomIndicator(np.array([[0.2]]), 3.0))
        assert value == pytest.approx(0.5 * math.log(4.0))
        assert error == 0.0

    def test_uniform_law_of_iid_chain(self, iid_model):
        bound = dv_entropy_lower_bound(iid_model, UNIFORM, [0.0], [1.0], cells=8)
        assert abs(bound.value) < 0.02

    def test_relative_entropy_of_iid_chain(self, iid_model):
        mu = PiecewiseDensity.from_boxes([([0.0], [0.5]), ([0.5], [1.0])], [0.8, 0.2])
        exact = 0.8 * math.log(1.6) + 0.2 * math.log(0.4)
        bound = dv_entropy_lower_bound(iid_model, mu, [0.0], [1.0], cells=8, sweeps=10)
        assert bound.value <= exact + 1e-6
        assert bound.value == pytest.approx(exact, rel=0.1)

    def test_witness_reproduces_the_bound(self, iid_model):
        mu = PiecewiseDensity.from_boxes([([0.0], [0.5]), ([0.5], [1.0])], [0.7, 0.3])
        bound = dv_entropy_lower_bound(iid_model, mu, [0.0], [1.0], cells=4)
        w = bound.witness
        f = PiecewiseConstant(
            lows=np.array(w["box_low"]),
            highs=np.array(w["box_high"]),
            per_axis=w["cells_per_axis"],
            values=np.array(w["values"]),
            outside=w["outside"],
        )
        assert dv_objective(iid_model, mu, f)[0] == pytest.approx(bound.value, abs=1e-9)

    def test_eps_range(self, iid_model):
        with pytest.raises(PreconditionError):
            dv_entropy_lower_bound(iid_model, UNIFORM, [0.0], [1.0], eps=1.0)

    def test_unknown_family(self, iid_model):
        with pytest.raises(RuntimeError, match="Unknown test function family"):
            dv_objective(iid_model, UNIFORM, lambda x: x)


class TestInequalities:
    def test_coupling_against_the_full_space(self, two_class_model, one_class_frame):
        report = verify_coupling_probability(
            two_class_model, one_class_frame, None, 1.0, N=2, n=4, T=12, samples=200, seed=1
        )
        assert report.verdict == PASS
        assert report.log_rhs == 0.0

    def test_coupling_length_condition(self, two_class_model, one_class_frame):
        with pytest.raises(PreconditionError):
            verify_coupling_probability(two_class_model, one_class_frame, None, 1.0, N=2, n=4, T=8, samples=10, seed=1)

    def test_coupling_with_a_ball(self, two_class_model, one_class_frame):
        report = verify_coupling_probability(
            two_class_model, one_class_frame, _density(0.2, 0.8), 0.9, N=1, n=6, T=10, samples=300, seed=2, proxy_cells=8
        )
        assert report.verdict != FAIL

    def test_supermultiplicative_trivial_radius(self, two_class_model, one_class_frame):
        report = verify_supermultiplicative(
            two_class_model, one_class_frame, _density(0.3, 0.7), _density(0.4, 0.6), 0.1, 1.5, 10, 80, 10, seed=0
        )
        assert report.verdict == PASS

    def test_supermultiplicative_side_conditions(self, two_class_model, one_class_frame):
        with pytest.raises(PreconditionError, match="T\\*delta"):
            verify_supermultiplicative(
                two_class_model, one_class_frame, _density(0.3, 0.7), _density(0.4, 0.6), 0.1, 0.2, 10, 40, 10, seed=0
            )

    def test_supermultiplicative_mass_in_k(self, two_class_model, one_class_frame):
        with pytest.raises(PreconditionError, match="mu_2\\(K\\)"):
            verify_supermultiplicative(
                two_class_model, one_class_frame, _density(0.3, 0.7), _density(2.2, 2.8), 0.1, 0.2, 10, 80, 10, seed=0
            )

    def test_supermultiplicative_runs(self, two_class_model, one_class_frame):
        report = verify_supermultiplicative(
            two_class_model, one_class_frame, _density(0.3, 0.7), _density(0.4, 0.6), 0.1, 0.2, 10, 80, 300,
            seed=3, proxy_cells=8,
        )
        assert report.details["N"] == 7
        assert report.details["trivial"] == "f(eps, delta) >= 1"
        assert report.verdict != FAIL

    def test_supermultiplicative_with_an_informative_bound(self, iid_model, one_class_frame):
        # f(0.02, 0.015) with r = 1 is about 0.57; n and T are the smallest meeting the side conditions.
        report = verify_supermultiplicative(
            iid_model, one_class_frame, _density(0.2, 0.8), _density(0.3, 0.9), 0.02, 0.015, 70, 4800, 20,
            seed=4, proxy_cells=8,
        )
        assert "trivial" not in report.details
        assert report.details["f_eps_delta"] == pytest.approx(0.5704, abs=1e-3)
        assert report.details["N"] == 67
        (rhs,) = report.details["rhs_events"]
        assert rhs["event"] == "B" and rhs["hits"] == 20
        assert report.verdict == PASS

    def test_decoupling_against_the_full_space(self, two_class_model, two_class_frame):
        report = verify_decoupling_probability(
            two_class_model, two_class_frame, {1: 1, 2: 2}, 10, 0.2, (0.5, 0.5), (None, None), (1.0, 1.0), 200, seed=0
        )
        assert report.verdict == PASS
        assert report.details["T1"] == 8


class TestConvexity:
    def test_equal_endpoints_give_equal_rows(self, iid_model):
        mu = _density(0.0, 1.0)
        report = convexity_scan(iid_model, mu, mu, [0.25, 0.5, 0.75], 0.3, 10, 150, seed=5)
        assert len({row["hits"] for row in report.rows}) == 1
        assert [row["lambda"] for row in report.rows] == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_mixtures_stay_below_the_chord(self, iid_model):
        report = convexity_scan(iid_model, _density(0.0, 0.6), _density(0.4, 1.0), [0.5], 0.3, 8, 400, seed=6)
        assert report.passed
        assert report.details["endpoints_resolved"]

    def test_admissibility_column(self, iid_model):
        cs = discover_classes_1d(PiecewiseLinearMap.identity(), (0.0, 1.0), 1e-2)
        report = convexity_scan(iid_model, _density(0.1, 0.5), _density(0.5, 0.9), [0.5], 0.3, 6, 100, seed=0, cs=cs)
        assert all(row["admissible"] is True for row in report.rows)
