from __future__ import annotations

import pickle

import numpy as np
import pytest
from scipy import integrate, stats

from ldpchain.errors import PreconditionError
from ldpchain.kernels.base import X_INIT, iterated_density, iterated_profile, sample_paths, tilde_density, word_density
from ldpchain.kernels.flow import logistic_solution, lotka_volterra_field, rk4, steps_for
from ldpchain.kernels.zoo import (
    G_SHAPES,
    PHI_SHAPES,
    IidUniform,
    LotkaVolterra,
    LotkaVolterraParams,
    MonotoneWalk,
    NoiseShape,
    PerturbedSystem,
    PiecewiseLinearMap,
    UniformStep,
    bounded_lsc_constant,
)


def _logistic(t, x):
    return x * (1.0 - x)


class TestInitialState:
    def test_pickle_keeps_identity(self):
        assert pickle.loads(pickle.dumps(X_INIT)) is X_INIT

    def test_initial_law_is_beta(self, iid_model, rng):
        paths = sample_paths(iid_model, X_INIT, 1, 5000, rng)
        assert paths.shape == (5000, 1, 1)
        assert np.all((paths > 0.0) & (paths < 1.0))

    def test_start_from_point(self, rng):
        paths = sample_paths(UniformStep(), np.array([10.0]), 3, 100, rng)
        assert np.all(paths[:, 0, 0] > 10.0)
        assert np.all(np.diff(paths[:, :, 0], axis=1) > 0)


class TestDensities:
    def test_word_density_of_empty_word(self, iid_model):
        assert word_density(iid_model, X_INIT, np.zeros((0, 1))) == 1.0

    def test_perturbed_density_support_and_peak(self, two_class_model):
        fx = float(two_class_model.f(0.5))
        assert two_class_model.density(np.array([0.5]), fx) == pytest.approx(0.75)
        assert two_class_model.density(np.array([0.5]), fx + 1.5) == 0.0

    def test_phi_shapes_meet_support_conditions(self):
        for shape in PHI_SHAPES.values():
            shape.check_symmetric_support()

    def test_bound_violation_is_reported(self):
        uniform = PHI_SHAPES["uniform"]
        with pytest.raises(PreconditionError, match="exceeds"):
            NoiseShape("narrow", uniform.pdf, uniform.ppf, 0.1).check_symmetric_support()

    def test_two_step_uniform_density(self, rng):
        est, err = iterated_density(UniformStep(), np.array([0.0]), 1.0, 2, 500, rng)
        assert est == pytest.approx(1.0, abs=1e-12)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_two_step_perturbed_density_is_unbiased(self, two_class_model, rng):
        f, pdf = two_class_model.f, two_class_model.phi.pdf
        x = np.array([0.5])
        fx = float(f(x)[0])
        ys = np.array([[-1.2], [-0.8], [-0.4]])
        est, err = iterated_profile(two_class_model, x, ys, 2, 20_000, rng)
        for j, y in enumerate(ys[:, 0]):
            exact, _ = integrate.quad(
                lambda z: float(pdf(np.array(z - fx)) * pdf(np.array(y - f(z)))),
                fx - 1.0, fx + 1.0, points=[-0.5, 0.0, 0.5], epsabs=1e-10,
            )
            assert exact > 0
            assert err[1, j] > 0
            assert abs(est[1, j] - exact) < 4 * err[1, j]

    def test_tilde_density_needs_a_bound(self, rng):
        with pytest.raises(PreconditionError):
            tilde_density(MonotoneWalk(0.5), X_INIT, 0.5, 3, 10, rng)

    def test_lsc_constant(self):
        assert bounded_lsc_constant(2.0, 0.5) == 4.0
        with pytest.raises(PreconditionError):
            bounded_lsc_constant(2.0, 0.0)


class TestMonotoneWalk:
    def test_increments_follow_power_law(self, rng):
        walk = MonotoneWalk(0.5)
        inc = walk.increments(rng, 20_000)
        assert np.all((inc > 0.0) & (inc <= 1.0))
        result = stats.kstest(inc, lambda t: np.clip(t, 0.0, 1.0) ** 0.5)
        assert result.pvalue > 1e-3
        assert inc.mean() == pytest.approx(walk.mean_increment(), abs=0.01)

    def test_alpha_range(self):
        with pytest.raises(PreconditionError):
            MonotoneWalk(1.0)


class TestFlow:
    def test_rk4_logistic(self):
        x = rk4(0.0, 2.0, _logistic, steps_for(2.0, 0.01), np.array([0.1]))
        assert abs(float(x[0]) - logistic_solution(0.1, 2.0)) < 1e-6

    def test_rk4_fourth_order(self):
        exact = logistic_solution(0.1, 2.0)
        errors = [abs(float(rk4(0.0, 2.0, _logistic, steps_for(2.0, h), np.array([0.1]))[0]) - exact) for h in (0.2, 0.1)]
        assert 10.0 < errors[0] / errors[1] < 22.0

    def test_halving_the_step_keeps_the_flow(self):
        a = np.array([[1.0, 0.5], [0.5, 1.0]])
        probes = np.array([[0.1, 0.1], [0.5, 0.9], [1.2, 0.3], [0.0, 1.4], [2.0, 2.0]])
        coarse = LotkaVolterra(LotkaVolterraParams(d=2, a=a, r=np.ones(2), integrator_step=1e-3)).flow(probes)
        fine = LotkaVolterra(LotkaVolterraParams(d=2, a=a, r=np.ones(2), integrator_step=5e-4)).flow(probes)
        assert np.max(np.abs(coarse - fine)) < 1e-5

    def test_lotka_volterra_zero_is_fixed(self):
        r, a = np.ones(2), np.eye(2)
        np.testing.assert_array_equal(lotka_volterra_field(0.0, np.zeros(2), r, a), np.zeros(2))

    def test_flow_clips_negative_coordinates(self):
        p = LotkaVolterraParams(d=2, a=np.eye(2), r=np.ones(2), integrator_step=0.01)
        moved = LotkaVolterra(p).flow(np.array([[-0.3, 0.5], [0.0, 0.0]]))
        assert moved[0, 0] == 0.0
        assert 0.5 < moved[0, 1] < 1.0
        np.testing.assert_array_equal(moved[1], np.zeros(2))

    def test_noise_must_be_a_density(self):
        g = G_SHAPES["triangular"]
        half = NoiseShape("half", lambda z: 0.5 * g.pdf(z), g.ppf, g.bound)
        with pytest.raises(PreconditionError, match="integrates"):
            LotkaVolterraParams(d=1, a=np.eye(1), r=np.ones(1), noise_density=half)


class TestMaps:
    def test_two_class_map_is_nondecreasing(self):
        f = PiecewiseLinearMap.two_class()
        grid = np.linspace(-3.0, 6.0, 1001)
        assert np.all(np.diff(f(grid)) >= 0)

    def test_decreasing_knots_are_rejected(self):
        with pytest.raises(PreconditionError):
            PiecewiseLinearMap.from_knots([(0.0, 1.0), (1.0, 0.0)])

    def test_ratchet_intervals(self):
        f = PiecewiseLinearMap.two_class()
        sides = {side for lo, hi, side in f.ratchet_intervals(1.0, 2.0)}
        assert sides == {"left"}

    def test_iid_density_is_flat(self, iid_model):
        ys = np.array([[0.1], [0.9], [1.5]])
        np.testing.assert_array_equal(iid_model.densities(np.array([0.3]), ys), [1.0, 1.0, 0.0])

    def test_perturbed_model_describes_itself(self, two_class_model):
        info = two_class_model.describe()
        assert info["name"] == "perturbed"
        assert info["phi"] == "epanechnikov"


def test_iid_model_rejects_empty_range():
    with pytest.raises(ValueError):
        IidUniform(1.0, 1.0)


def test_perturbed_model_rejects_unbounded_support():
    g = G_SHAPES["exponential"]
    with pytest.raises(PreconditionError):
        PerturbedSystem(PiecewiseLinearMap.identity(), g)
