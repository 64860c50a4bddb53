import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from precond_langevin import (
    GaussianLaw,
    NumericalFailureError,
    ParameterError,
    SpdMatrix,
    StepSizeTooLargeError,
    Target,
    bures_w2,
    contraction_params_hmc_preset,
    contraction_params_ula,
    contraction_params_underdamped,
    exact_marginal_law,
    gaussian_pushforward,
    make_gaussian_target,
    make_gaussian_target_from_kappa,
    preconditioned_ula_step,
    substream,
    ula_step,
    underdamped_step,
)
from precond_langevin.flops import FlopLedger, matvec_flops
from precond_langevin.kernels import underdamped_coefficients
from precond_langevin.linalg import w2_gaussian_to_point
from conftest import CountingRng, ZeroNoise, random_spd


def flat_target(dim):
    return Target(
        dim=dim,
        potential=lambda x: 0.0,
        gradient=lambda x: np.zeros(dim),
        m=1.0,
        L=1.0,
        gradient_cost=0,
        kind="flat-patch",
    )


class TestUlaStep:
    def test_pure_diffusion_on_flat_potential(self):
        rng1, rng2 = substream(5, 0), substream(5, 0)
        x = np.array([1.0, -2.0])
        out = ula_step(x, flat_target(2), 0.3, rng1)
        expected = x + math.sqrt(0.6) * rng2.standard_normal(2)
        assert np.array_equal(out, expected)

    def test_deterministic_drift(self):
        t = make_gaussian_target(np.zeros(1), SpdMatrix([[1.0]]))
        out = ula_step(np.array([1.0]), t, 0.1, ZeroNoise())
        assert abs(out[0] - 0.9) < 1e-15

    def test_consumes_exactly_d_variates(self, rng):
        t = make_gaussian_target_from_kappa(3, 2.0)
        counter = CountingRng(rng)
        ula_step(np.zeros(3), t, 0.1, counter)
        assert counter.count == 3

    def test_nonfinite_gradient_raises(self):
        bad = Target(
            dim=1,
            potential=lambda x: 0.0,
            gradient=lambda x: np.array([np.inf]),
            m=1.0,
            L=1.0,
            gradient_cost=0,
        )
        with pytest.raises(NumericalFailureError):
            ula_step(np.zeros(1), bad, 0.1, ZeroNoise())

    def test_longrun_marginal_matches_oracle(self):
        # one long chain, thinned far apart, against the exact stationary law
        t = make_gaussian_target(np.zeros(2), SpdMatrix(np.diag([1.0, 0.5])))
        law = GaussianLaw(t.analytic_mean, t.analytic_covariance)
        h, gap, n_keep, burn = 0.2, 50, 4000, 500
        rng = substream(99, 0)
        x = np.zeros(2)
        kept = np.empty((n_keep, 2))
        for i in range(burn + n_keep * gap):
            x = ula_step(x, t, h, rng)
            if i >= burn and (i - burn) % gap == gap - 1:
                kept[(i - burn) // gap] = x
        fitted = GaussianLaw(kept.mean(axis=0), SpdMatrix(np.cov(kept.T)))
        stationary = exact_marginal_law(law, h, 10**6, np.zeros(2))
        # moment-estimation noise at n_keep near-independent draws
        assert bures_w2(fitted, stationary) <= 0.08


class TestPreconditionedStep:
    def test_identity_bit_identical(self, rng):
        t = make_gaussian_target_from_kappa(3, 4.0)
        x = rng.standard_normal(3)
        a = ula_step(x, t, 0.05, substream(3, 0))
        b = preconditioned_ula_step(x, t, SpdMatrix.identity(3), 0.05, substream(3, 0))
        assert np.array_equal(a, b)

    def test_whitened_gaussian_drift(self):
        # M = Sigma^{-1} turns the drift into (1-h) * identity
        cov = SpdMatrix(np.diag([4.0, 0.25]))
        t = make_gaussian_target(np.zeros(2), cov)
        y = np.array([1.0, -1.0])
        out = preconditioned_ula_step(y, t, cov.inverse(), 0.1, ZeroNoise())
        assert np.allclose(out, 0.9 * y, atol=1e-12)

    def test_matches_pushforward_target_stepwise(self, rng):
        t = make_gaussian_target(rng.standard_normal(2), random_spd(rng, 2))
        m = random_spd(rng, 2)
        pushed = gaussian_pushforward(t, m)
        h = 0.4 / (pushed.L + pushed.m)
        y1 = y2 = m.cached_sqrt @ t.analytic_mean + rng.standard_normal(2)
        r1, r2 = substream(17, 0), substream(17, 0)
        for _ in range(50):
            y1 = preconditioned_ula_step(y1, t, m, h, r1)
            y2 = ula_step(y2, pushed, h, r2)
            assert np.allclose(y1, y2, rtol=1e-10, atol=1e-12)

    def test_flop_report(self, rng):
        t = make_gaussian_target_from_kappa(3, 2.0)
        led = FlopLedger(gradient_cost=t.gradient_cost)
        preconditioned_ula_step(np.zeros(3), t, SpdMatrix.identity(3), 0.1, rng, ledger=led)
        assert led.gradient_calls == 1
        assert led.matvec_flops == 2 * matvec_flops(3)
        assert led.other_flops == 4 * 3
        led2 = FlopLedger(gradient_cost=t.gradient_cost)
        ula_step(np.zeros(3), t, 0.1, rng, ledger=led2)
        assert led2.total() == t.gradient_cost + 4 * 3


class TestUnderdampedStep:
    def test_rest_point_of_free_dynamics(self):
        x, v = np.array([2.0]), np.array([0.0])
        x2, v2 = underdamped_step((x, v), flat_target(1), 0.5, ZeroNoise())
        assert np.allclose(x2, x, atol=1e-15)
        assert np.allclose(v2, v, atol=1e-15)

    def test_displacement_vanishes_with_h(self):
        t = make_gaussian_target(np.zeros(1), SpdMatrix([[1.0]]))
        x = np.array([1.0])
        for h in [1e-2, 1e-3, 1e-4]:
            x2, _ = underdamped_step((x, np.zeros(1)), t, h, substream(5, 0))
            assert np.linalg.norm(x2 - x) <= 0.2 * h

    def test_consumes_exactly_2d_variates(self, rng):
        t = make_gaussian_target_from_kappa(3, 2.0)
        counter = CountingRng(rng)
        underdamped_step((np.zeros(3), np.zeros(3)), t, 0.1, counter)
        assert counter.count == 6

    @pytest.mark.parametrize("h", [0.05, 0.37, 1.0])
    def test_coefficients_match_moment_ode_oracle(self, h):
        # independent oracle: integrate the frozen-gradient moment ODEs
        u = 1.0 / 3.7

        def rhs(_, y):
            mx, mv, sxx, sxv, svv = y
            return [mv, -2 * mv - u * 1.3, 2 * sxv, svv - 2 * sxv, -4 * svv + 4 * u]

        ref = solve_ivp(
            rhs, [0.0, h], [0.8, -0.5, 0.0, 0.0, 0.0], rtol=1e-12, atol=1e-14
        ).y[:, -1]
        c = underdamped_coefficients(h, u)
        assert abs(0.8 + c["c_xv"] * -0.5 - c["c_xg"] * 1.3 - ref[0]) < 1e-10
        assert abs(c["a"] * -0.5 - c["c_vg"] * 1.3 - ref[1]) < 1e-10
        assert abs(c["s_xx"] - ref[2]) < 1e-10
        assert abs(c["s_xv"] - ref[3]) < 1e-10
        assert abs(c["s_vv"] - ref[4]) < 1e-10

    def test_longrun_position_covariance_vs_fine_reference(self):
        # coarse step against an independent 8x finer simulation
        t = make_gaussian_target(np.zeros(2), SpdMatrix(np.diag([1.0, 0.25])))

        def longrun(h, steps, seed):
            rng = substream(seed, 0)
            state = (np.zeros(2), np.zeros(2))
            xs = np.empty((steps, 2))
            for i in range(steps):
                state = underdamped_step(state, t, h, rng)
                xs[i] = state[0]
            return np.cov(xs[steps // 5 :].T)

        coarse = longrun(0.1, 40_000, 31)
        fine = longrun(0.0125, 120_000, 32)
        assert np.linalg.norm(coarse - fine) <= 0.12

    def test_step_size_cap(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        with pytest.raises(ParameterError):
            underdamped_step((np.zeros(1), np.zeros(1)), t, 1.5, ZeroNoise())


class TestContractionParamsUla:
    def test_unit_case(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        cp = contraction_params_ula(t, 1.0)  # h_max = 2/(1+1) boundary
        assert cp.Gamma == 1.0
        assert abs(cp.gamma - 1.0) < 1e-12
        assert abs(cp.b - 1.65) < 1e-12

    def test_arithmetic(self):
        t = make_gaussian_target(np.zeros(4), SpdMatrix(np.diag([1.0, 1.0, 1.0, 0.25])))
        cp = contraction_params_ula(t, 0.01)
        assert abs(cp.gamma - 0.01) < 1e-15
        assert abs(cp.b - 1.65 * 4.0 * math.sqrt(0.04)) < 1e-12
        assert abs(cp.b - 1.32) < 1e-12

    def test_boundary_inclusive(self):
        t = make_gaussian_target_from_kappa(2, 3.0)
        h_max = 2.0 / (t.L + t.m)
        cp = contraction_params_ula(t, h_max)
        assert cp.h == h_max

    def test_rejects_large_step_naming_h_max(self):
        t = make_gaussian_target_from_kappa(2, 3.0)
        h_max = 2.0 / (t.L + t.m)
        with pytest.raises(StepSizeTooLargeError, match="h_max"):
            contraction_params_ula(t, h_max * 1.0001)


class TestContractionParamsUnderdamped:
    def test_energy_constant(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        cp = contraction_params_underdamped(t, 0.5, 0.0)
        # E_K = 26 (d/m + D^2) = 26 enters through b
        assert abs(cp.b - 16.0 * math.sqrt(2 * 26 / 5) * 0.5) < 1e-12
        assert cp.Gamma == 4.0

    def test_bias_value(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        cp = contraction_params_underdamped(t, 0.1, 0.0)
        assert abs(cp.b - 1.6 * math.sqrt(52.0 / 5.0)) < 1e-12
        assert abs(cp.b - 5.159) < 1e-3
        assert abs(cp.gamma - 0.05) < 1e-15

    def test_rejects_bad_steps(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        with pytest.raises(StepSizeTooLargeError):
            contraction_params_underdamped(t, 1.2, 0.0)
        with pytest.raises(ParameterError):
            contraction_params_underdamped(t, 0.0, 0.0)


class TestHmcPreset:
    def test_rate_value(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        dur = 1.0 / math.sqrt(8.0)
        cp = contraction_params_hmc_preset(t, dur, dur)
        assert abs(cp.gamma - 1.0 / 48.0) < 1e-12
        assert cp.Gamma == 1.0

    def test_bias_vanishes_with_h(self):
        t = make_gaussian_target_from_kappa(2, 4.0)
        dur = 0.9 / math.sqrt(8.0 * t.L)
        biases = [contraction_params_hmc_preset(t, h, dur).b for h in [dur, dur / 4, dur / 16]]
        assert biases[0] > biases[1] > biases[2]
        assert abs(biases[1] / biases[0] - 0.25**1.5) < 1e-9

    def test_rejects_long_duration(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        bad = 1.01 / math.sqrt(8.0)
        with pytest.raises(ParameterError):
            contraction_params_hmc_preset(t, bad / 2, bad)


class TestContractionHoldsExactly:
    def test_marginal_contraction_random_instances(self, rng):
        # the contraction inequality checked literally against the exact law
        for _ in range(10):
            d = int(rng.integers(1, 4))
            cov = random_spd(rng, d)
            t = make_gaussian_target(np.zeros(d), cov)
            law = GaussianLaw(t.analytic_mean, cov)
            h = rng.uniform(0.05, 1.0) * 2.0 / (t.L + t.m)
            k = int(rng.integers(1, 300))
            x0 = 3.0 * rng.standard_normal(d)
            cp = contraction_params_ula(t, h)
            lhs = bures_w2(law, exact_marginal_law(law, h, k, x0))
            rhs = math.exp(-cp.gamma * k) * w2_gaussian_to_point(law, x0) + cp.b
            assert lhs <= rhs + 1e-10
