import math

import numpy as np
import pytest
from scipy import integrate

from precond_langevin import (
    InadmissibleToleranceError,
    PreconditionedConstants,
    SpdMatrix,
    check_gradient,
    condition_number_transfer,
    estimated_preconditioner_bracket,
    gaussian_pushforward,
    make_gaussian_target,
    make_gaussian_target_from_kappa,
    make_logcosh_target,
    ostrowski_bounds,
    preconditioned_constants,
    substream,
)
from conftest import random_spd


class TestGaussianTarget:
    def test_isotropic_constants(self):
        t = make_gaussian_target(np.zeros(2), SpdMatrix(np.eye(2)))
        assert t.m == t.L == 1.0
        assert t.kappa == 1.0

    def test_diagonal_constants(self):
        t = make_gaussian_target(np.zeros(2), SpdMatrix(np.diag([1.0, 0.25])))
        assert abs(t.m - 1.0) < 1e-12
        assert abs(t.L - 4.0) < 1e-12
        assert abs(t.kappa - 4.0) < 1e-12

    def test_potential_and_gradient(self, rng):
        cov = random_spd(rng, 3)
        mean = rng.standard_normal(3)
        t = make_gaussian_target(mean, cov)
        x = rng.standard_normal(3)
        prec = cov.inverse().entries
        assert abs(t.potential(x) - 0.5 * (x - mean) @ prec @ (x - mean)) < 1e-10
        assert np.allclose(t.gradient(x), prec @ (x - mean), atol=1e-10)

    def test_fisher_matches_score_covariance(self, rng):
        # Monte Carlo oracle: Cov(grad log pi) over 1e5 exact draws
        cov = random_spd(rng, 3)
        t = make_gaussian_target(np.zeros(3), cov)
        draws = rng.standard_normal((100_000, 3)) @ cov.cached_sqrt
        scores = np.array([t.score(x) for x in draws[:100_000]])
        emp = scores.T @ scores / len(scores)
        # entrywise three-standard-error comparison
        prods = scores[:, :, None] * scores[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(len(scores))
        assert (np.abs(emp - t.analytic_fisher.entries) <= 3 * se + 1e-12).all()

    def test_covariance_sandwiched_by_constants(self, rng):
        for t in [
            make_gaussian_target_from_kappa(4, 25.0),
            make_gaussian_target(np.zeros(3), random_spd(rng, 3)),
            make_logcosh_target(3),
        ]:
            eigs = t.analytic_covariance.eigenvalues
            assert eigs[0] >= 1.0 / t.L - 1e-9
            assert eigs[-1] <= 1.0 / t.m + 1e-9

    def test_fisher_is_inverse_covariance_for_gaussian(self, rng):
        cov = random_spd(rng, 4)
        t = make_gaussian_target(np.zeros(4), cov)
        assert np.allclose(
            t.analytic_fisher.entries @ cov.entries, np.eye(4), atol=1e-9
        )

    def test_kappa_constructor(self):
        t = make_gaussian_target_from_kappa(1, 1.0)
        assert t.dim == 1 and t.kappa == 1.0
        t = make_gaussian_target_from_kappa(5, 30.0, m=0.5)
        assert abs(t.kappa - 30.0) < 1e-9
        assert abs(t.m - 0.5) < 1e-12


class TestGradientConsistency:
    @pytest.mark.parametrize(
        "factory",
        [
            lambda: make_gaussian_target_from_kappa(3, 9.0),
            lambda: make_logcosh_target(1),
            lambda: make_logcosh_target(4),
        ],
    )
    def test_finite_differences(self, factory):
        target = factory()
        err = check_gradient(target, substream(77, 0), n_points=100)
        assert err <= 1e-5


class TestLogcosh:
    def test_constants(self):
        t = make_logcosh_target(1)
        assert t.m == 1.0 and t.L == 2.0

    def test_variance_within_brascamp_lieb_window(self):
        t = make_logcosh_target(1)
        var = t.analytic_covariance.entries[0, 0]
        assert 0.5 <= var <= 1.0

    def test_fisher_matches_expected_hessian(self):
        # integration-by-parts identity: E[(U')^2] = E[U'']
        def density(x):
            return np.exp(-0.5 * x * x) / np.cosh(x)

        z, _ = integrate.quad(density, -np.inf, np.inf)
        hess, _ = integrate.quad(lambda x: (2 - np.tanh(x) ** 2) * density(x), -np.inf, np.inf)
        t = make_logcosh_target(1)
        assert abs(t.analytic_fisher.entries[0, 0] - hess / z) < 1e-9

    def test_product_structure(self):
        t = make_logcosh_target(3)
        one = make_logcosh_target(1)
        assert np.allclose(
            t.analytic_covariance.entries,
            one.analytic_covariance.entries[0, 0] * np.eye(3),
        )
        x = np.array([0.5, -1.0, 2.0])
        assert abs(
            t.potential(x) - sum(one.potential(np.array([v])) for v in x)
        ) < 1e-12


class TestPreconditionedConstants:
    def test_exact_covariance_whitens(self, rng):
        cov = random_spd(rng, 3)
        t = make_gaussian_target(np.zeros(3), cov)
        c = preconditioned_constants(t, cov.inverse())
        assert abs(c.m - 1.0) < 1e-9 and abs(c.L - 1.0) < 1e-9

    def test_identity_preconditioner(self):
        t = make_gaussian_target(np.zeros(2), SpdMatrix(np.diag([1.0, 0.25])))
        c = preconditioned_constants(t, SpdMatrix(np.eye(2)))
        assert abs(c.m - 1.0) < 1e-12 and abs(c.L - 4.0) < 1e-12
        assert abs(c.kappa - 4.0) < 1e-12

    def test_random_preconditioner_within_ostrowski_bracket(self, rng):
        cov = random_spd(rng, 3)
        t = make_gaussian_target(np.zeros(3), cov)
        m1 = random_spd(rng, 3)
        exact = preconditioned_constants(t, m1)
        ref = preconditioned_constants(t, cov.inverse())
        lo, hi = ostrowski_bounds(m1, cov.inverse(), ref)
        assert lo <= exact.m + 1e-10
        assert exact.L <= hi + 1e-10

    def test_non_gaussian_bracket_is_conservative(self):
        t = make_logcosh_target(2)
        m = SpdMatrix(np.diag([2.0, 0.5]))
        c = preconditioned_constants(t, m)
        assert not c.exact
        # exact values for a separable target with diagonal M: m/M_ii, L/M_ii
        assert c.m <= min(1.0 / 2.0, 1.0 / 0.5) + 1e-12
        assert c.L >= max(2.0 / 2.0, 2.0 / 0.5) - 1e-12


class TestOstrowski:
    def test_same_preconditioner(self, rng):
        m2 = random_spd(rng, 3)
        c2 = PreconditionedConstants(m=0.7, L=2.5)
        lo, hi = ostrowski_bounds(m2, m2, c2)
        assert abs(lo - 0.7) < 1e-10 and abs(hi - 2.5) < 1e-10

    def test_scalar_multiple(self, rng):
        m2 = random_spd(rng, 3)
        c2 = PreconditionedConstants(m=0.7, L=2.5)
        lo, hi = ostrowski_bounds(m2.scaled(2.0), m2, c2)
        assert abs(lo - 0.35) < 1e-10 and abs(hi - 1.25) < 1e-10

    def test_bracket_contains_exact_constants(self, rng):
        # exact eigenvalue computation at d=4 against the bracket
        for _ in range(25):
            cov = random_spd(rng, 4)
            t = make_gaussian_target(np.zeros(4), cov)
            m1, m2 = random_spd(rng, 4), random_spd(rng, 4)
            c2 = preconditioned_constants(t, m2)
            c1 = preconditioned_constants(t, m1)
            lo, hi = ostrowski_bounds(m1, m2, c2)
            assert lo <= c1.m + 1e-9
            assert c1.L <= hi + 1e-9


class TestConditionTransfer:
    def test_same(self, rng):
        m2 = random_spd(rng, 3)
        assert abs(condition_number_transfer(m2, m2, 4.0) - 4.0) < 1e-9

    def test_scale_invariance(self, rng):
        m2 = random_spd(rng, 3)
        assert abs(condition_number_transfer(m2.scaled(3.7), m2, 4.0) - 4.0) < 1e-9

    def test_upper_bounds_exact(self, rng):
        for _ in range(25):
            cov = random_spd(rng, 3)
            t = make_gaussian_target(np.zeros(3), cov)
            m1, m2 = random_spd(rng, 3), random_spd(rng, 3)
            c2 = preconditioned_constants(t, m2)
            c1 = preconditioned_constants(t, m1)
            assert condition_number_transfer(m1, m2, c2.kappa) >= c1.kappa - 1e-9


class TestEstimateBracket:
    def test_zero_tolerance(self):
        ref = PreconditionedConstants(m=1.0, L=4.0)
        br = estimated_preconditioner_bracket(0.0, ref)
        assert br.m == 1.0 and br.L == 4.0 and br.kappa == 4.0

    def test_half_tolerance_triples_unit_kappa(self):
        br = estimated_preconditioner_bracket(0.5, PreconditionedConstants(m=1.0, L=1.0))
        assert abs(br.kappa - 3.0) < 1e-12

    def test_half_tolerance_arithmetic(self):
        br = estimated_preconditioner_bracket(0.5, PreconditionedConstants(m=1.0, L=4.0))
        assert abs(br.m - 0.5) < 1e-12
        assert abs(br.L - 6.0) < 1e-12
        assert abs(br.kappa - 12.0) < 1e-12

    @pytest.mark.parametrize("bad", [1.0, 1.5, -0.1])
    def test_invalid_tolerance(self, bad):
        with pytest.raises(InadmissibleToleranceError):
            estimated_preconditioner_bracket(bad, PreconditionedConstants(m=1.0, L=1.0))

    def test_perturbed_estimates_respect_bracket(self, rng):
        # eigenvalue-perturbed estimates within [1-D, 1+D] of the reference
        for _ in range(50):
            d = int(rng.integers(2, 6))
            cov = random_spd(rng, d)
            t = make_gaussian_target(np.zeros(d), cov)
            ref_m = cov.inverse()
            c_ref = preconditioned_constants(t, ref_m)
            delta = rng.uniform(0.05, 0.9)
            scale = rng.uniform(1 - delta, 1 + delta, size=d)
            half = ref_m.cached_sqrt
            v = np.linalg.qr(rng.standard_normal((d, d)))[0]
            m_hat = SpdMatrix(half @ (v * scale) @ v.T @ half)
            c_hat = preconditioned_constants(t, m_hat)
            br = estimated_preconditioner_bracket(delta, c_ref)
            assert br.m <= c_hat.m + 1e-9
            assert c_hat.L <= br.L + 1e-9
            assert c_hat.kappa <= br.kappa + 1e-9


class TestPushforward:
    def test_exact_whitening(self, rng):
        cov = random_spd(rng, 3)
        t = make_gaussian_target(rng.standard_normal(3), cov)
        white = gaussian_pushforward(t, cov.inverse())
        assert np.allclose(white.analytic_covariance.entries, np.eye(3), atol=1e-9)
