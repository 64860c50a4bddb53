import math

import numpy as np
import pytest

from precond_langevin import (
    DimensionMismatchError,
    FactorizationError,
    GaussianLaw,
    SpdMatrix,
    bures_w2,
    load_spd_text,
    optimal_coupling_map,
    save_spd_text,
    spd_sqrt,
    spectral_bounds,
    w2_gaussian_to_point,
)
from conftest import random_spd


def gaussian(mean, cov):
    return GaussianLaw(np.atleast_1d(np.asarray(mean, dtype=float)), SpdMatrix(np.atleast_2d(cov)))


class TestSpdMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(FactorizationError, match="symmetric"):
            SpdMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(FactorizationError, match="positive definite"):
            SpdMatrix(np.array([[1.0, 0.0], [0.0, -0.5]]))

    def test_rejects_near_singular(self):
        # lambda_min at the 1e-12 * lambda_max floor
        with pytest.raises(FactorizationError):
            SpdMatrix(np.diag([1.0, 1e-13]))

    def test_immutable(self):
        a = SpdMatrix(np.eye(2))
        with pytest.raises(AttributeError):
            a.dim = 3
        with pytest.raises(ValueError):
            a.entries[0, 0] = 2.0

    def test_inverse_roundtrip(self, rng):
        a = random_spd(rng, 4)
        assert np.allclose(a.inverse().entries @ a.entries, np.eye(4), atol=1e-10)


class TestSqrt:
    def test_identity(self):
        a = SpdMatrix(np.eye(3))
        assert np.array_equal(spd_sqrt(a).entries, np.eye(3))

    def test_diagonal(self):
        r = spd_sqrt(SpdMatrix(np.diag([4.0, 9.0])))
        assert np.allclose(r.entries, np.diag([2.0, 3.0]), atol=1e-14)

    @pytest.mark.parametrize("d", [2, 5, 20])
    def test_roundtrip_random(self, rng, d):
        a = random_spd(rng, d)
        r = spd_sqrt(a)
        err = np.linalg.norm(r.entries @ r.entries - a.entries) / np.linalg.norm(a.entries)
        assert err <= 1e-10


class TestSpectralBounds:
    def test_diagonal(self):
        assert spectral_bounds(SpdMatrix(np.diag([1.0, 4.0]))) == (1.0, 4.0)

    def test_identity(self):
        assert spectral_bounds(SpdMatrix(np.eye(3))) == (1.0, 1.0)

    def test_matches_quadratic_formula_2x2(self, rng):
        # independent oracle: closed-form roots of the characteristic polynomial
        for _ in range(25):
            a = random_spd(rng, 2)
            (p, q), (_, r) = a.entries[0], a.entries[1]
            half_tr = 0.5 * (p + r)
            disc = math.sqrt(0.25 * (p - r) ** 2 + q * q)
            lo, hi = spectral_bounds(a)
            assert abs(lo - (half_tr - disc)) <= 1e-10 * max(1.0, hi)
            assert abs(hi - (half_tr + disc)) <= 1e-10 * max(1.0, hi)


class TestBuresW2:
    def test_identical_laws(self, rng):
        p = gaussian([0.3, -1.0], random_spd(rng, 2).entries)
        assert bures_w2(p, p) <= 1e-10

    def test_mean_shift_1d(self):
        assert abs(bures_w2(gaussian(0.0, [[1.0]]), gaussian(3.0, [[1.0]])) - 3.0) < 1e-12

    def test_scale_1d(self):
        # |sigma_1 - sigma_2| for centred 1d Gaussians
        assert abs(bures_w2(gaussian(0.0, [[1.0]]), gaussian(0.0, [[4.0]])) - 1.0) < 1e-12

    def test_symmetry(self, rng):
        for _ in range(10):
            p = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
            q = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
            assert abs(bures_w2(p, q) - bures_w2(q, p)) <= 1e-10

    def test_triangle_inequality(self, rng):
        for _ in range(50):
            laws = [
                gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
                for _ in range(3)
            ]
            dpq = bures_w2(laws[0], laws[1])
            dqr = bures_w2(laws[1], laws[2])
            dpr = bures_w2(laws[0], laws[2])
            assert dpr <= dpq + dqr + 1e-8

    def test_zero_iff_equal(self, rng):
        p = gaussian(rng.standard_normal(2), random_spd(rng, 2).entries)
        q = gaussian(p.mean + 1e-3, p.covariance.entries)
        assert bures_w2(p, q) > 1e-4

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            bures_w2(gaussian([0.0], [[1.0]]), gaussian([0.0, 0.0], np.eye(2)))

    def test_point_mass_distance(self, rng):
        p = gaussian([1.0, 2.0], random_spd(rng, 2).entries)
        x = np.array([0.0, 0.0])
        expected = math.sqrt(p.covariance.trace + 5.0)
        assert abs(w2_gaussian_to_point(p, x) - expected) < 1e-12


class TestOptimalCoupling:
    def test_identity(self):
        p = gaussian([0.0, 0.0], np.eye(2))
        t = optimal_coupling_map(p, p)
        assert np.allclose(t.matrix, np.eye(2), atol=1e-12)
        assert np.allclose(t.offset, 0.0, atol=1e-12)

    def test_scalar_case(self):
        t = optimal_coupling_map(gaussian(0.0, [[1.0]]), gaussian(5.0, [[9.0]]))
        assert abs(t.matrix[0, 0] - 3.0) < 1e-12
        assert abs(t.offset[0] - 5.0) < 1e-12

    def test_pushforward_moments(self, rng):
        p = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
        q = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
        t = optimal_coupling_map(p, q)
        pushed_mean = t.matrix @ p.mean + t.offset
        pushed_cov = t.matrix @ p.covariance.entries @ t.matrix.T
        assert np.linalg.norm(pushed_mean - q.mean) <= 1e-9 * max(1, np.linalg.norm(q.mean))
        assert (
            np.linalg.norm(pushed_cov - q.covariance.entries)
            <= 1e-9 * np.linalg.norm(q.covariance.entries)
        )

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_transport_cost_equals_bures_analytic(self, rng, d):
        # E|X - T(X)|^2 = |mu_p - mu_q|^2 + tr(S_p) + tr(T S_p T) - 2 tr(T S_p)
        p = gaussian(rng.standard_normal(d), random_spd(rng, d).entries)
        q = gaussian(rng.standard_normal(d), random_spd(rng, d).entries)
        t = optimal_coupling_map(p, q)
        sp = p.covariance.entries
        cost = (
            float(np.dot(p.mean - q.mean, p.mean - q.mean))
            + np.trace(sp)
            + np.trace(t.matrix @ sp @ t.matrix.T)
            - 2 * np.trace(t.matrix @ sp)
        )
        w2 = bures_w2(p, q)
        assert abs(cost - w2 * w2) <= 1e-8 * max(1.0, w2 * w2)

    def test_transport_cost_monte_carlo(self, rng):
        # independent Monte Carlo oracle over 1e5 coupled draws at d=3
        p = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
        q = gaussian(rng.standard_normal(3), random_spd(rng, 3).entries)
        t = optimal_coupling_map(p, q)
        x = p.sample(rng, 100_000)
        sq = ((x - t(x)) ** 2).sum(axis=1)
        se = sq.std(ddof=1) / math.sqrt(len(sq))
        assert abs(sq.mean() - bures_w2(p, q) ** 2) <= 3 * se

    def test_singular_rejected(self):
        with pytest.raises(FactorizationError):
            SpdMatrix(np.zeros((2, 2)))


class TestTextFormat:
    def test_roundtrip(self, rng):
        a = random_spd(rng, 3)
        b = load_spd_text(save_spd_text(a))
        assert np.array_equal(a.entries, b.entries)

    def test_header_present(self, rng):
        text = save_spd_text(random_spd(rng, 2))
        assert text.splitlines()[0] == "spd 2"

    @pytest.mark.parametrize(
        "text",
        ["", "spd x\n1", "spd 2\n1 0\n", "spd 1\n1 2\n"],
    )
    def test_malformed_rejected(self, text):
        with pytest.raises(FactorizationError):
            load_spd_text(text)
