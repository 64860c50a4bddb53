"""Dense symmetric linear algebra: SPD matrices with cached factors,
Gaussian laws, the Bures-Wasserstein distance, and Gaussian optimal
transport maps.

Matrix square roots use symmetric eigendecomposition throughout;
dimensions stay small (d <= a few hundred), so the simpler error
analysis wins over iterative schemes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, FactorizationError
from .policy import DEFAULT, NumericPolicy

__all__ = [
    "SpdMatrix",
    "GaussianLaw",
    "AffineMap",
    "spd_sqrt",
    "spectral_bounds",
    "bures_w2",
    "bures_w2_raw",
    "w2_gaussian_to_point",
    "optimal_coupling_map",
    "save_spd_text",
    "load_spd_text",
]


def _as_square_array(entries) -> np.ndarray:
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise FactorizationError(f"expected a square matrix, got shape {a.shape}")
    return a


class SpdMatrix:
    """Symmetric positive-definite matrix with eagerly cached factors.

    Construction validates symmetry and positive definiteness and
    computes the eigendecomposition, Cholesky factor, square root and
    inverse square root up front. Instances are immutable afterwards and
    safe to share across threads.

    Parameters
    ----------
    entries : array_like
        d x d symmetric matrix with ``lambda_min > pd_rel_floor * lambda_max``.
    policy : NumericPolicy, optional
        Tolerances for the symmetry and definiteness checks.
    """

    __slots__ = (
        "dim",
        "entries",
        "eigenvalues",
        "eigenvectors",
        "cached_cholesky",
        "cached_sqrt",
        "cached_inv_sqrt",
    )

    def __init__(self, entries, policy: NumericPolicy = DEFAULT):
        a = _as_square_array(entries)
        scale = np.maximum(1.0, np.abs(a))
        if not (np.abs(a - a.T) <= policy.symmetry_rtol * scale).all():
            raise FactorizationError("matrix is not symmetric within tolerance")
        a = 0.5 * (a + a.T)
        try:
            w, v = np.linalg.eigh(a)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise FactorizationError(f"eigendecomposition failed: {exc}") from exc
        if w[0] <= policy.pd_rel_floor * max(w[-1], 0.0):
            raise FactorizationError(
                f"matrix is not positive definite: lambda_min={w[0]:.3e}, "
                f"lambda_max={w[-1]:.3e}"
            )
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"Cholesky factorization failed: {exc}") from exc

        sqrt_w = np.sqrt(w)
        object.__setattr__(self, "dim", a.shape[0])
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)
        object.__setattr__(self, "cached_cholesky", chol)
        object.__setattr__(self, "cached_sqrt", (v * sqrt_w) @ v.T)
        object.__setattr__(self, "cached_inv_sqrt", (v / sqrt_w) @ v.T)
        for arr in (a, w, v, chol, self.cached_sqrt, self.cached_inv_sqrt):
            arr.setflags(write=False)

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"

    # -- derived quantities ------------------------------------------------

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def sqrt(self) -> "SpdMatrix":
        return SpdMatrix(self.cached_sqrt)

    def inv_sqrt(self) -> "SpdMatrix":
        return SpdMatrix(self.cached_inv_sqrt)

    def inverse(self) -> "SpdMatrix":
        v, w = self.eigenvectors, self.eigenvalues
        return SpdMatrix((v / w) @ v.T)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.entries @ x

    def condition_number(self) -> float:
        return float(self.eigenvalues[-1] / self.eigenvalues[0])

    def scaled(self, c: float) -> "SpdMatrix":
        if c <= 0:
            raise FactorizationError("scale factor must be positive")
        return SpdMatrix(c * self.entries)

    @staticmethod
    def identity(d: int) -> "SpdMatrix":
        return SpdMatrix(np.eye(d))


@dataclass(frozen=True)
class GaussianLaw:
    """Gaussian distribution N(mean, covariance) with SPD covariance."""

    mean: np.ndarray
    covariance: SpdMatrix

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        if mean.shape[0] != self.covariance.dim:
            raise DimensionMismatchError(
                f"mean has dim {mean.shape[0]}, covariance has dim {self.covariance.dim}"
            )

    @property
    def dim(self) -> int:
        return self.covariance.dim

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self.covariance.cached_cholesky.T


@dataclass(frozen=True)
class AffineMap:
    """Affine map ``x -> matrix @ x + offset``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T + self.offset

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def spd_sqrt(a: SpdMatrix) -> SpdMatrix:
    """Symmetric square root R of ``a`` with ``R @ R == a``."""
    return a.sqrt()


def spectral_bounds(a: SpdMatrix) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of ``a``."""
    return float(a.eigenvalues[0]), float(a.eigenvalues[-1])


def _cross_trace(cov_p: np.ndarray, sqrt_q: np.ndarray) -> float:
    # tr((Q^{1/2} P Q^{1/2})^{1/2}) with eigenvalue clipping against round-off
    inner = sqrt_q @ cov_p @ sqrt_q
    w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def bures_w2_raw(
    mean_p: np.ndarray,
    cov_p: np.ndarray,
    mean_q: np.ndarray,
    cov_q: np.ndarray,
) -> float:
    """Wasserstein-2 distance between Gaussians given raw PSD covariances.

    Tolerates positive *semi*-definite covariances (point masses,
    exactly degenerate chain marginals); negative eigenvalues from
    round-off are clipped to zero.
    """
    mean_p = np.asarray(mean_p, dtype=float).reshape(-1)
    mean_q = np.asarray(mean_q, dtype=float).reshape(-1)
    if mean_p.shape != mean_q.shape or cov_p.shape != cov_q.shape:
        raise DimensionMismatchError("laws have different dimensions")
    wq, vq = np.linalg.eigh(0.5 * (cov_q + cov_q.T))
    sqrt_q = (vq * np.sqrt(np.clip(wq, 0.0, None))) @ vq.T
    gap = float(np.dot(mean_p - mean_q, mean_p - mean_q))
    val = gap + float(np.trace(cov_p)) + float(np.trace(cov_q)) - 2.0 * _cross_trace(cov_p, sqrt_q)
    return float(np.sqrt(max(val, 0.0)))


def bures_w2(p: GaussianLaw, q: GaussianLaw) -> float:
    """Wasserstein-2 distance between two Gaussian laws.

    Uses the closed form
    ``W2^2 = |mu_p - mu_q|^2 + tr(S_p + S_q - 2 (S_q^{1/2} S_p S_q^{1/2})^{1/2})``.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"laws have dims {p.dim} and {q.dim}")
    return bures_w2_raw(p.mean, p.covariance.entries, q.mean, q.covariance.entries)


def w2_gaussian_to_point(p: GaussianLaw, x: np.ndarray) -> float:
    """W2 distance between a Gaussian law and the point mass at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != p.dim:
        raise DimensionMismatchError("point has wrong dimension")
    gap = p.mean - x
    return float(np.sqrt(p.covariance.trace + np.dot(gap, gap)))


def optimal_coupling_map(p: GaussianLaw, q: GaussianLaw) -> AffineMap:
    """Monge map pushing ``p`` onto ``q`` with optimal quadratic cost.

    Returns the affine map ``x -> mu_q + T (x - mu_p)`` with
    ``T = S_p^{-1/2} (S_p^{1/2} S_q S_p^{1/2})^{1/2} S_p^{-1/2}``;
    its expected squared transport cost under ``p`` equals
    ``bures_w2(p, q)**2``.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"laws have dims {p.dim} and {q.dim}")
    sp_half = p.covariance.cached_sqrt
    sp_ihalf = p.covariance.cached_inv_sqrt
    inner = sp_half @ q.covariance.entries @ sp_half
    try:
        inner_sqrt = SpdMatrix(inner).cached_sqrt
    except FactorizationError as exc:
        raise FactorizationError(f"coupling map factorization failed: {exc}") from exc
    t = sp_ihalf @ inner_sqrt @ sp_ihalf
    t = 0.5 * (t + t.T)
    return AffineMap(matrix=t, offset=q.mean - t @ p.mean)


# -- plain-text serialization (row-major, `spd <d>` header) ----------------


def save_spd_text(a: SpdMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"spd {a.dim}\n")
    for row in a.entries:
        buf.write(" ".join(f"{x:.17g}" for x in row))
        buf.write("\n")
    return buf.getvalue()


def load_spd_text(text: str, policy: NumericPolicy = DEFAULT) -> SpdMatrix:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("spd "):
        raise FactorizationError("missing `spd <d>` header")
    try:
        d = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise FactorizationError("malformed `spd <d>` header") from exc
    if len(lines) != d + 1:
        raise FactorizationError(f"expected {d} data rows, got {len(lines) - 1}")
    rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    if any(len(r) != d for r in rows):
        raise FactorizationError("row length does not match header dimension")
    return SpdMatrix(np.array(rows), policy=policy)
