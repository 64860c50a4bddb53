"""Target distributions: potential, gradient, convexity/smoothness
constants, and (where available) analytic covariance and Fisher matrix.

Shipped targets:

* Gaussian with arbitrary SPD covariance (analytic everything; enables
  the exact verification pathway).
* A 1d potential ``x^2/2 + log cosh(x)`` and its d-fold product, with
  known constants m=1, L=2 and moments obtained by quadrature.

General targets must supply (m, L) as metadata; the toolkit never
estimates Hessian bounds from samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DimensionMismatchError, InadmissibleToleranceError
from .linalg import SpdMatrix
from .policy import DEFAULT, NumericPolicy

__all__ = [
    "Target",
    "PreconditionedConstants",
    "make_gaussian_target",
    "make_gaussian_target_from_kappa",
    "make_logcosh_target",
    "gaussian_pushforward",
    "preconditioned_constants",
    "ostrowski_bounds",
    "condition_number_transfer",
    "estimated_preconditioner_bracket",
    "check_gradient",
]


@dataclass(frozen=True)
class Target:
    """Distribution with density proportional to exp(-potential).

    Attributes
    ----------
    dim : int
    potential, gradient : callable
        Pure functions of a length-``dim`` vector.
    m, L : float
        Strong-convexity and smoothness constants, ``0 < m <= L``.
    gradient_cost : int
        Declared FLOPs per gradient call (the constant G in cost models).
    analytic_covariance, analytic_fisher : SpdMatrix, optional
        Exact second-moment structure, when known.
    analytic_mean, mode : ndarray, optional
    """

    dim: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    m: float
    L: float
    gradient_cost: int
    analytic_covariance: Optional[SpdMatrix] = None
    analytic_fisher: Optional[SpdMatrix] = None
    analytic_mean: Optional[np.ndarray] = None
    mode: Optional[np.ndarray] = None
    kind: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatchError("target dimension must be >= 1")
        if not (0 < self.m <= self.L):
            raise ValueError(f"need 0 < m <= L, got m={self.m}, L={self.L}")

    @property
    def kappa(self) -> float:
        return self.L / self.m

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    def trace_covariance_bound(self) -> float:
        """tr(Sigma_pi), exact when analytic, else the bound d/m."""
        if self.analytic_covariance is not None:
            return self.analytic_covariance.trace
        return self.dim / self.m

    def score(self, x: np.ndarray) -> np.ndarray:
        """grad log pi = -grad U."""
        return -self.gradient(x)


@dataclass(frozen=True)
class PreconditionedConstants:
    """Convexity/smoothness constants of the target seen through a
    preconditioner M (extreme eigenvalues of M^{-1/2} Hess U M^{-1/2}).

    ``exact=False`` marks a conservative bracket (lower m, upper L)
    rather than the exact extreme values.
    """

    m: float
    L: float
    exact: bool = True

    def __post_init__(self):
        if not (0 < self.m <= self.L):
            raise ValueError(f"need 0 < m <= L, got m={self.m}, L={self.L}")

    @property
    def kappa(self) -> float:
        return self.L / self.m


def make_gaussian_target(mean, covariance: SpdMatrix) -> Target:
    """Gaussian target N(mean, covariance).

    The potential is the quadratic form in the precision matrix, so
    m and L are its extreme eigenvalues, the Fisher matrix equals the
    precision, and a gradient call is one precision matvec (G = 2 d^2).
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    if mean.shape[0] != covariance.dim:
        raise DimensionMismatchError("mean and covariance dimensions differ")
    mean.setflags(write=False)
    precision = covariance.inverse()
    prec_entries = precision.entries

    def potential(x: np.ndarray) -> float:
        r = np.asarray(x, dtype=float) - mean
        return 0.5 * float(r @ prec_entries @ r)

    def gradient(x: np.ndarray) -> np.ndarray:
        return prec_entries @ (np.asarray(x, dtype=float) - mean)

    return Target(
        dim=covariance.dim,
        potential=potential,
        gradient=gradient,
        m=float(precision.eigenvalues[0]),
        L=float(precision.eigenvalues[-1]),
        gradient_cost=2 * covariance.dim**2,
        analytic_covariance=covariance,
        analytic_fisher=precision,
        analytic_mean=mean,
        mode=mean,
        kind="gaussian",
    )


def make_gaussian_target_from_kappa(
    dim: int, kappa: float, m: float = 1.0, mean=None
) -> Target:
    """Gaussian target with precision eigenvalues log-spaced in [m, m*kappa]."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    prec_eigs = np.geomspace(m, m * kappa, dim) if dim > 1 else np.array([m])
    cov = SpdMatrix(np.diag(1.0 / prec_eigs))
    if mean is None:
        mean = np.zeros(dim)
    return make_gaussian_target(mean, cov)


def _logcosh(x: np.ndarray) -> np.ndarray:
    # |x| + log1p(e^{-2|x|}) - log 2, stable for large |x|
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


@lru_cache(maxsize=1)
def _logcosh_moments() -> tuple[float, float]:
    """(variance, fisher) of the 1d density exp(-x^2/2)/cosh(x), by quadrature."""

    def density(x):
        return np.exp(-0.5 * x * x - _logcosh(np.asarray(x)))

    z, _ = integrate.quad(density, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    var, _ = integrate.quad(
        lambda x: x * x * density(x), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13
    )
    fisher, _ = integrate.quad(
        lambda x: (x + np.tanh(x)) ** 2 * density(x),
        -np.inf,
        np.inf,
        epsabs=1e-14,
        epsrel=1e-13,
    )
    return var / z, fisher / z


def make_logcosh_target(dim: int = 1) -> Target:
    """Product target with coordinate potential x^2/2 + log cosh(x).

    The coordinate Hessian is 2 - tanh(x)^2, so m = 1 and L = 2 exactly.
    Covariance and Fisher matrix are scalar multiples of the identity,
    computed by high-precision quadrature.
    """
    var, fisher = _logcosh_moments()

    def potential(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.dot(x, x) + _logcosh(x).sum())

    def gradient(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + np.tanh(x)

    zero = np.zeros(dim)
    return Target(
        dim=dim,
        potential=potential,
        gradient=gradient,
        m=1.0,
        L=2.0,
        gradient_cost=4 * dim,
        analytic_covariance=SpdMatrix(var * np.eye(dim)),
        analytic_fisher=SpdMatrix(fisher * np.eye(dim)),
        analytic_mean=zero,
        mode=zero,
        kind="logcosh-product",
    )


def gaussian_pushforward(target: Target, m_matrix: SpdMatrix) -> Target:
    """Law of M^{1/2} X for Gaussian X ~ target: N(M^{1/2} mu, M^{1/2} S M^{1/2})."""
    if not target.is_gaussian:
        raise DimensionMismatchError("pushforward targets require a Gaussian base")
    if m_matrix.dim != target.dim:
        raise DimensionMismatchError("preconditioner dimension mismatch")
    half = m_matrix.cached_sqrt
    cov = SpdMatrix(half @ target.analytic_covariance.entries @ half)
    return make_gaussian_target(half @ target.analytic_mean, cov)


def preconditioned_constants(target: Target, m_matrix: SpdMatrix) -> PreconditionedConstants:
    """Constants of the target seen through preconditioner M.

    Exact for Gaussian targets (eigenvalues of M^{-1/2} precision
    M^{-1/2}); for all other targets a conservative bracket via
    Ostrowski's inequality against the identity preconditioner, whose
    constants are the target's own (m, L).
    """
    if m_matrix.dim != target.dim:
        raise DimensionMismatchError("preconditioner dimension mismatch")
    if target.is_gaussian:
        ihalf = m_matrix.cached_inv_sqrt
        w = np.linalg.eigvalsh(ihalf @ target.analytic_fisher.entries @ ihalf)
        return PreconditionedConstants(m=float(w[0]), L=float(w[-1]), exact=True)
    base = PreconditionedConstants(m=target.m, L=target.L, exact=True)
    lo, hi = ostrowski_bounds(m_matrix, SpdMatrix.identity(target.dim), base)
    return PreconditionedConstants(m=lo, L=hi, exact=False)


def ostrowski_bounds(
    m1: SpdMatrix, m2: SpdMatrix, c2: PreconditionedConstants
) -> tuple[float, float]:
    """Bracket for the constants under M1 given the constants under M2:

    ``lambda_min(M1^{-1/2} M2 M1^{-1/2}) * m_M2  <=  m_M1``
    and ``L_M1 <= lambda_max(M1^{-1/2} M2 M1^{-1/2}) * L_M2``.
    """
    if m1.dim != m2.dim:
        raise DimensionMismatchError("preconditioners have different dimensions")
    ihalf = m1.cached_inv_sqrt
    w = np.linalg.eigvalsh(ihalf @ m2.entries @ ihalf)
    return float(w[0]) * c2.m, float(w[-1]) * c2.L


def condition_number_transfer(m1: SpdMatrix, m2: SpdMatrix, kappa_m2: float) -> float:
    """Upper bound kappa(M1^{-1/2} M2 M1^{-1/2}) * kappa_M2 on kappa_M1."""
    if m1.dim != m2.dim:
        raise DimensionMismatchError("preconditioners have different dimensions")
    ihalf = m1.cached_inv_sqrt
    w = np.linalg.eigvalsh(ihalf @ m2.entries @ ihalf)
    return float(w[-1] / w[0]) * kappa_m2


def estimated_preconditioner_bracket(
    delta_rel: float, c_ref: PreconditionedConstants
) -> PreconditionedConstants:
    """Constants bracket for any estimate within relative error Delta of
    the reference preconditioner: ``((1-Delta) m, (1+Delta) L)``, hence
    condition number at most ``(1+Delta)/(1-Delta)`` times the reference.
    """
    if not 0 <= delta_rel < 1:
        raise InadmissibleToleranceError(
            f"relative-error tolerance must lie in [0, 1), got {delta_rel}"
        )
    return PreconditionedConstants(
        m=(1.0 - delta_rel) * c_ref.m,
        L=(1.0 + delta_rel) * c_ref.L,
        exact=delta_rel == 0 and c_ref.exact,
    )


def check_gradient(
    target: Target,
    rng: np.random.Generator,
    n_points: int = 100,
    step: float = 1e-6,
    policy: NumericPolicy = DEFAULT,
) -> float:
    """Max relative error between the analytic gradient and central
    finite differences of the potential over seeded points."""
    worst = 0.0
    for _ in range(n_points):
        x = rng.standard_normal(target.dim)
        g = target.gradient(x)
        fd = np.empty_like(g)
        for i in range(target.dim):
            e = np.zeros(target.dim)
            e[i] = step
            fd[i] = (target.potential(x + e) - target.potential(x - e)) / (2 * step)
        scale = max(1.0, float(np.linalg.norm(g)))
        worst = max(worst, float(np.linalg.norm(fd - g)) / scale)
    return worst
