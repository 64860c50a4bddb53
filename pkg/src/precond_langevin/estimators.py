"""Preconditioner estimation from sample ensembles and certification of
estimate quality.

The two estimators mirror the adaptive-preconditioning displays exactly:
the covariance estimate is 1/N-normalized and centered at the sample
mean; the Fisher estimate is the uncentered second moment of the score
vectors. Quality is measured on the whitened scale:
``relative_error(M_hat, M_ref) = || M_ref^{-1/2} M_hat M_ref^{-1/2} - I ||_2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateEnsembleError, DimensionMismatchError, FactorizationError
from .flops import FlopLedger, covariance_estimate_flops, fisher_estimate_flops
from .linalg import SpdMatrix
from .policy import DEFAULT, NumericPolicy
from .targets import Target

__all__ = [
    "Ensemble",
    "Certificate",
    "empirical_covariance",
    "empirical_fisher",
    "relative_error",
    "certify",
]


@dataclass(frozen=True)
class Ensemble:
    """Ordered collection of N states in R^d with provenance metadata.

    ``meta`` carries the seed, kernel configuration, budget provenance
    and FLOP tally of the run that produced the states.
    """

    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1:
            raise DegenerateEnsembleError(f"need an N x d state array, got {states.shape}")
        if not np.isfinite(states).all():
            raise DegenerateEnsembleError("ensemble contains non-finite states")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.states.mean(axis=0)


def _estimate_to_spd(second_moment: np.ndarray, what: str, policy: NumericPolicy) -> SpdMatrix:
    sym = 0.5 * (second_moment + second_moment.T)
    w = np.linalg.eigvalsh(sym)
    if w[0] <= policy.estimate_rel_floor * max(w[-1], 0.0) or w[-1] <= 0:
        raise DegenerateEnsembleError(
            f"{what} estimate is numerically singular "
            f"(lambda_min={w[0]:.3e}, lambda_max={w[-1]:.3e}); use a larger ensemble"
        )
    try:
        return SpdMatrix(sym, policy=policy)
    except FactorizationError as exc:
        raise DegenerateEnsembleError(f"{what} estimate rejected: {exc}") from exc


def empirical_covariance(
    ensemble: Ensemble,
    ledger: Optional[FlopLedger] = None,
    policy: NumericPolicy = DEFAULT,
) -> SpdMatrix:
    """1/N-normalized centered second-moment matrix of the ensemble.

    The reduction runs in a fixed summation order, so results are
    bit-stable. Raises ``DegenerateEnsembleError`` when the estimate is
    singular beyond tolerance (e.g. all states identical).
    """
    if ensemble.size < 2:
        raise DegenerateEnsembleError("covariance estimation needs N >= 2 states")
    centered = ensemble.states - ensemble.mean
    cov = centered.T @ centered / ensemble.size
    if ledger is not None:
        ledger.add_other(covariance_estimate_flops(ensemble.size, ensemble.dim))
    return _estimate_to_spd(cov, "covariance", policy)


def empirical_fisher(
    ensemble: Ensemble,
    target: Target,
    ledger: Optional[FlopLedger] = None,
    policy: NumericPolicy = DEFAULT,
) -> SpdMatrix:
    """Uncentered second moment of the score vectors grad log pi(X_t)."""
    if ensemble.dim != target.dim:
        raise DimensionMismatchError("ensemble and target dimensions differ")
    scores = np.empty_like(ensemble.states)
    for i, x in enumerate(ensemble.states):
        scores[i] = target.score(x)
    if not np.isfinite(scores).all():
        raise DegenerateEnsembleError("non-finite score encountered")
    fisher = scores.T @ scores / ensemble.size
    if ledger is not None:
        ledger.add_gradient_calls(ensemble.size)
        ledger.add_other(fisher_estimate_flops(ensemble.size, ensemble.dim))
    return _estimate_to_spd(fisher, "Fisher", policy)


def relative_error(m_hat: SpdMatrix, m_ref: SpdMatrix) -> float:
    """Spectral norm of M_ref^{-1/2} M_hat M_ref^{-1/2} - I."""
    if m_hat.dim != m_ref.dim:
        raise DimensionMismatchError("matrices have different dimensions")
    ihalf = m_ref.cached_inv_sqrt
    whitened = ihalf @ m_hat.entries @ ihalf
    w = np.linalg.eigvalsh(0.5 * (whitened + whitened.T))
    return float(np.abs(w - 1.0).max())


@dataclass(frozen=True)
class Certificate:
    """Outcome of a relative-error certification against a tolerance.

    Truthiness equals the certification verdict: the whitened estimate's
    eigenvalues all lie in [1 - Delta, 1 + Delta] (closed inequality).
    """

    ok: bool
    error: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        return {"ok": self.ok, "relative_error": self.error, "tolerance": self.tolerance}


def certify(m_hat: SpdMatrix, m_ref: SpdMatrix, delta_rel: float) -> Certificate:
    """Certificate that ``relative_error(m_hat, m_ref) <= delta_rel``."""
    err = relative_error(m_hat, m_ref)
    return Certificate(ok=err <= delta_rel, error=err, tolerance=delta_rel)
