"""One-step Markov kernels and their Wasserstein-2 contraction
parametrizations.

Kernels
-------
* ``ula_step``: Euler-Maruyama discretization of the overdamped
  Langevin diffusion, ``x' = x - h grad U(x) + sqrt(2h) xi``.
* ``preconditioned_ula_step``: the same update on the pushforward
  target ``y -> U(M^{-1/2} y)``; costs two extra matvecs per step.
* ``underdamped_step``: exact Ornstein-Uhlenbeck update with the
  gradient frozen over the step, friction 2 and velocity scale 1/L
  (the discretization the underdamped contraction preset is stated
  for). Consumes 2d normal variates with the correct cross-covariance.

Each contraction provider returns ``(Gamma, gamma, b)`` such that
``W2(pi, mu K^k) <= Gamma exp(-gamma k) W2(pi, mu) + b`` for every k
and mu, valid for step sizes up to ``h_max``. For the Langevin kernel
the rate ``gamma = m h`` is used (a valid lower bound for
``-log(1 - m h)``), matching every downstream budget formula.

Stepping is pure given (state, target, RNG substream): chains on
disjoint substreams may run in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import NumericalFailureError, ParameterError, StepSizeTooLargeError
from .flops import (
    FlopLedger,
    ULA_STEP_COEFF,
    UNDERDAMPED_STEP_COEFF,
)
from .linalg import SpdMatrix
from .targets import Target

__all__ = [
    "KernelFamily",
    "KernelConfig",
    "ContractionParams",
    "ula_step",
    "preconditioned_ula_step",
    "underdamped_step",
    "underdamped_coefficients",
    "contraction_params_ula",
    "contraction_params_underdamped",
    "contraction_params_hmc_preset",
]


class KernelFamily(str, Enum):
    ULA = "ula"
    UNDERDAMPED = "underdamped"


@dataclass(frozen=True)
class ContractionParams:
    """A (Gamma, gamma, b) Wasserstein-2 contraction instance.

    ``gamma`` is the per-iteration exponential rate, ``b`` the W2 bias
    floor, ``h_max`` the largest step size for which the parametrization
    is valid, and ``h`` the step size it was evaluated at (None for
    synthetic parameter sets not tied to a kernel).
    """

    Gamma: float
    gamma: float
    b: float
    h_max: float
    h: Optional[float] = None

    def __post_init__(self):
        if self.Gamma < 1:
            raise ParameterError(f"Gamma must be >= 1, got {self.Gamma}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.b < 0:
            raise ParameterError(f"b must be >= 0, got {self.b}")


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family plus its parameters for a run.

    ``initial_distance_bound`` is the underdamped constant D: an upper
    bound on the distance from the initial position to the mode.
    """

    family: KernelFamily = KernelFamily.ULA
    h: float = 0.0
    preconditioner: Optional[SpdMatrix] = None
    initial_distance_bound: float = 0.0

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "h": self.h,
            "preconditioned": self.preconditioner is not None,
            "initial_distance_bound": self.initial_distance_bound,
        }


def _require_finite(vec: np.ndarray, what: str, state: np.ndarray) -> None:
    if not np.isfinite(vec).all():
        raise NumericalFailureError(f"non-finite {what} encountered", state=state)


def ula_step(
    state: np.ndarray,
    target: Target,
    h: float,
    rng: np.random.Generator,
    ledger: Optional[FlopLedger] = None,
) -> np.ndarray:
    """One unadjusted Langevin step; consumes exactly d normal variates."""
    if h <= 0:
        raise ParameterError("step size must be positive")
    _require_finite(state, "state", state)
    g = target.gradient(state)
    _require_finite(g, "gradient", state)
    out = state - h * g + math.sqrt(2.0 * h) * rng.standard_normal(target.dim)
    if ledger is not None:
        ledger.add_gradient_calls()
        ledger.add_other(ULA_STEP_COEFF * target.dim)
        ledger.count_step()
    return out


def preconditioned_ula_step(
    state: np.ndarray,
    target: Target,
    m_matrix: SpdMatrix,
    h: float,
    rng: np.random.Generator,
    ledger: Optional[FlopLedger] = None,
) -> np.ndarray:
    """One ULA step on the preconditioned target U(M^{-1/2} y).

    The state lives in the transformed coordinates y = M^{1/2} x. With
    M = I this is bit-identical to ``ula_step`` on the same RNG stream.
    """
    if h <= 0:
        raise ParameterError("step size must be positive")
    _require_finite(state, "state", state)
    ihalf = m_matrix.cached_inv_sqrt
    g = ihalf @ target.gradient(ihalf @ state)
    _require_finite(g, "gradient", state)
    out = state - h * g + math.sqrt(2.0 * h) * rng.standard_normal(target.dim)
    if ledger is not None:
        ledger.add_gradient_calls()
        ledger.add_matvec(target.dim, count=2)
        ledger.add_other(ULA_STEP_COEFF * target.dim)
        ledger.count_step()
    return out


def underdamped_coefficients(h: float, velocity_scale: float) -> dict:
    """Mean/noise coefficients of the frozen-gradient OU update with
    friction 2 over one step of length h.

    Position/velocity means:
        x' = x + c_xv * v - c_xg * g + xi_x
        v' = a * v - c_vg * g + xi_v
    with per-coordinate noise covariance
        Var(xi_x) = s_xx, Var(xi_v) = s_vv, Cov(xi_x, xi_v) = s_xv.
    """
    u = velocity_scale
    a = math.exp(-2.0 * h)
    a2 = math.exp(-4.0 * h)
    c_xv = 0.5 * (1.0 - a)
    c_vg = 0.5 * u * (1.0 - a)
    c_xg = 0.5 * u * (h - 0.5 * (1.0 - a))
    s_vv = u * (1.0 - a2)
    s_xx = u * (h - (1.0 - a) + 0.25 * (1.0 - a2))
    s_xv = u * (1.0 - a) - 0.5 * u * (1.0 - a2)
    # 2x2 Cholesky of [[s_xx, s_xv], [s_xv, s_vv]]
    l11 = math.sqrt(max(s_xx, 0.0))
    l21 = s_xv / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(s_vv - l21 * l21, 0.0))
    return {
        "a": a,
        "c_xv": c_xv,
        "c_xg": c_xg,
        "c_vg": c_vg,
        "s_xx": s_xx,
        "s_vv": s_vv,
        "s_xv": s_xv,
        "l11": l11,
        "l21": l21,
        "l22": l22,
    }


def underdamped_step(
    state: tuple[np.ndarray, np.ndarray],
    target: Target,
    h: float,
    rng: np.random.Generator,
    ledger: Optional[FlopLedger] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One unadjusted underdamped Langevin step on (position, velocity)."""
    if not 0 < h <= 1:
        raise ParameterError("underdamped step size must satisfy 0 < h <= 1")
    x, v = state
    _require_finite(x, "state", x)
    g = target.gradient(x)
    _require_finite(g, "gradient", x)
    c = underdamped_coefficients(h, 1.0 / target.L)
    z = rng.standard_normal((2, target.dim))
    noise_x = c["l11"] * z[0]
    noise_v = c["l21"] * z[0] + c["l22"] * z[1]
    x_next = x + c["c_xv"] * v - c["c_xg"] * g + noise_x
    v_next = c["a"] * v - c["c_vg"] * g + noise_v
    if ledger is not None:
        ledger.add_gradient_calls()
        ledger.add_other(UNDERDAMPED_STEP_COEFF * target.dim)
        ledger.count_step()
    return x_next, v_next


def contraction_params_ula(target: Target, h: float) -> ContractionParams:
    """ULA contraction: Gamma=1, gamma=m h, b=(33/20) kappa sqrt(d h),
    valid for h <= 2/(L+m)."""
    h_max = 2.0 / (target.L + target.m)
    if h > h_max:
        raise StepSizeTooLargeError(
            f"h={h:.6g} exceeds h_max=2/(L+m)={h_max:.6g} for the Langevin kernel"
        )
    if h <= 0:
        raise ParameterError("step size must be positive")
    return ContractionParams(
        Gamma=1.0,
        gamma=target.m * h,
        b=(33.0 / 20.0) * target.kappa * math.sqrt(target.dim * h),
        h_max=h_max,
        h=h,
    )


def underdamped_energy_constant(target: Target, initial_distance_bound: float) -> float:
    """E_K = 26 (d/m + D^2), the underdamped bias energy constant."""
    return 26.0 * (target.dim / target.m + initial_distance_bound**2)


def contraction_params_underdamped(
    target: Target, h: float, initial_distance_bound: float
) -> ContractionParams:
    """Underdamped contraction preset: Gamma=4, gamma=h/(2 kappa),
    b = 16 kappa sqrt(2 E_K / 5) h with E_K = 26 (d/m + D^2), h <= 1."""
    if h > 1.0:
        raise StepSizeTooLargeError(
            f"h={h:.6g} exceeds h_max=1 for the underdamped kernel"
        )
    if h <= 0:
        raise ParameterError("step size must be positive")
    e_k = underdamped_energy_constant(target, initial_distance_bound)
    return ContractionParams(
        Gamma=4.0,
        gamma=h / (2.0 * target.kappa),
        b=16.0 * target.kappa * math.sqrt(2.0 * e_k / 5.0) * h,
        h_max=1.0,
        h=h,
    )


def contraction_params_hmc_preset(target: Target, h: float, duration: float) -> ContractionParams:
    """Unadjusted-HMC contraction preset (no kernel is implemented; this
    exists so the generalized budget planner can be exercised on it).

    Gamma=1, gamma = m T^2 / 6, b = 1704 L^{1/4} sqrt(d kappa) h^{3/2} / (m T^2),
    valid for duration T <= 1/sqrt(8 L) and h <= T.
    """
    t_max = 1.0 / math.sqrt(8.0 * target.L)
    if duration > t_max:
        raise ParameterError(
            f"duration T={duration:.6g} exceeds 1/sqrt(8L)={t_max:.6g}"
        )
    if not 0 < h <= duration:
        raise ParameterError("need 0 < h <= T for the HMC preset")
    gamma = target.m * duration**2 / 6.0
    b = (
        1704.0
        * target.L**0.25
        * math.sqrt(target.dim * target.kappa)
        / (target.m * duration**2)
        * h**1.5
    )
    return ContractionParams(Gamma=1.0, gamma=gamma, b=b, h_max=duration, h=h)
