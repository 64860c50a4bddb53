"""Budget planners: executable burn-in / thinning / step-size / sample-size
schedules for producing approximately-IID ensembles.

The central planner ``plan_thinned`` turns a Wasserstein-2 contraction
instance (Gamma, gamma, b) into the schedule

    k_burn >= (1/gamma) log( 3 Gamma^3 W2(pi, mu0) / (eps - 3 Gamma^2 b) )
    k_thin >= (1/(2 gamma)) log( 2 Gamma^2 (3 tr(Sigma_pi) + 4 b^2)
                                 / (eps^2 - 2 b^2) )

valid whenever ``3 Gamma^2 b < eps`` and
``eps^2 <= Gamma^2 (3 tr(Sigma_pi) + 4 b^2) + 2 b^2``; the emitted
ensemble of N states is then within ``sqrt(N) eps`` of the N-fold
product of the target in W2. Wrapper planners pick the step size:

* unpreconditioned Langevin: ``h = eps^2 / (100 d kappa^2)``
* learning phase: ``h = eps^2 * (100/99^2) / (kappa^2 d)`` with eps
  derived from the certification tolerances (delta, Delta); both rules
  place the bias at exactly half the epsilon budget.
* preconditioned phase: same rule against the bracket constants
  ``((1-Delta) m_ref, (1+Delta) L_ref)``, so one schedule is valid for
  every estimate within relative error Delta of the ideal preconditioner.
* generalized: rate/bias scalings ``gamma = theta h^k1``,
  ``b = phi h^k2`` with ``h`` chosen so ``3 Gamma^2 b = eps/2``; the
  Langevin and underdamped planners are its specializations.

Every check a planner performs is recorded in the budget's provenance
with both sides evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import (
    AdmissibilityError,
    BiasDominatesError,
    EpsilonOutOfRangeError,
    InadmissibleToleranceError,
)
from .kernels import (
    ContractionParams,
    contraction_params_ula,
    contraction_params_underdamped,
    underdamped_energy_constant,
)
from .linalg import SpdMatrix
from .targets import (
    PreconditionedConstants,
    Target,
    estimated_preconditioner_bracket,
    preconditioned_constants,
)

__all__ = [
    "PreconditionerKind",
    "LearnSpec",
    "Budget",
    "InequalityCheck",
    "Provenance",
    "plan_thinned",
    "plan_ula_unpreconditioned",
    "plan_learning",
    "plan_ula_preconditioned",
    "plan_generalized",
    "plan_underdamped_unpreconditioned",
    "default_w2_init",
    "format_budget_text",
]

LEARN_STEP_COEFF = 100.0 / 99.0**2  # h_learn = coeff * eps^2 / (kappa^2 d)
SUBGAUSS_COEFF = 8.0 / 3.0  # strong log-concavity m gives psi_2 norm sqrt(8/(3m))
PROOF_EPS_COEFF = 10.0 * math.sqrt(2.0) / (3.0 * math.sqrt(3.0))


class PreconditionerKind(str, Enum):
    COVARIANCE = "covariance"
    FISHER = "fisher"


@dataclass(frozen=True)
class InequalityCheck:
    """One admissibility inequality with both sides evaluated."""

    name: str
    lhs: float
    op: str
    rhs: float
    satisfied: bool

    def render(self) -> str:
        status = "OK" if self.satisfied else "VIOLATED"
        return f"{self.name}: {self.lhs:.6g} {self.op} {self.rhs:.6g} [{status}]"


@dataclass
class Provenance:
    """Which rule produced each budget field, plus every checked inequality."""

    rules: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def check(
        self,
        name: str,
        lhs: float,
        op: str,
        rhs: float,
        error: Optional[type] = None,
        message: str = "",
        strict_ok: bool = True,
    ) -> InequalityCheck:
        ok = {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs, ">=": lhs >= rhs}[op]
        rec = InequalityCheck(name=name, lhs=lhs, op=op, rhs=rhs, satisfied=ok)
        self.checks.append(rec)
        if not ok and error is not None:
            raise error(f"{message or name}: {rec.render()}")
        return rec

    def as_dict(self) -> dict:
        return {
            "rules": dict(self.rules),
            "checks": [
                {
                    "name": c.name,
                    "lhs": c.lhs,
                    "op": c.op,
                    "rhs": c.rhs,
                    "satisfied": c.satisfied,
                }
                for c in self.checks
            ],
            "notes": list(self.notes),
            "flags": dict(self.flags),
        }


@dataclass(frozen=True)
class Budget:
    """A fully planned sampling schedule.

    ``k_burn`` and ``k_thin`` are integer ceilings of the real-valued
    lower bounds; ``k_thin`` is floored at 1. ``h`` is None for budgets
    planned from synthetic contraction parameters not tied to a kernel.
    """

    k_burn: int
    k_thin: int
    N: int
    epsilon: float
    h: Optional[float]
    contraction: ContractionParams
    provenance: Provenance

    def __post_init__(self):
        if self.k_burn < 0 or self.k_thin < 1 or self.N < 1:
            raise AdmissibilityError(
                f"invalid schedule: k_burn={self.k_burn}, k_thin={self.k_thin}, N={self.N}"
            )
        if self.epsilon <= 0 or not math.isfinite(self.epsilon):
            raise AdmissibilityError(f"epsilon must be finite and positive: {self.epsilon}")
        if self.h is not None and self.h > self.contraction.h_max:
            raise AdmissibilityError(
                f"h={self.h:.6g} exceeds the contraction h_max={self.contraction.h_max:.6g}"
            )

    @property
    def total_steps(self) -> int:
        return self.k_burn + (self.N - 1) * self.k_thin

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "k_burn": self.k_burn,
            "k_thin": self.k_thin,
            "N": self.N,
            "epsilon": self.epsilon,
            "total_steps": self.total_steps,
            "contraction": {
                "Gamma": self.contraction.Gamma,
                "gamma": self.contraction.gamma,
                "b": self.contraction.b,
                "h_max": self.contraction.h_max,
            },
            "provenance": self.provenance.as_dict(),
        }


@dataclass(frozen=True)
class LearnSpec:
    """Parameters of a preconditioner-learning phase.

    ``delta`` is the allowed failure probability, ``delta_rel`` the
    relative-error target Delta of the certification event. The
    sub-Gaussian constant (K_cov or K_Fisher) and the lower eigenvalue
    bound (beta for the covariance, alpha for the Fisher matrix) are
    derived from the target's analytic structure when not supplied.
    ``c_absolute`` is the unspecified absolute constant of the
    covariance concentration inequality; budgets depending on it are
    flagged in provenance.
    """

    delta: float
    delta_rel: float
    kind: PreconditionerKind = PreconditionerKind.COVARIANCE
    eigen_lower: Optional[float] = None
    k_constant: Optional[float] = None
    c_absolute: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InadmissibleToleranceError(f"delta must be in (0,1), got {self.delta}")
        if not 0 < self.delta_rel < 1:
            raise InadmissibleToleranceError(
                f"Delta must be in (0,1), got {self.delta_rel}"
            )
        if self.c_absolute <= 0:
            raise InadmissibleToleranceError("C must be positive")


def default_w2_init(target: Target) -> float:
    """W2(pi, mu0) for the default initialization (point mass at the mode).

    Exact for targets with analytic mean and covariance; otherwise the
    conservative trace bound is used and the caller should prefer an
    explicit value.
    """
    if target.mode is None:
        raise AdmissibilityError(
            "target has no known mode; supply w2_init explicitly"
        )
    trace = target.trace_covariance_bound()
    if target.analytic_mean is not None:
        gap = np.asarray(target.mode) - target.analytic_mean
        return math.sqrt(trace + float(gap @ gap))
    return math.sqrt(trace)


def _ceil_log(prefactor: float, arg: float) -> int:
    if arg <= 1.0:
        return 0
    return math.ceil(prefactor * math.log(arg))


def plan_thinned(
    cp: ContractionParams,
    eps: float,
    n_out: int,
    trace_sigma: float,
    w2_init: float,
    provenance: Optional[Provenance] = None,
) -> Budget:
    """Burn-in and thinning schedule for a (Gamma, gamma, b) contraction.

    Requires ``3 Gamma^2 b < eps`` (otherwise the bias alone exceeds the
    budget) and ``eps^2 <= Gamma^2 (3 tr Sigma + 4 b^2) + 2 b^2``.
    """
    if n_out < 1:
        raise AdmissibilityError("output size N must be >= 1")
    prov = provenance if provenance is not None else Provenance()
    g2b = 3.0 * cp.Gamma**2 * cp.b
    prov.check(
        "bias_floor(3*Gamma^2*b < eps)",
        g2b,
        "<",
        eps,
        error=BiasDominatesError,
        message=(
            "discretization bias dominates: decrease h or increase eps; "
            f"admissible interval is ({g2b:.6g}, sqrt(3*tr(Sigma))]"
        ),
    )
    upper = cp.Gamma**2 * (3.0 * trace_sigma + 4.0 * cp.b**2) + 2.0 * cp.b**2
    prov.check(
        "eps_sq_upper(eps^2 <= Gamma^2(3 tr + 4 b^2) + 2 b^2)",
        eps * eps,
        "<=",
        upper,
        error=EpsilonOutOfRangeError,
        message="epsilon too large for the thinning schedule",
    )

    k_burn = 0
    if w2_init > 0:
        k_burn = _ceil_log(1.0 / cp.gamma, 3.0 * cp.Gamma**3 * w2_init / (eps - g2b))
    arg_thin = (
        2.0 * cp.Gamma**2 * (3.0 * trace_sigma + 4.0 * cp.b**2) / (eps * eps - 2.0 * cp.b**2)
    )
    k_thin = max(1, _ceil_log(0.5 / cp.gamma, arg_thin))

    prov.rules.setdefault("k_burn", "burn-in bound of the thinning lemma")
    prov.rules.setdefault("k_thin", "thinning bound of the thinning lemma")
    prov.rules.setdefault("inputs", f"trace_sigma={trace_sigma:.6g}, w2_init={w2_init:.6g}")
    return Budget(
        k_burn=k_burn,
        k_thin=k_thin,
        N=n_out,
        epsilon=eps,
        h=cp.h,
        contraction=cp,
        provenance=prov,
    )


def plan_ula_unpreconditioned(
    target: Target,
    eps: float,
    n_out: int,
    w2_init: Optional[float] = None,
) -> Budget:
    """Schedule for the unpreconditioned Langevin kernel.

    Chooses ``h = eps^2 / (100 d kappa^2)``, which puts the bias at
    ``3 b = 0.495 eps``; admissible for
    ``eps <= min(10 kappa sqrt(d/L), sqrt(3 tr Sigma))``.
    """
    prov = Provenance()
    d, kappa = target.dim, target.kappa
    trace_sigma = target.trace_covariance_bound()
    bound_h = 10.0 * kappa * math.sqrt(d / target.L)
    bound_tr = math.sqrt(3.0 * trace_sigma)
    prov.check(
        "eps_step_bound(eps <= 10*kappa*sqrt(d/L))",
        eps,
        "<=",
        bound_h,
        error=EpsilonOutOfRangeError,
        message=f"epsilon out of range; bounds are {bound_h:.6g} and {bound_tr:.6g}",
    )
    prov.check(
        "eps_trace_bound(eps <= sqrt(3*tr(Sigma)))",
        eps,
        "<=",
        bound_tr,
        error=EpsilonOutOfRangeError,
        message=f"epsilon out of range; bounds are {bound_h:.6g} and {bound_tr:.6g}",
    )
    h = eps * eps / (100.0 * d * kappa * kappa)
    cp = contraction_params_ula(target, h)
    prov.rules["h"] = "unpreconditioned Langevin step rule eps^2/(100 d kappa^2)"
    if w2_init is None:
        w2_init = default_w2_init(target)
    return plan_thinned(cp, eps, n_out, trace_sigma, w2_init, provenance=prov)


def _covariance_learn_constants(
    target: Target, spec: LearnSpec
) -> tuple[float, float]:
    """(eigen_lower beta, sub-Gaussian constant K) for covariance learning."""
    beta = spec.eigen_lower
    if beta is None:
        if target.analytic_covariance is not None:
            beta = float(target.analytic_covariance.eigenvalues[0])
        else:
            beta = 1.0 / target.L  # Sigma_pi >= L^{-1} I under L-smoothness
    k_const = spec.k_constant
    if k_const is None:
        if target.analytic_covariance is None:
            raise InadmissibleToleranceError(
                "covariance learning needs K_cov: supply k_constant or an "
                "analytic covariance"
            )
        c = preconditioned_constants(target, target.analytic_covariance.inverse())
        k_const = math.sqrt(SUBGAUSS_COEFF / c.m)
    return beta, k_const


def _fisher_learn_constants(target: Target, spec: LearnSpec) -> tuple[float, float]:
    """(eigen_lower alpha, sub-Gaussian constant K) for Fisher learning."""
    alpha = spec.eigen_lower
    if alpha is None:
        if target.analytic_fisher is not None:
            alpha = float(target.analytic_fisher.eigenvalues[0])
        else:
            alpha = target.m  # F >= m I for m-strongly-convex potentials
    k_const = spec.k_constant
    if k_const is None:
        if target.analytic_fisher is None:
            raise InadmissibleToleranceError(
                "Fisher learning needs K_Fisher: supply k_constant or an "
                "analytic Fisher matrix"
            )
        c = preconditioned_constants(target, target.analytic_fisher)
        k_const = math.sqrt(SUBGAUSS_COEFF * c.L)
    return alpha, k_const


def plan_learning(
    target: Target,
    spec: LearnSpec,
    cp_provider: Optional[Callable[[float], ContractionParams]] = None,
) -> Budget:
    """Schedule for phase 1 of the preconditioned sampler: collect an
    ensemble good enough that the empirical covariance (or Fisher
    matrix) certifies at relative error Delta with probability 1-delta.

    Sets the phase accuracy ``eps = (sqrt(2)/120) (delta Delta / sqrt(d))
    sqrt(beta)`` (covariance) or ``(3/8) (delta Delta / (L sqrt(d)))
    sqrt(alpha)`` (Fisher), the step ``h = (100/99^2) eps^2 / (kappa^2 d)``
    (bias exactly eps/6), and the sample size from the sub-Gaussian
    concentration bound.
    """
    prov = Provenance()
    d = target.dim
    dd = spec.delta * spec.delta_rel
    trace_sigma = target.trace_covariance_bound()

    if spec.kind is PreconditionerKind.COVARIANCE:
        beta, k_const = _covariance_learn_constants(target, spec)
        eps = math.sqrt(2.0) / 120.0 * dd / math.sqrt(d) * math.sqrt(beta)
        prov.rules["epsilon"] = "covariance learning rule (sqrt2/120) dD sqrt(beta/d)"
    else:
        alpha, k_const = _fisher_learn_constants(target, spec)
        eps = 3.0 / 8.0 * dd / (target.L * math.sqrt(d)) * math.sqrt(alpha)
        prov.rules["epsilon"] = "Fisher learning rule (3/8) dD sqrt(alpha)/(L sqrt(d))"

    h = LEARN_STEP_COEFF * eps * eps / (target.kappa**2 * d)
    prov.rules["h"] = "learning-phase step rule (100/99^2) eps^2/(kappa^2 d)"
    cp = cp_provider(h) if cp_provider is not None else contraction_params_ula(target, h)

    # tolerance admissibility, checked after h (hence b) is fixed
    if spec.kind is PreconditionerKind.COVARIANCE:
        lower = 360.0 * cp.Gamma**2 * cp.b * math.sqrt(d) / math.sqrt(beta)
        upper = 120.0 * cp.Gamma * math.sqrt(trace_sigma * d) / math.sqrt(beta)
    else:
        lower = 8.0 * cp.Gamma**2 * cp.b * target.L * math.sqrt(d) / math.sqrt(alpha)
        upper = (
            8.0 / 3.0 * cp.Gamma * target.L * math.sqrt(3.0 * trace_sigma * d) / math.sqrt(alpha)
        )
    prov.check(
        "tolerance_floor(bias term < delta*Delta)",
        lower,
        "<",
        dd,
        error=InadmissibleToleranceError,
        message=f"delta*Delta inadmissible; interval is ({lower:.6g}, {upper:.6g}]",
    )
    prov.check(
        "tolerance_ceiling(delta*Delta <= trace term)",
        dd,
        "<=",
        upper,
        error=InadmissibleToleranceError,
        message=f"delta*Delta inadmissible; interval is ({lower:.6g}, {upper:.6g}]",
    )

    c, dr = spec.c_absolute, spec.delta_rel
    n_conc = (
        2.0
        * c
        * k_const**2
        * (d + math.log(4.0 / spec.delta))
        * math.sqrt(c * k_const**2 + 2.0 * dr)
        / dr
    )
    if spec.kind is PreconditionerKind.COVARIANCE:
        n_mean = 5.0 * d / dd
        n_learn = math.ceil(max(n_mean, n_conc))
        prov.flags["depends_on_absolute_constant_C"] = n_conc >= n_mean
        prov.rules["N"] = "max(5d/(delta Delta), concentration sample size)"
    else:
        n_learn = math.ceil(n_conc)
        prov.flags["depends_on_absolute_constant_C"] = True
        prov.rules["N"] = "Fisher concentration sample size"
    prov.rules["K_constant"] = f"{k_const:.6g}"

    w2_init = default_w2_init(target)
    return plan_thinned(cp, eps, n_learn, trace_sigma, w2_init, provenance=prov)


def plan_ula_preconditioned(
    target: Target,
    m_hat: Optional[SpdMatrix],
    delta_rel: float,
    eps: float,
    n_out: int,
    kind: PreconditionerKind = PreconditionerKind.COVARIANCE,
    c_ref: Optional[PreconditionedConstants] = None,
    w2_init: Optional[float] = None,
) -> Budget:
    """Schedule for phase 2 of the preconditioned sampler.

    Planned against the bracket constants ``((1-Delta) m_ref,
    (1+Delta) L_ref)`` around the ideal preconditioner, so the schedule
    is valid for any certified estimate within relative error Delta.
    ``m_hat`` is recorded for provenance only; the schedule must not
    depend on the realized estimate.
    """
    prov = Provenance()
    d = target.dim
    if c_ref is None:
        if kind is PreconditionerKind.COVARIANCE:
            if target.analytic_covariance is None:
                raise InadmissibleToleranceError(
                    "preconditioned planning needs reference constants: supply c_ref"
                )
            ideal = target.analytic_covariance.inverse()
        else:
            if target.analytic_fisher is None:
                raise InadmissibleToleranceError(
                    "preconditioned planning needs reference constants: supply c_ref"
                )
            ideal = target.analytic_fisher
        c_ref = preconditioned_constants(target, ideal)
    bracket = estimated_preconditioner_bracket(delta_rel, c_ref)

    proof_bound = PROOF_EPS_COEFF * c_ref.kappa * math.sqrt(d / c_ref.L)
    cap = math.sqrt(2.0 * d) if kind is PreconditionerKind.COVARIANCE else math.sqrt(1.5 * d)
    prov.check(
        "eps_step_bound(proof constant 10*sqrt(2)/(3*sqrt(3)))",
        eps,
        "<=",
        proof_bound,
        error=EpsilonOutOfRangeError,
        message=f"epsilon out of range; bounds are {proof_bound:.6g} and {cap:.6g}",
    )
    prov.notes.append(
        "theorem-statement epsilon bound would be "
        f"{2.0 * c_ref.kappa * math.sqrt(d / c_ref.L):.6g} "
        "(2 kappa sqrt(d/L)); the proof-side constant is enforced"
    )
    prov.check(
        "eps_dimension_cap",
        eps,
        "<=",
        cap,
        error=EpsilonOutOfRangeError,
        message=f"epsilon out of range; bounds are {proof_bound:.6g} and {cap:.6g}",
    )

    if kind is PreconditionerKind.COVARIANCE:
        trace_lo, trace_hi = d / (1.0 + delta_rel), d / (1.0 - delta_rel)
    else:
        trace_lo, trace_hi = (1.0 - delta_rel) * d, (1.0 + delta_rel) * d
    prov.check(
        "eps_trace_bound(eps <= sqrt(3*tr lower bound))",
        eps,
        "<=",
        math.sqrt(3.0 * trace_lo),
        error=EpsilonOutOfRangeError,
        message="epsilon too large for the preconditioned target's trace bound",
    )

    kappa_br = bracket.kappa
    h = eps * eps / (100.0 * d * kappa_br**2)
    h_max = 2.0 / ((1.0 + delta_rel) * (c_ref.L + c_ref.m))
    prov.check(
        "h_bracket_validity(h <= 2/((1+Delta)(L_ref+m_ref)))",
        h,
        "<=",
        h_max,
        error=EpsilonOutOfRangeError,
        message="preconditioned step size exceeds the bracket-safe maximum",
    )
    cp = ContractionParams(
        Gamma=1.0,
        gamma=bracket.m * h,
        b=(33.0 / 20.0) * kappa_br * math.sqrt(d * h),
        h_max=h_max,
        h=h,
    )
    prov.rules["h"] = "preconditioned Langevin step rule against bracket constants"
    prov.rules["constants"] = (
        f"bracket m={bracket.m:.6g}, L={bracket.L:.6g}, kappa={kappa_br:.6g} "
        f"from reference (m={c_ref.m:.6g}, L={c_ref.L:.6g}) at Delta={delta_rel:.6g}"
    )
    if m_hat is not None:
        prov.notes.append(f"planned for certified estimate of dim {m_hat.dim}")
    if w2_init is None:
        w2_init = math.sqrt(trace_hi)
        prov.rules["w2_init"] = "sqrt(upper trace bound) for point-mass start at the mode"
    return plan_thinned(cp, eps, n_out, trace_hi, w2_init, provenance=prov)


def plan_generalized(
    theta: float,
    k1: float,
    phi: float,
    k2: float,
    h0: float,
    eps: float,
    n_out: int,
    trace_sigma: float,
    w2_init: float,
    Gamma: float,
) -> Budget:
    """Schedule for any kernel whose contraction scales as
    ``gamma = theta h^k1`` and ``b = phi h^k2`` for ``h <= h0``.

    The step size is chosen so that ``3 Gamma^2 b = eps / 2``, i.e.
    ``h = (eps / (6 Gamma^2 phi))^{1/k2}``; the requirement ``h <= h0``
    is then exactly ``eps <= 6 Gamma^2 phi h0^k2`` (the conservative
    form ``eps <= 2 phi h0^k2`` is recorded alongside). Specializes to
    the Langevin planner at (k1, k2) = (1, 1/2) and the underdamped
    preset at (1, 1).
    """
    if min(theta, phi, k1, k2, h0) <= 0:
        raise AdmissibilityError("theta, phi, k1, k2, h0 must all be positive")
    if Gamma < 1:
        raise AdmissibilityError("Gamma must be >= 1")
    prov = Provenance()
    step_cap = 6.0 * Gamma**2 * phi * h0**k2
    prov.check(
        "eps_step_bound(eps <= 6*Gamma^2*phi*h0^k2, i.e. h <= h0)",
        eps,
        "<=",
        step_cap,
        error=EpsilonOutOfRangeError,
        message="epsilon out of range for the generalized schedule",
    )
    prov.check(
        "eps_conservative_bound(eps <= 2*phi*h0^k2, stated form)",
        eps,
        "<=",
        2.0 * phi * h0**k2,
        error=None,
        strict_ok=False,
    )
    prov.check(
        "eps_trace_bound(eps <= sqrt(3*tr(Sigma)))",
        eps,
        "<=",
        math.sqrt(3.0 * trace_sigma),
        error=EpsilonOutOfRangeError,
        message="epsilon out of range for the generalized schedule",
    )

    h = (eps / (6.0 * Gamma**2 * phi)) ** (1.0 / k2)
    gamma = theta * h**k1
    b = phi * h**k2
    prefactor = (6.0 * Gamma**2 * phi / eps) ** (k1 / k2) / theta  # == 1/gamma
    k_burn = 0
    if w2_init > 0:
        k_burn = _ceil_log(prefactor, 6.0 * Gamma**3 * w2_init / eps)
    g4 = Gamma**4
    arg_thin = 4.0 * Gamma**6 * (27.0 * g4 * trace_sigma + eps * eps) / (
        (18.0 * g4 - 1.0) * eps * eps
    )
    k_thin = max(1, _ceil_log(0.5 * prefactor, arg_thin))
    prov.rules["h"] = "generalized rule (eps/(6 Gamma^2 phi))^{1/k2}, bias = eps/2"
    prov.rules["k_burn"] = "generalized burn-in bound"
    prov.rules["k_thin"] = "generalized thinning bound"
    cp = ContractionParams(Gamma=Gamma, gamma=gamma, b=b, h_max=h0, h=h)
    return Budget(
        k_burn=k_burn,
        k_thin=k_thin,
        N=n_out,
        epsilon=eps,
        h=h,
        contraction=cp,
        provenance=prov,
    )


def plan_underdamped_unpreconditioned(
    target: Target,
    eps: float,
    n_out: int,
    initial_distance_bound: float = 0.0,
    w2_init: Optional[float] = None,
) -> Budget:
    """Schedule for the unadjusted underdamped Langevin kernel, as the
    (theta, k1, phi, k2) = (1/(2 kappa), 1, 16 kappa sqrt(2 E_K/5), 1)
    specialization of the generalized planner; admissible for
    ``eps <= min(1536 kappa sqrt(2 E_K / 5), sqrt(3 tr Sigma))``.
    """
    e_k = underdamped_energy_constant(target, initial_distance_bound)
    phi = 16.0 * target.kappa * math.sqrt(2.0 * e_k / 5.0)
    trace_sigma = target.trace_covariance_bound()
    if w2_init is None:
        w2_init = default_w2_init(target)
    budget = plan_generalized(
        theta=1.0 / (2.0 * target.kappa),
        k1=1.0,
        phi=phi,
        k2=1.0,
        h0=1.0,
        eps=eps,
        n_out=n_out,
        trace_sigma=trace_sigma,
        w2_init=w2_init,
        Gamma=4.0,
    )
    budget.provenance.rules["kernel"] = (
        f"underdamped preset with E_K={e_k:.6g} (D={initial_distance_bound:.6g})"
    )
    # consistency with the direct parametrization at the chosen h
    cp = contraction_params_underdamped(target, budget.h, initial_distance_bound)
    assert abs(cp.b - budget.contraction.b) <= 1e-12 * max(1.0, cp.b)
    return budget


def format_budget_text(budget: Budget, title: str = "budget") -> str:
    """Human-readable report: every field plus every checked inequality."""
    lines = [f"# {title}"]
    h_str = f"{budget.h:.12g}" if budget.h is not None else "-"
    cp = budget.contraction
    lines += [
        f"h: {h_str}",
        f"k_burn: {budget.k_burn}",
        f"k_thin: {budget.k_thin}",
        f"N: {budget.N}",
        f"epsilon: {budget.epsilon:.12g}",
        f"total_kernel_steps: {budget.total_steps}",
        f"contraction: Gamma={cp.Gamma:.6g} gamma={cp.gamma:.6g} b={cp.b:.6g} h_max={cp.h_max:.6g}",
        "checks:",
    ]
    lines += [f"  {c.render()}" for c in budget.provenance.checks]
    if budget.provenance.rules:
        lines.append("rules:")
        lines += [f"  {k}: {v}" for k, v in sorted(budget.provenance.rules.items())]
    if budget.provenance.notes:
        lines.append("notes:")
        lines += [f"  {n}" for n in budget.provenance.notes]
    if budget.provenance.flags:
        lines.append("flags:")
        lines += [f"  {k}: {v}" for k, v in sorted(budget.provenance.flags.items())]
    return "\n".join(lines) + "\n"
