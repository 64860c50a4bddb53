"""Central numeric policy: every tolerance used by the toolkit in one record.

All construction-time checks and test tolerances read from a
:class:`NumericPolicy`. Callers may pass a modified policy to any
constructor or planner that accepts one; the module-level ``DEFAULT``
is used otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances for matrix validation and verification checks.

    Attributes
    ----------
    symmetry_rtol : float
        Max allowed relative asymmetry ``|A[i,j] - A[j,i]|`` against
        ``max(1, |A[i,j]|)``.
    pd_rel_floor : float
        Matrices with ``lambda_min <= pd_rel_floor * lambda_max`` are
        rejected as numerically singular.
    sqrt_rtol : float
        Max relative Frobenius error of ``sqrt(A) @ sqrt(A) - A``.
    estimate_rel_floor : float
        Degeneracy floor for empirical covariance / Fisher estimates
        (looser than ``pd_rel_floor``; estimates get inverted downstream).
    coupling_moment_rtol : float
        Max relative error when checking that an optimal coupling map
        pushes one Gaussian law onto another.
    verify_slack : float
        Absolute numerical slack added to exact-oracle inequalities
        (guards eigendecomposition round-off only).
    gradient_fd_rtol : float
        Max relative error between analytic gradients and central finite
        differences.
    """

    symmetry_rtol: float = 1e-12
    pd_rel_floor: float = 1e-12
    sqrt_rtol: float = 1e-10
    estimate_rel_floor: float = 1e-10
    coupling_moment_rtol: float = 1e-9
    verify_slack: float = 1e-8
    gradient_fd_rtol: float = 1e-5

    def with_overrides(self, **kwargs: float) -> "NumericPolicy":
        return replace(self, **kwargs)


DEFAULT = NumericPolicy()
