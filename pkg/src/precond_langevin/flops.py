"""FLOP accounting: the ledger and the cost conventions it is fed with.

Conventions (one FLOP per scalar add or multiply; RNG draws are free):

* matrix-vector product with a dense d x d matrix: ``2 d^2``
* gradient call: ``G`` FLOPs, declared per target (``2 d^2`` for shipped
  Gaussian targets, whose gradient is one precision matvec)
* plain Langevin step: ``G + 4 d`` (scale gradient, subtract, scale
  noise, add noise)
* preconditioned Langevin step: ``G + 4 d + 4 d^2`` (two extra matvecs)
* underdamped Langevin step: ``G + 14 d`` (position/velocity updates
  plus the 2x2 noise-correlation transform per coordinate)
* one-time symmetric factorization (Cholesky or eigh-based root):
  ``d^3 / 3``

The same closed-form counters drive both the runtime ledgers and the
planner forecasts, so planned and executed totals agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ULA_STEP_COEFF = 4
UNDERDAMPED_STEP_COEFF = 14
MATVEC_FLOPS_PER_STEP = 2  # matvecs per preconditioned step


def matvec_flops(d: int) -> int:
    return 2 * d * d


def factorization_flops(d: int) -> int:
    return d * d * d // 3


def covariance_estimate_flops(n: int, d: int) -> int:
    """Mean, centering, and accumulation of n centered outer products."""
    return n * d + n * d + 2 * n * d * d + d * d


def fisher_estimate_flops(n: int, d: int) -> int:
    """Accumulation of n score outer products (gradient calls billed separately)."""
    return 2 * n * d * d + d * d


@dataclass
class FlopLedger:
    """Running tally of floating-point work, split by kind.

    ``gradient_cost`` is the per-call cost G of the target's gradient;
    gradient work is tallied as a call count so totals stay exact
    integers. The tally is monotone non-decreasing.
    """

    gradient_cost: int
    gradient_calls: int = 0
    matvec_flops: int = 0
    factorization_flops: int = 0
    other_flops: int = 0
    kernel_steps: int = 0

    def add_gradient_calls(self, n: int = 1) -> None:
        self.gradient_calls += n

    def add_matvec(self, d: int, count: int = 1) -> None:
        self.matvec_flops += count * matvec_flops(d)

    def add_factorization(self, d: int) -> None:
        self.factorization_flops += factorization_flops(d)

    def add_other(self, flops: int) -> None:
        self.other_flops += flops

    def count_step(self, n: int = 1) -> None:
        self.kernel_steps += n

    def total(self) -> int:
        return (
            self.gradient_calls * self.gradient_cost
            + self.matvec_flops
            + self.factorization_flops
            + self.other_flops
        )

    def merge(self, other: "FlopLedger") -> "FlopLedger":
        if other.gradient_cost != self.gradient_cost:
            raise ValueError("cannot merge ledgers with different gradient costs")
        return FlopLedger(
            gradient_cost=self.gradient_cost,
            gradient_calls=self.gradient_calls + other.gradient_calls,
            matvec_flops=self.matvec_flops + other.matvec_flops,
            factorization_flops=self.factorization_flops + other.factorization_flops,
            other_flops=self.other_flops + other.other_flops,
            kernel_steps=self.kernel_steps + other.kernel_steps,
        )

    def as_dict(self) -> dict:
        return {
            "gradient_calls": self.gradient_calls,
            "gradient_cost": self.gradient_cost,
            "matvec_flops": self.matvec_flops,
            "factorization_flops": self.factorization_flops,
            "other_flops": self.other_flops,
            "kernel_steps": self.kernel_steps,
            "total": self.total(),
        }


def ula_step_flops(d: int, gradient_cost: int) -> int:
    return gradient_cost + ULA_STEP_COEFF * d


def preconditioned_step_flops(d: int, gradient_cost: int) -> int:
    return gradient_cost + ULA_STEP_COEFF * d + MATVEC_FLOPS_PER_STEP * matvec_flops(d)


def underdamped_step_flops(d: int, gradient_cost: int) -> int:
    return gradient_cost + UNDERDAMPED_STEP_COEFF * d
