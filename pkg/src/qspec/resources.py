"""Filter width, cutoff and sample-count calculators for a target precision."""

from __future__ import annotations

import math
from dataclasses import dataclass

from qspec.errors import DomainError

# log numerators for the filter width: the peak-separation bound uses 20,
# the sampling-error bound states the same expression with 10
TAU_LOG_NUMERATOR_SEPARATION = 20.0
TAU_LOG_NUMERATOR_SAMPLING = 10.0


def required_tau(
    gamma: float,
    eps: float,
    weight: float,
    log_numerator: float = TAU_LOG_NUMERATOR_SEPARATION,
) -> float:
    """Filter width ``(1/(0.9 gamma)) sqrt(ln(log_numerator / (eps**2 weight)))``.

    Args:
        gamma: Lower bound on the gap between the target transition and its
            neighbours.
        eps: Target precision; must satisfy ``eps <= 0.2 * gamma``.
        weight: Coherence of the target transition, in ``(0, 1]``.
        log_numerator: 20 for the peak-separation guarantee, 10 for the
            variant quoted with the sampling bound.
    """
    if not gamma > 0:
        raise DomainError(f"gap bound must satisfy gamma > 0, got {gamma}")
    if not eps > 0:
        raise DomainError(f"precision must satisfy eps > 0, got {eps}")
    if eps > 0.2 * gamma * (1 + 1e-12):
        raise DomainError(f"precision must satisfy eps <= 0.2*gamma, got eps={eps}, gamma={gamma}")
    if not 0 < weight <= 1:
        raise DomainError(f"coherence must satisfy 0 < Gamma_j <= 1, got {weight}")
    arg = log_numerator / (eps**2 * weight)
    if arg <= 1:
        raise DomainError("log argument must exceed 1")
    return math.sqrt(math.log(arg)) / (0.9 * gamma)


def required_T(tau: float, eps: float) -> float:
    """Cutoff ``2 sqrt(2 ln(sqrt(10) / (tau eps)))`` keeping truncation below ``0.1 tau**2 eps**2``."""
    if not (tau > 0 and eps > 0):
        raise DomainError("tau and eps must be positive")
    arg = math.sqrt(10) / (tau * eps)
    if arg <= 1:
        raise DomainError(f"sqrt(10)/(tau*eps) must exceed 1, got {arg:.6g}")
    return 2 * math.sqrt(2 * math.log(arg))


def required_Ns(eps: float, weight: float, tau: float, delta_fail: float) -> int:
    """Hoeffding sample count ``ceil(200 ln(4/delta) / (eps**4 Gamma_j**2 tau**4))``."""
    if not (eps > 0 and weight > 0 and tau > 0):
        raise DomainError("eps, Gamma_j and tau must be positive")
    if not 0 < delta_fail < 1:
        raise DomainError(f"failure probability must satisfy 0 < delta < 1, got {delta_fail}")
    return math.ceil(200 * math.log(4 / delta_fail) / (eps**4 * weight**2 * tau**4))


@dataclass(frozen=True)
class ResourcePlan:
    tau: float
    cutoff: float
    n_samples: int
    tau_log_numerator: float

    @property
    def max_time(self) -> float:
        return self.tau * self.cutoff

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "T": self.cutoff,
            "n_samples": self.n_samples,
            "tau_log_numerator": self.tau_log_numerator,
        }


def plan_resources(
    gamma: float,
    eps: float,
    weight: float,
    delta_fail: float,
    log_numerator: float = TAU_LOG_NUMERATOR_SEPARATION,
) -> ResourcePlan:
    tau = required_tau(gamma, eps, weight, log_numerator)
    return ResourcePlan(
        tau=tau,
        cutoff=required_T(tau, eps),
        n_samples=required_Ns(eps, weight, tau, delta_fail),
        tau_log_numerator=log_numerator,
    )
