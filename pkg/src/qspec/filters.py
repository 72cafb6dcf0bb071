"""Gaussian spectral filter and its Fourier-dual time-sampling distribution.

For ``p(x) = exp(-x**2)`` the dual ``g~(t) = sqrt(pi) exp(-t**2 / 4)`` is real
and non-negative, so the normalisation is ``c = 2*pi``, the phase is zero and
``g(t)`` is the normal density with mean 0 and variance 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from qspec.errors import DomainError

SAMPLING_VARIANCE = 2.0
NORMALISATION = 2 * math.pi
KS_C_ALPHA_1PCT = 1.628


@dataclass(frozen=True)
class GaussianFilter:
    tau: float
    cutoff: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff T must be positive, got {self.cutoff}")

    @property
    def max_time(self) -> float:
        """Longest physical evolution time ``tau * T``."""
        return self.tau * self.cutoff

    @property
    def fwhm(self) -> float:
        return 2 * math.sqrt(math.log(2)) / self.tau

    def p(self, delta):
        return p_value(self, delta)


def p_value(f: GaussianFilter, delta):
    """Filter response ``exp(-tau**2 delta**2)`` at frequency offset ``delta``."""
    return np.exp(-((f.tau * np.asarray(delta)) ** 2))


def g_density(t):
    """Normalised sampling density ``exp(-t**2/4) / (2 sqrt(pi))``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(t**2) / 4) / (2 * math.sqrt(math.pi))


def dual_unnormalised(t):
    """``g~(t) = integral p(u) exp(iut) du`` for the Gaussian, closed form."""
    return math.sqrt(math.pi) * np.exp(-np.asarray(t, dtype=float) ** 2 / 4)


def sample_time(f: GaussianFilter | None, rng: np.random.Generator) -> float:
    """One dimensionless time drawn from ``g``; it does not depend on ``tau``."""
    return float(rng.normal(0.0, math.sqrt(SAMPLING_VARIANCE)))


def sample_times(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(SAMPLING_VARIANCE), size=size)


def truncation_bound(T: float) -> float:
    """Upper bound ``exp(-T**2/4)`` on the cutoff error of the detector."""
    if not T > 0:
        raise ValueError(f"cutoff must be positive, got {T}")
    return math.exp(-(T**2) / 4)


def cutoff_for_error(eps_T: float) -> float:
    """Smallest cutoff whose truncation bound equals ``eps_T``."""
    if not 0 < eps_T < 1:
        raise DomainError("truncation target must lie in (0, 1)")
    return 2 * math.sqrt(math.log(1 / eps_T))


@dataclass(frozen=True)
class EquivalenceReport:
    tau: float
    n_draws: int
    statistic: float
    critical_value: float
    passed: bool


def scaled_sampler_equivalence_check(
    f: GaussianFilter,
    n_draws: int,
    rng: np.random.Generator,
    reference_variance: float | None = None,
) -> EquivalenceReport:
    """Two-sample KS test of ``tau * t, t ~ g`` against the rescaled density.

    The reference sample is drawn directly from ``Pr(t, tau) = g(t/tau)/tau``,
    a normal law with variance ``2 tau**2``; ``reference_variance`` overrides
    it for negative controls.
    """
    if n_draws < 10_000:
        raise ValueError("use at least 10^4 draws")
    scaled = f.tau * sample_times(rng, n_draws)
    var = SAMPLING_VARIANCE * f.tau**2 if reference_variance is None else reference_variance
    direct = rng.normal(0.0, math.sqrt(var), size=n_draws)
    stat = stats.ks_2samp(scaled, direct).statistic
    crit = KS_C_ALPHA_1PCT * math.sqrt(2.0 / n_draws)
    return EquivalenceReport(f.tau, n_draws, float(stat), crit, bool(stat < crit))
