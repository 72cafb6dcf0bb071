"""Exact-diagonalization oracle: coherence tables and the exact spectral detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import wofz

from qspec.errors import DomainError, ResourceCapError
from qspec.evolution import EDResult
from qspec.filters import GaussianFilter
from qspec.operators import PauliSum
from qspec.resources import required_tau

DEFAULT_COHERENCE_FLOOR = 1e-10
DEFAULT_DEGENERACY_TOL = 1e-9
COHERENCE_QUBIT_CAP = 11


@dataclass(frozen=True)
class CoherenceTable:
    """Transition energies ``E_n' - E_n`` with coherences ``rho^{n'n} <n|O|n'>``.

    Entry arrays are aligned: ``n_prime[k], n[k], delta[k], gamma[k]``. The
    derived view merges transitions closer than ``degeneracy_tol`` into
    sorted distinct energies with summed (complex) weights.
    """

    n_prime: np.ndarray
    n: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL

    @classmethod
    def from_transitions(cls, deltas, weights, degeneracy_tol: float = DEFAULT_DEGENERACY_TOL):
        deltas = np.asarray(deltas, dtype=float)
        idx = np.arange(deltas.size)
        return cls(
            n_prime=idx + 1,
            n=np.zeros_like(idx),
            delta=deltas,
            gamma=np.asarray(weights, dtype=complex),
            degeneracy_tol=degeneracy_tol,
        )

    def __len__(self) -> int:
        return self.delta.size

    @property
    def total(self) -> complex:
        return complex(self.gamma.sum())

    @cached_property
    def _merged(self) -> tuple[np.ndarray, np.ndarray]:
        if self.delta.size == 0:
            return np.empty(0), np.empty(0, dtype=complex)
        order = np.argsort(self.delta, kind="stable")
        d = self.delta[order]
        g = self.gamma[order]
        new_group = np.concatenate([[True], np.diff(d) > self.degeneracy_tol])
        labels = np.cumsum(new_group) - 1
        n_groups = labels[-1] + 1
        counts = np.bincount(labels, minlength=n_groups)
        energies = np.bincount(labels, weights=d, minlength=n_groups) / counts
        weights = np.bincount(labels, weights=g.real, minlength=n_groups) + 1j * np.bincount(
            labels, weights=g.imag, minlength=n_groups
        )
        return energies, weights

    @property
    def transitions(self) -> np.ndarray:
        return self._merged[0]

    @property
    def weights(self) -> np.ndarray:
        return self._merged[1]

    @property
    def real_weights(self) -> np.ndarray:
        return self.weights.real

    @cached_property
    def gaps(self) -> np.ndarray:
        """Distance of each distinct transition to its nearest neighbour."""
        d = self.transitions
        if d.size == 1:
            return np.array([math.inf])
        diffs = np.diff(d)
        left = np.concatenate([[math.inf], diffs])
        right = np.concatenate([diffs, [math.inf]])
        return np.minimum(left, right)

    def significant(self, threshold: float, positive_only: bool = False) -> np.ndarray:
        """Indices of merged transitions with ``|weight| >= threshold``."""
        keep = np.abs(self.weights) >= threshold
        if positive_only:
            keep &= self.transitions > 0
        return np.flatnonzero(keep)

    def rows(self):
        for k in range(len(self)):
            yield int(self.n_prime[k]), int(self.n[k]), float(self.delta[k]), complex(self.gamma[k])


def coherence_table(
    ed: EDResult,
    psi0: np.ndarray,
    O: PauliSum,
    floor: float = DEFAULT_COHERENCE_FLOOR,
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
    qubit_cap: int = COHERENCE_QUBIT_CAP,
) -> CoherenceTable:
    if O.dim != ed.dim or np.shape(psi0) != (ed.dim,):
        raise ValueError("state, observable and Hamiltonian dimensions differ")
    if O.n_qubits > qubit_cap:
        raise ResourceCapError(f"coherence table limited to {qubit_cap} qubits")
    vecs = ed.eigenvectors
    amps = ed.coefficients(np.asarray(psi0, dtype=complex))
    o_eig = vecs.conj().T @ O.apply(vecs)
    # gamma[n', n] = a_n' conj(a_n) <n|O|n'>
    gam = np.outer(amps, amps.conj()) * o_eig.T
    energies = ed.eigenvalues
    n_prime, n = np.nonzero(np.abs(gam) >= floor)
    return CoherenceTable(
        n_prime=n_prime,
        n=n,
        delta=energies[n_prime] - energies[n],
        gamma=gam[n_prime, n],
        degeneracy_tol=degeneracy_tol,
    )


def exact_G(ct: CoherenceTable, f: GaussianFilter, omega):
    """Detector ``sum Gamma p(tau (Delta - omega))`` on scalar or array ``omega``.

    Complex in general; its real part is the familiar symmetric detector and
    the imaginary part carries observables with imaginary matrix elements.
    """
    omega = np.asarray(omega, dtype=float)
    s = f.tau * (ct.transitions[None, :] - omega.reshape(-1, 1))
    out = np.exp(-(s**2)) @ ct.weights
    return out.reshape(omega.shape) if omega.ndim else complex(out[0])


def truncated_kernel(s, T: float):
    """``integral_{-T}^{T} g(t) exp(i s t) dt`` for the Gaussian sampling density.

    Uses ``e^{-s^2} - e^{-T^2/4} Re[e^{-iTs} w(-s + iT/2)]`` with the
    Faddeeva function ``w``, which stays finite for large ``|s|``.
    """
    s = np.asarray(s, dtype=float)
    tail = np.exp(-(T**2) / 4) * np.real(np.exp(-1j * T * s) * wofz(-s + 0.5j * T))
    return np.exp(-(s**2)) - tail


def truncated_G(ct: CoherenceTable, f: GaussianFilter, omega):
    """Expectation of the cutoff estimator: ``integral_{-T}^{T} G(tau t) g(t) e^{i tau omega t} dt``."""
    omega = np.asarray(omega, dtype=float)
    s = f.tau * (omega.reshape(-1, 1) - ct.transitions[None, :])
    out = truncated_kernel(s, f.cutoff) @ ct.weights
    return out.reshape(omega.shape) if omega.ndim else complex(out[0])


@dataclass(frozen=True)
class Lemma1Report:
    index: int
    tau: float
    eps: float
    gamma: float
    weight: float
    near_max_deficit: float
    near_bound: float
    far_min_deficit: float
    far_bound: float
    n_points: int

    @property
    def near_ok(self) -> bool:
        return self.near_max_deficit <= self.near_bound

    @property
    def far_ok(self) -> bool:
        return self.far_min_deficit >= self.far_bound

    @property
    def passed(self) -> bool:
        return self.near_ok and self.far_ok


def lemma1_check(
    ct: CoherenceTable,
    j: int,
    eps: float,
    gamma: float | None = None,
    scan_step: float | None = None,
) -> Lemma1Report:
    """Scan the detector around transition ``j`` and test both separation inequalities.

    The weight is phase-aligned first (a negative or imaginary ``Gamma_j`` is
    rotated onto the positive real axis together with the whole detector).
    ``gamma`` is the gap lower bound used for ``tau`` and the far window; it
    defaults to the actual gap of transition ``j`` and may not exceed it.
    """
    weights = ct.weights
    if not 0 <= j < weights.size:
        raise IndexError(f"transition index {j} out of range")
    w_j = weights[j]
    weight = abs(w_j)
    if weight == 0:
        raise DomainError("target transition has zero coherence")
    actual_gap = float(ct.gaps[j])
    if gamma is None:
        if not math.isfinite(actual_gap):
            raise DomainError("isolated transition: pass an explicit gap bound gamma")
        gamma = actual_gap
    if gamma > actual_gap * (1 + 1e-12):
        raise DomainError(
            f"gap bound gamma={gamma} exceeds the actual gap {actual_gap} of transition {j}"
        )
    tau = required_tau(gamma, eps, weight)
    step = eps / 20 if scan_step is None else min(scan_step, eps / 20)
    phase = np.conj(w_j) / weight
    center = ct.transitions[j]
    f = GaussianFilter(tau=tau, cutoff=1.0)

    def deficit(offsets: np.ndarray) -> np.ndarray:
        g = exact_G(ct, f, center + offsets)
        return weight - np.real(phase * g)

    n_near = int(math.ceil(eps / step))
    near = np.linspace(-0.5 * eps, 0.5 * eps, n_near + 1)
    far_one = np.arange(eps + step, 0.1 * gamma, step)
    far = np.concatenate([-far_one[::-1], far_one])
    scale = tau**2 * eps**2 * weight
    d_near = deficit(near)
    d_far = deficit(far) if far.size else np.array([math.inf])
    return Lemma1Report(
        index=j,
        tau=tau,
        eps=eps,
        gamma=gamma,
        weight=weight,
        near_max_deficit=float(d_near.max()),
        near_bound=0.3 * scale,
        far_min_deficit=float(d_far.min()),
        far_bound=0.8 * scale,
        n_points=near.size + far.size,
    )
