"""Exact and Trotterised time evolution, expectations and shot sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from qspec.errors import ResourceCapError
from qspec.operators import PauliSum

DEFAULT_QUBIT_CAP = 14


@dataclass(frozen=True)
class EigenBlock:
    """Eigendecomposition of ``H`` restricted to an invariant set of basis states."""

    indices: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class EDResult:
    """Full spectrum of a Hamiltonian.

    The decomposition is stored per invariant block of computational-basis
    states (connected components of the Hamiltonian's sparsity graph), which
    keeps conserved-quantity sectors separate without the caller naming them.
    ``eigenvalues`` and ``eigenvectors`` present the usual global view,
    ordered by ascending energy.
    """

    def __init__(self, dim: int, blocks: Sequence[EigenBlock]) -> None:
        self.dim = dim
        self.blocks = tuple(blocks)
        energies = np.concatenate([b.eigenvalues for b in self.blocks])
        self._order = np.argsort(energies, kind="stable")
        self.eigenvalues = energies[self._order]

    @cached_property
    def eigenvectors(self) -> np.ndarray:
        cols = []
        for b in self.blocks:
            full = np.zeros((self.dim, len(b.eigenvalues)), dtype=b.eigenvectors.dtype)
            full[b.indices, :] = b.eigenvectors
            cols.append(full)
        return np.concatenate(cols, axis=1)[:, self._order]

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        """Amplitudes ``<n|psi>`` in ascending-energy order."""
        parts = [b.eigenvectors.conj().T @ psi[b.indices] for b in self.blocks]
        return np.concatenate(parts)[self._order]

    def evolve_many(self, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """States ``exp(-iHt) psi0`` as columns of a ``(dim, len(times))`` array."""
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.shape != (self.dim,):
            raise ValueError(f"state dimension {psi0.shape} does not match {self.dim}")
        times = np.asarray(times, dtype=float)
        out = np.zeros((self.dim, times.size), dtype=complex)
        for b in self.blocks:
            vecs = b.eigenvectors
            amp = vecs.conj().T @ psi0[b.indices]
            if not np.any(amp):
                continue
            coef = amp[:, None] * np.exp(-1j * np.outer(b.eigenvalues, times))
            if np.isrealobj(vecs):
                # contiguous copies keep the products on the BLAS path
                re = vecs @ np.ascontiguousarray(coef.real)
                im = vecs @ np.ascontiguousarray(coef.imag)
                out[b.indices, :] = re + 1j * im
            else:
                out[b.indices, :] = vecs @ coef
        return out


def diagonalize(H: PauliSum, qubit_cap: int = DEFAULT_QUBIT_CAP) -> EDResult:
    if H.n_qubits > qubit_cap:
        raise ResourceCapError(
            f"{H.n_qubits} qubits exceeds the exact-diagonalization cap of {qubit_cap}"
        )
    mat = H.to_sparse()
    real = not np.any(mat.imag.data)
    if real:
        mat = mat.real
    n_comp, labels = connected_components(abs(mat) + abs(mat.T), directed=False)
    blocks = []
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        sub = mat[idx][:, idx].toarray()
        evals, evecs = scipy.linalg.eigh(sub)
        blocks.append(EigenBlock(indices=idx, eigenvalues=evals, eigenvectors=evecs))
    return EDResult(H.dim, blocks)


def exact_evolve(ed: EDResult, psi0: np.ndarray, t: float) -> np.ndarray:
    return ed.evolve_many(psi0, np.array([t]))[:, 0]


def expectation(psi: np.ndarray, O: PauliSum) -> float:
    """``<psi|O|psi>`` with the imaginary roundoff discarded."""
    psi = np.asarray(psi)
    if psi.shape[0] != O.dim:
        raise ValueError(f"state dimension {psi.shape[0]} does not match observable {O.dim}")
    val = np.vdot(psi, O.apply(psi))
    if abs(val.imag) > 1e-10 * max(1.0, O.one_norm):
        raise ValueError("observable expectation has an imaginary part; is O Hermitian?")
    return float(val.real)


def sample_expectation(
    psi: np.ndarray | float, P: str, shots: int, rng: np.random.Generator
) -> float:
    """Finite-shot estimate of a single Pauli string's expectation.

    ``psi`` may be a statevector or an already computed expectation value.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if set(P) == {"I"}:
        raise ValueError("identity string has no +-1 measurement outcomes to sample")
    if np.ndim(psi) == 0:
        mean = float(psi)
    else:
        mean = expectation(psi, PauliSum.single(P))
    return float(sample_pauli_means(np.array([mean]), shots, rng)[0])


def sample_pauli_means(means: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised binomial shot model for +-1 valued observables."""
    p_plus = np.clip((1.0 + np.asarray(means, dtype=float)) / 2.0, 0.0, 1.0)
    hits = rng.binomial(shots, p_plus)
    return 2.0 * hits / shots - 1.0


# -- Trotterisation -----------------------------------------------------------


@dataclass(frozen=True)
class LocalTerm:
    """All Hamiltonian terms sharing one qubit support, as a dense local operator."""

    qubits: tuple[int, ...]
    terms: tuple[tuple[float, str], ...]
    matrix: np.ndarray = field(repr=False)

    def unitary(self, dt: float) -> np.ndarray:
        evals, evecs = np.linalg.eigh(self.matrix)
        return (evecs * np.exp(-1j * dt * evals)) @ evecs.conj().T


def _local_matrix(terms: Sequence[tuple[float, str]], qubits: tuple[int, ...]) -> np.ndarray:
    k = len(qubits)
    mat = np.zeros((1 << k, 1 << k), dtype=complex)
    for coeff, letters in terms:
        local = "".join(letters[q] for q in qubits)
        mat += coeff * PauliSum.single(local).to_dense()
    return mat


@dataclass(frozen=True)
class TrotterPlan:
    """Terms partitioned into layers of disjoint-support local gates.

    Layers are applied in the symmetric order ``L1 .. Lm Lm .. L1`` with half
    steps, giving a second-order product formula. Single-qubit layers come
    first, followed by bond layers (even bonds, odd bonds, wrap-around).
    """

    n_qubits: int
    layers: tuple[tuple[LocalTerm, ...], ...]
    steps_per_unit_time: float
    identity_shift: float = 0.0

    def __post_init__(self) -> None:
        if not (self.steps_per_unit_time > 0 and math.isfinite(self.steps_per_unit_time)):
            raise ValueError("steps_per_unit_time must be positive")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def term_set(self) -> list[tuple[float, str]]:
        out = [t for layer in self.layers for g in layer for t in g.terms]
        if self.identity_shift:
            out.append((self.identity_shift, "I" * self.n_qubits))
        return sorted(out, key=lambda t: t[1])

    def n_steps(self, t: float) -> int:
        return max(1, math.ceil(abs(t) * self.steps_per_unit_time - 1e-12))

    def step_sequence(self, dt: float) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """Gates ``(qubits, unitary)`` of one symmetric step of length ``dt``."""
        half = [[(g.qubits, g.unitary(dt / 2)) for g in layer] for layer in self.layers]
        seq = [gate for layer in half for gate in layer]
        seq += [gate for layer in reversed(half) for gate in layer]
        return seq


def build_trotter_plan(H: PauliSum, steps_per_unit_time: float) -> TrotterPlan:
    groups: dict[tuple[int, ...], list[tuple[float, str]]] = {}
    ident = 0.0
    for coeff, letters in H.terms:
        qubits = H.support(letters)
        if not qubits:
            ident += coeff
            continue
        groups.setdefault(qubits, []).append((coeff, letters))

    n = H.n_qubits

    def order_key(qubits: tuple[int, ...]) -> tuple:
        # a wrap-around bond (0, n-1) starts at site n-1
        start = n - 1 if qubits == (0, n - 1) and n > 2 else qubits[0]
        return (len(qubits), start % 2, start, qubits)

    layers: list[list[LocalTerm]] = []
    layer_sizes: list[int] = []
    layer_used: list[set[int]] = []
    for qubits in sorted(groups, key=order_key):
        term = LocalTerm(qubits, tuple(groups[qubits]), _local_matrix(groups[qubits], qubits))
        size = len(qubits)
        for li, used in enumerate(layer_used):
            if layer_sizes[li] == size and used.isdisjoint(qubits):
                layers[li].append(term)
                used.update(qubits)
                break
        else:
            layers.append([term])
            layer_sizes.append(size)
            layer_used.append(set(qubits))
    return TrotterPlan(
        n_qubits=H.n_qubits,
        layers=tuple(tuple(layer) for layer in layers),
        steps_per_unit_time=steps_per_unit_time,
        identity_shift=ident,
    )


def apply_gate(psi: np.ndarray, qubits: tuple[int, ...], unitary: np.ndarray, n: int) -> np.ndarray:
    """Apply a local unitary to a statevector or to each column of a batch."""
    batch = psi.shape[1:] if psi.ndim == 2 else ()
    k = len(qubits)
    t = psi.reshape((2,) * n + batch)
    u = unitary.reshape((2,) * (2 * k))
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(psi.shape)


def trotter2_evolve(plan: TrotterPlan, psi0: np.ndarray, t: float) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (plan.dim,):
        raise ValueError(f"state dimension {psi.shape} does not match {plan.dim}")
    if t == 0:
        return psi.copy()
    steps = plan.n_steps(t)
    dt = t / steps
    seq = plan.step_sequence(dt)
    for _ in range(steps):
        for qubits, u in seq:
            psi = apply_gate(psi, qubits, u, plan.n_qubits)
    if plan.identity_shift:
        psi = psi * np.exp(-1j * plan.identity_shift * t)
    return psi


# -- engines ------------------------------------------------------------------


def _expectations_from_states(states: np.ndarray, observables: Sequence[PauliSum]) -> np.ndarray:
    out = np.empty((len(observables), states.shape[1]))
    for k, obs in enumerate(observables):
        out[k] = obs.expectation(states)
    return out


class ExactEngine:
    """Evolution by the stored eigendecomposition; reused for every sampled time."""

    name = "exact"

    def __init__(self, ed: EDResult, batch_size: int = 256) -> None:
        self.ed = ed
        self.batch_size = batch_size

    @classmethod
    def from_hamiltonian(cls, H: PauliSum, qubit_cap: int = DEFAULT_QUBIT_CAP) -> ExactEngine:
        return cls(diagonalize(H, qubit_cap))

    @property
    def dim(self) -> int:
        return self.ed.dim

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        return exact_evolve(self.ed, psi0, t)

    def expectations(
        self, psi0: np.ndarray, observables: Sequence[PauliSum], times: np.ndarray
    ) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        out = np.empty((len(observables), times.size))
        for start in range(0, times.size, self.batch_size):
            sl = slice(start, start + self.batch_size)
            states = self.ed.evolve_many(psi0, times[sl])
            out[:, sl] = _expectations_from_states(states, observables)
        return out


class TrotterEngine:
    """Second-order product-formula evolution, one circuit per sampled time."""

    name = "trotter"

    def __init__(self, plan: TrotterPlan) -> None:
        self.plan = plan

    @classmethod
    def from_hamiltonian(cls, H: PauliSum, steps_per_unit_time: float) -> TrotterEngine:
        return cls(build_trotter_plan(H, steps_per_unit_time))

    @property
    def dim(self) -> int:
        return self.plan.dim

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        return trotter2_evolve(self.plan, psi0, t)

    def expectations(
        self, psi0: np.ndarray, observables: Sequence[PauliSum], times: np.ndarray
    ) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        states = np.stack([self.evolve(psi0, t) for t in times], axis=1)
        if times.size == 0:
            return np.empty((len(observables), 0))
        return _expectations_from_states(states, observables)
