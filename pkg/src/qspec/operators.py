"""Pauli-string operators, model Hamiltonians and initial-state preparation.

Qubit 0 is the leftmost letter of a Pauli string and the most significant bit
of a computational-basis index, so ``"XI"`` acts on the first tensor factor.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from qspec.errors import InvalidModelError, PauliParseError

PAULI_LETTERS = frozenset("IXYZ")

# merged coefficients below this are treated as exact cancellation
COEFF_DROP_TOL = 1e-14

PauliString = str


def validate_pauli_string(letters: str, n_qubits: int | None = None) -> str:
    if not letters or any(ch not in PAULI_LETTERS for ch in letters):
        raise ValueError(f"invalid Pauli string {letters!r}")
    if n_qubits is not None and len(letters) != n_qubits:
        raise ValueError(f"Pauli string {letters!r} has length {len(letters)}, expected {n_qubits}")
    return letters


def single_site(letter: str, site: int, n_qubits: int) -> str:
    """Return the string with ``letter`` at ``site`` and identities elsewhere."""
    if not 0 <= site < n_qubits:
        raise IndexError(f"site {site} out of range for {n_qubits} qubits")
    return "I" * site + letter + "I" * (n_qubits - site - 1)


@dataclass(frozen=True)
class PauliAction:
    """Index permutation and phases realising ``P|psi>`` on a statevector.

    ``(P psi)[i] = phase[i] * psi[source[i]]``.
    """

    source: np.ndarray
    phase: np.ndarray
    is_diagonal: bool


def pauli_action(letters: str) -> PauliAction:
    n = len(letters)
    x_mask = 0
    zy_mask = 0
    n_y = 0
    for q, ch in enumerate(letters):
        bit = 1 << (n - 1 - q)
        if ch in "XY":
            x_mask |= bit
        if ch in "ZY":
            zy_mask |= bit
        if ch == "Y":
            n_y += 1
    idx = np.arange(1 << n, dtype=np.int64)
    source = idx ^ x_mask
    parity = _popcount(source & zy_mask) & 1
    phase = (1j**n_y) * (1.0 - 2.0 * parity)
    return PauliAction(source=source, phase=phase.astype(complex), is_diagonal=x_mask == 0)


def _popcount(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    v = values.copy()
    while np.any(v):
        out += v & 1
        v >>= 1
    return out


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings, kept in canonical form.

    Use :meth:`from_terms` to build one; it merges duplicate strings, drops
    cancelled terms and sorts lexicographically.
    """

    n_qubits: int
    terms: tuple[tuple[float, str], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        for coeff, letters in self.terms:
            validate_pauli_string(letters, self.n_qubits)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for {letters}")

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, str]], n_qubits: int | None = None) -> PauliSum:
        merged: dict[str, float] = {}
        for coeff, letters in terms:
            if isinstance(coeff, complex):
                if abs(coeff.imag) > 0:
                    raise ValueError(f"coefficient of {letters} is not real")
                coeff = coeff.real
            if n_qubits is None:
                n_qubits = len(letters)
            validate_pauli_string(letters, n_qubits)
            merged[letters] = merged.get(letters, 0.0) + float(coeff)
        if n_qubits is None:
            raise ValueError("n_qubits is required for an empty sum")
        canon = tuple(
            (c, s) for s, c in sorted(merged.items()) if abs(c) >= COEFF_DROP_TOL
        )
        return cls(n_qubits=n_qubits, terms=canon)

    @classmethod
    def single(cls, letters: str, coeff: float = 1.0) -> PauliSum:
        return cls.from_terms([(coeff, letters)])

    def canonical(self) -> PauliSum:
        return PauliSum.from_terms(self.terms, self.n_qubits)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: PauliSum) -> PauliSum:
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        return PauliSum.from_terms(self.terms + other.terms, self.n_qubits)

    def __mul__(self, scalar: float) -> PauliSum:
        return PauliSum.from_terms(((scalar * c, s) for c, s in self.terms), self.n_qubits)

    __rmul__ = __mul__

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def one_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    @property
    def identity_coefficient(self) -> float:
        ident = "I" * self.n_qubits
        return next((c for c, s in self.terms if s == ident), 0.0)

    @property
    def is_traceless(self) -> bool:
        return self.identity_coefficient == 0.0

    def support(self, letters: str) -> tuple[int, ...]:
        return tuple(q for q, ch in enumerate(letters) if ch != "I")

    @cached_property
    def _actions(self) -> list[tuple[float, PauliAction]]:
        return [(c, pauli_action(s)) for c, s in self.terms]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Apply the operator to a statevector or to the columns of a (dim, batch) array."""
        psi = np.asarray(psi)
        if psi.shape[0] != self.dim:
            raise ValueError(f"state dimension {psi.shape[0]} does not match {self.dim}")
        out = np.zeros(psi.shape, dtype=complex)
        for coeff, act in self._actions:
            ph = act.phase if psi.ndim == 1 else act.phase[:, None]
            out += coeff * ph * psi[act.source]
        return out

    def expectation(self, psi: np.ndarray) -> np.ndarray | float:
        """``<psi|O|psi>`` for one state or per column of a batch."""
        val = np.sum(np.conj(psi) * self.apply(psi), axis=0)
        return np.real(val)

    def to_sparse(self) -> sp.csr_matrix:
        dim = self.dim
        if not self.terms:
            return sp.csr_matrix((dim, dim), dtype=complex)
        rows = np.tile(np.arange(dim), len(self.terms))
        cols = np.concatenate([act.source for _, act in self._actions])
        data = np.concatenate([coeff * act.phase for coeff, act in self._actions])
        mat = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        return mat

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def to_text(self) -> str:
        return "".join(f"{c!r} {s}\n" for c, s in self.terms)


# -- model builders -----------------------------------------------------------


def _bonds(n: int, periodic: bool) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    return bonds


def _two_site(a: str, i: int, b: str, j: int, n: int) -> str:
    chars = ["I"] * n
    chars[i] = a
    chars[j] = b
    return "".join(chars)


def build_heisenberg(n: int, J: float, h_z: float, periodic: bool = True) -> PauliSum:
    """Heisenberg chain ``J sum (XX + YY + ZZ) + h_z sum Z``."""
    if n < 2:
        raise InvalidModelError(f"Heisenberg chain needs n >= 2, got {n}")
    terms = []
    for i, j in _bonds(n, periodic):
        for p in "XYZ":
            terms.append((J, _two_site(p, i, p, j, n)))
    terms += [(h_z, single_site("Z", i, n)) for i in range(n)]
    return PauliSum.from_terms(terms, n)


def build_tfim(n: int, J: float, h_x: float, h_z: float = 0.0, periodic: bool = True) -> PauliSum:
    """Ising chain ``J sum ZZ + h_x sum X + h_z sum Z``."""
    if n < 2:
        raise InvalidModelError(f"Ising chain needs n >= 2, got {n}")
    terms = [(J, _two_site("Z", i, "Z", j, n)) for i, j in _bonds(n, periodic)]
    terms += [(h_x, single_site("X", i, n)) for i in range(n)]
    terms += [(h_z, single_site("Z", i, n)) for i in range(n)]
    return PauliSum.from_terms(terms, n)


def _jw_hopping(p: int, q: int, n_qubits: int) -> list[tuple[float, str]]:
    """``c_p^dag c_q + h.c.`` for p < q under Jordan-Wigner."""
    out = []
    for a in "XY":
        chars = ["I"] * n_qubits
        chars[p] = a
        chars[q] = a
        for k in range(p + 1, q):
            chars[k] = "Z"
        out.append((0.5, "".join(chars)))
    return out


def build_fermi_hubbard_1d(n_sites: int, t_hop: float, U: float) -> PauliSum:
    """Open 1D Fermi-Hubbard chain on ``2 * n_sites`` qubits.

    Spin-up modes occupy qubits ``0..n_sites-1`` and spin-down modes the rest;
    an occupied mode is ``|1>``.
    """
    if n_sites < 2:
        raise InvalidModelError(f"Fermi-Hubbard chain needs n_sites >= 2, got {n_sites}")
    nq = 2 * n_sites
    terms: list[tuple[float, str]] = []
    for spin in range(2):
        off = spin * n_sites
        for i in range(n_sites - 1):
            terms += [(-t_hop * c, s) for c, s in _jw_hopping(off + i, off + i + 1, nq)]
    ident = "I" * nq
    for i in range(n_sites):
        up, dn = i, i + n_sites
        # n_up n_dn = (I - Z_up)(I - Z_dn) / 4
        terms += [
            (U / 4, ident),
            (-U / 4, single_site("Z", up, nq)),
            (-U / 4, single_site("Z", dn, nq)),
            (U / 4, _two_site("Z", up, "Z", dn, nq)),
        ]
    return PauliSum.from_terms(terms, nq)


def number_operator(n_qubits: int) -> PauliSum:
    """Total occupation ``sum (I - Z_q) / 2``."""
    terms = [(0.5 * n_qubits, "I" * n_qubits)]
    terms += [(-0.5, single_site("Z", q, n_qubits)) for q in range(n_qubits)]
    return PauliSum.from_terms(terms, n_qubits)


# -- text format --------------------------------------------------------------

_LINE_RE = re.compile(r"^\s*(\S+)\s+(\S+)\s*$")


def parse_pauli_sum(text: str) -> PauliSum:
    """Parse ``"<coefficient> <letters>"`` lines; ``#`` starts a comment."""
    terms: list[tuple[float, str]] = []
    n_qubits: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line.replace("−", "-"))
        if m is None:
            raise PauliParseError(f"expected '<coefficient> <letters>', got {raw!r}", lineno)
        coeff_text, letters = m.groups()
        try:
            coeff = float(coeff_text)
        except ValueError:
            try:
                complex(coeff_text)
            except ValueError:
                raise PauliParseError(f"malformed coefficient {coeff_text!r}", lineno) from None
            raise PauliParseError(f"coefficient {coeff_text!r} is not real", lineno) from None
        if not math.isfinite(coeff):
            raise PauliParseError(f"coefficient {coeff_text!r} is not finite", lineno)
        if any(ch not in PAULI_LETTERS for ch in letters):
            raise PauliParseError(f"invalid Pauli letters {letters!r}", lineno)
        if n_qubits is None:
            n_qubits = len(letters)
        elif len(letters) != n_qubits:
            raise PauliParseError(
                f"string {letters!r} has length {len(letters)}, expected {n_qubits}", lineno
            )
        terms.append((coeff, letters))
    if n_qubits is None:
        raise PauliParseError("no terms found")
    return PauliSum.from_terms(terms, n_qubits)


def load_pauli_sum(path: str | Path) -> PauliSum:
    return parse_pauli_sum(Path(path).read_text())


# -- state preparation --------------------------------------------------------

GATES = ("X", "Y", "Z", "RX", "RY", "RZ")


def gate_matrix(name: str, theta: float | None = None) -> np.ndarray:
    name = name.upper()
    if name == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if name == "Y":
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if name == "Z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if name in ("RX", "RY", "RZ"):
        if theta is None or not math.isfinite(theta):
            raise ValueError(f"gate {name} needs a finite angle")
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        if name == "RX":
            return np.array([[c, -1j * s], [-1j * s, c]])
        if name == "RY":
            return np.array([[c, -s], [s, c]], dtype=complex)
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    raise ValueError(f"unknown gate {name!r}")


@dataclass(frozen=True)
class GateOp:
    site: int
    gate: str
    theta: float | None = None


@dataclass(frozen=True)
class StatePrepSpec:
    """Product base state followed by single-qubit gates.

    With ``beta`` set, the gates define a perturbation ``B`` and the prepared
    state is ``normalize(|base> + beta * B|base>)``.
    """

    base: str = "all-plus"
    operations: tuple[GateOp, ...] = ()
    amplitudes: tuple[complex, ...] | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.base not in ("all-plus", "all-zero", "custom"):
            raise ValueError(f"unknown base state {self.base!r}")
        if self.base == "custom" and self.amplitudes is None:
            raise ValueError("custom base requires amplitudes")
        for op in self.operations:
            gate_matrix(op.gate, op.theta)


def apply_single_qubit(psi: np.ndarray, mat: np.ndarray, site: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(mat, t, axes=([1], [site])), 0, site)
    return t.reshape(-1)


def prepare_state(spec: StatePrepSpec, n: int) -> np.ndarray:
    dim = 1 << n
    if spec.base == "all-plus":
        base = np.full(dim, 1 / math.sqrt(dim), dtype=complex)
    elif spec.base == "all-zero":
        base = np.zeros(dim, dtype=complex)
        base[0] = 1.0
    else:
        base = np.asarray(spec.amplitudes, dtype=complex)
        if base.shape != (dim,):
            raise ValueError(f"custom amplitudes must have length {dim}")
        norm = np.linalg.norm(base)
        if norm == 0:
            raise ValueError("custom amplitudes are all zero")
        base = base / norm
    psi = base
    for op in spec.operations:
        if not 0 <= op.site < n:
            raise IndexError(f"site {op.site} out of range for {n} qubits")
        psi = apply_single_qubit(psi, gate_matrix(op.gate, op.theta), op.site, n)
    if spec.beta is not None:
        psi = base + spec.beta * psi
    return psi / np.linalg.norm(psi)


def product_state(letters: Sequence[str]) -> np.ndarray:
    """Tensor product of single-qubit eigenstates named ``0 1 + - +i -i``."""
    table = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
        "+i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
        "-i": np.array([1, -1j], dtype=complex) / math.sqrt(2),
    }
    psi = np.array([1.0 + 0j])
    for name in letters:
        psi = np.kron(psi, table[name])
    return psi


def translation_matrix(n: int) -> sp.csr_matrix:
    """Permutation mapping qubit ``q`` to ``q + 1 (mod n)``."""
    dim = 1 << n
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    shifted = np.roll(bits, 1, axis=1)
    target = (shifted << (n - 1 - np.arange(n))[None, :]).sum(axis=1)
    return sp.csr_matrix((np.ones(dim), (target, idx)), shape=(dim, dim))
