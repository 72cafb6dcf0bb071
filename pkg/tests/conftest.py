"""Shared independent oracles: dense Kronecker-product matrices and quadrature."""

from __future__ import annotations

from functools import reduce

import numpy as np
import pytest
from scipy import integrate

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_string(letters: str) -> np.ndarray:
    """Kronecker product with site 0 as the leftmost factor."""
    return reduce(np.kron, [PAULI[ch] for ch in letters])


def dense_sum(terms, n: int) -> np.ndarray:
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for c, s in terms:
        out += c * dense_string(s)
    return out


def site_op(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    return reduce(np.kron, [ops.get(i, np.eye(2)) for i in range(n)])


def dense_heisenberg(n: int, J: float, h_z: float) -> np.ndarray:
    H = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        j = (i + 1) % n
        for P in "XYZ":
            H += J * site_op(n, {i: PAULI[P], j: PAULI[P]})
        H += h_z * site_op(n, {i: PAULI["Z"]})
    return H


def dense_tfim(n: int, J: float, h_x: float, h_z: float = 0.0) -> np.ndarray:
    H = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(n):
        H += J * site_op(n, {i: PAULI["Z"], (i + 1) % n: PAULI["Z"]})
        H += h_x * site_op(n, {i: PAULI["X"]}) + h_z * site_op(n, {i: PAULI["Z"]})
    return H


def quad_complex(fn, a: float, b: float, **kw) -> complex:
    """Adaptive quadrature of a complex integrand, real and imaginary parts separately."""
    re = integrate.quad(lambda t: fn(t).real, a, b, limit=400, **kw)[0]
    im = integrate.quad(lambda t: fn(t).imag, a, b, limit=400, **kw)[0]
    return re + 1j * im


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
