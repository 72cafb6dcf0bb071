"""Ancilla-free spectroscopy of many-body Hamiltonians by filtered time sampling."""

from qspec.coherence import CoherenceTable, coherence_table, exact_G, lemma1_check, truncated_G
from qspec.estimator import SpectralEstimate, estimate_G, find_peak, frequency_grid
from qspec.evolution import ExactEngine, TrotterEngine, build_trotter_plan, diagonalize, trotter2_evolve
from qspec.filters import GaussianFilter
from qspec.operators import PauliSum, build_fermi_hubbard_1d, build_heisenberg, build_tfim, parse_pauli_sum
from qspec.resources import required_Ns, required_T, required_tau

__version__ = "0.1.0"

__all__ = [
    "CoherenceTable",
    "ExactEngine",
    "GaussianFilter",
    "PauliSum",
    "SpectralEstimate",
    "TrotterEngine",
    "build_fermi_hubbard_1d",
    "build_heisenberg",
    "build_tfim",
    "build_trotter_plan",
    "coherence_table",
    "diagonalize",
    "estimate_G",
    "exact_G",
    "find_peak",
    "frequency_grid",
    "lemma1_check",
    "parse_pauli_sum",
    "required_Ns",
    "required_T",
    "required_tau",
    "trotter2_evolve",
    "truncated_G",
]
