"""Site-resolved spectra, their spatial Fourier transform and dispersion extraction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from qspec.errors import InvalidWindowError
from qspec.estimator import Engine, SpectralEstimate, sample_draws, spectrum_from_draws
from qspec.filters import GaussianFilter
from qspec.operators import PauliSum, single_site

DEFAULT_INTENSITY_FLOOR = 1e-3


@dataclass(frozen=True)
class SiteResolvedSpectra:
    spectra: tuple[SpectralEstimate, ...]
    letter: str

    def __post_init__(self) -> None:
        grid = self.spectra[0].omega
        for s in self.spectra[1:]:
            if not np.array_equal(s.omega, grid):
                raise ValueError("site spectra must share one frequency grid")

    @property
    def n_sites(self) -> int:
        return len(self.spectra)

    @property
    def omega(self) -> np.ndarray:
        return self.spectra[0].omega

    def matrix(self) -> np.ndarray:
        """``G_x(omega)`` as an ``(n_sites, n_omega)`` complex array."""
        return np.stack([s.g_hat for s in self.spectra])


def site_observables(letter: str, n_sites: int) -> list[PauliSum]:
    if letter not in ("X", "Y", "Z"):
        raise ValueError(f"site family needs one Pauli letter, got {letter!r}")
    return [PauliSum.single(single_site(letter, x, n_sites)) for x in range(n_sites)]


def _family_letter(observables: Sequence[PauliSum]) -> str:
    letters = set()
    for x, obs in enumerate(observables):
        if len(obs.terms) != 1:
            raise ValueError("site family members must be single Pauli strings")
        coeff, s = obs.terms[0]
        if coeff != 1.0 or obs.support(s) != (x,):
            raise ValueError(f"observable {x} is not a unit Pauli letter on site {x}")
        letters.add(s[x])
    if len(letters) != 1:
        raise ValueError(f"mixed-letter observable family {sorted(letters)}")
    return letters.pop()


def estimate_site_spectra(
    psi0: np.ndarray,
    engine: Engine,
    observables: Sequence[PauliSum],
    f: GaussianFilter,
    omega_grid: np.ndarray,
    n_samples: int,
    shots: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> SiteResolvedSpectra:
    """Estimate ``G_x(omega)`` for a single-letter family, sharing draws and evolutions."""
    letter = _family_letter(observables)
    draws = sample_draws(psi0, engine, observables, f, n_samples, shots=shots, seed=seed, workers=workers)
    spectra = tuple(
        spectrum_from_draws(draws, omega_grid, obs_index=x, meta={"site": x})
        for x in range(len(observables))
    )
    return SiteResolvedSpectra(spectra=spectra, letter=letter)


@dataclass(frozen=True)
class MomentumSpectrum:
    k: np.ndarray
    omega: np.ndarray
    g_k: np.ndarray
    k0_removed: bool = False

    @property
    def n_k(self) -> int:
        return self.k.size

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.g_k)

    def to_csv(self, path: str | Path) -> None:
        inten = self.intensity
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("k_index", "k", "omega", "intensity"))
            for m in range(self.n_k):
                for j, om in enumerate(self.omega):
                    w.writerow([m, repr(float(self.k[m])), repr(float(om)), repr(float(inten[m, j]))])


def k_grid(n_sites: int) -> np.ndarray:
    return 2 * math.pi * np.arange(n_sites) / n_sites


def spatial_fourier_matrix(g_x: np.ndarray, remove_k0: bool = False) -> np.ndarray:
    """``G_k = sum_x exp(-i k x) G_x`` along axis 0 (no 1/N)."""
    n = g_x.shape[0]
    phase = np.exp(-1j * np.outer(k_grid(n), np.arange(n)))
    g_k = phase @ g_x
    if remove_k0:
        g_k[0] = 0.0
    return g_k


def spatial_fourier(s: SiteResolvedSpectra, remove_k0: bool = False) -> MomentumSpectrum:
    if s.n_sites < 2:
        raise ValueError("spatial Fourier transform needs at least 2 sites")
    return MomentumSpectrum(
        k=k_grid(s.n_sites),
        omega=s.omega,
        g_k=spatial_fourier_matrix(s.matrix(), remove_k0),
        k0_removed=remove_k0,
    )


@dataclass(frozen=True)
class DispersionPoint:
    k_index: int
    k: float
    omega_star: float | None
    intensity: float

    @property
    def present(self) -> bool:
        return self.omega_star is not None


def extract_dispersion(
    m: MomentumSpectrum,
    window: tuple[float, float],
    floor: float = DEFAULT_INTENSITY_FLOOR,
    remove_k0: bool = True,
) -> list[DispersionPoint]:
    """Per-k argmax of ``|G_k(omega)|`` inside ``window``.

    Rows whose maximum falls below ``floor`` times the global maximum (taken
    over all k, including k = 0) are reported with ``omega_star = None``.
    """
    inside = np.flatnonzero((m.omega >= window[0]) & (m.omega <= window[1]))
    if inside.size == 0:
        raise InvalidWindowError(f"window {window} contains no grid points")
    inten = m.intensity[:, inside]
    global_max = float(inten.max())
    out = []
    for row in range(m.n_k):
        if remove_k0 and row == 0:
            out.append(DispersionPoint(0, float(m.k[0]), None, 0.0))
            continue
        j = int(np.argmax(inten[row]))
        peak = float(inten[row, j])
        present = global_max > 0 and peak >= floor * global_max
        out.append(
            DispersionPoint(row, float(m.k[row]), float(m.omega[inside[j]]) if present else None, peak)
        )
    return out


def dispersion_to_csv(points: Sequence[DispersionPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("k_index", "k", "omega_star", "intensity"))
        for p in points:
            w.writerow([p.k_index, repr(p.k), "" if p.omega_star is None else repr(p.omega_star),
                        repr(p.intensity)])
