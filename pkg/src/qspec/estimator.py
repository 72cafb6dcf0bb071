"""Monte Carlo estimation of the spectral detector from sampled evolution times."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from qspec.errors import InvalidWindowError
from qspec.evolution import sample_pauli_means
from qspec.filters import GaussianFilter, sample_times
from qspec.operators import PauliSum
from qspec.rng import substream

DEFAULT_CHUNK = 1024
CSV_HEADER = ("omega", "re", "im", "abs", "stderr")


class Engine(Protocol):
    dim: int

    def expectations(
        self, psi0: np.ndarray, observables: Sequence[PauliSum], times: np.ndarray
    ) -> np.ndarray: ...


def frequency_grid(lo: float, hi: float, resolution: float) -> np.ndarray:
    if not resolution > 0:
        raise ValueError("grid resolution must be positive")
    if not hi > lo:
        raise ValueError("grid requires min < max")
    n = int(math.floor((hi - lo) / resolution + 1e-9)) + 1
    return lo + resolution * np.arange(n)


@dataclass(frozen=True)
class DrawSet:
    """Sampled dimensionless times and the raw per-draw observable values.

    ``values[k, i]`` estimates ``<O_k(tau * times[i])>``; it is zero for draws
    outside the cutoff, which are counted but never evolved.
    """

    times: np.ndarray
    values: np.ndarray
    tau: float
    cutoff: float
    shots: int | None = None
    seed: int | None = None

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def active(self) -> np.ndarray:
        return np.abs(self.times) <= self.cutoff

    @property
    def physical_times(self) -> np.ndarray:
        return self.tau * self.times

    def with_values(self, values: np.ndarray) -> DrawSet:
        return replace(self, values=np.asarray(values, dtype=float))


def _expand_strings(observables: Sequence[PauliSum]) -> tuple[list[str], list[list[tuple[float, int]]], list[float]]:
    strings: list[str] = []
    index: dict[str, int] = {}
    combos = []
    offsets = []
    for obs in observables:
        ident = "I" * obs.n_qubits
        combo = []
        offset = 0.0
        for c, s in obs.terms:
            if s == ident:
                offset += c
                continue
            if s not in index:
                index[s] = len(strings)
                strings.append(s)
            combo.append((c, index[s]))
        combos.append(combo)
        offsets.append(offset)
    return strings, combos, offsets


def sample_draws(
    psi0: np.ndarray,
    engine: Engine,
    observables: Sequence[PauliSum],
    f: GaussianFilter,
    n_samples: int,
    shots: int | None = None,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> DrawSet:
    """Draw ``n_samples`` times from ``g`` and evaluate every observable at ``tau * t``.

    Each observable is measured string by string, so with ``shots`` set every
    Pauli string in its expansion receives that many shots per draw. Work is
    split into fixed-size chunks with their own shot streams; the result is
    identical for any ``workers``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if shots is not None and shots < 1:
        raise ValueError("shots must be >= 1")
    times = sample_times(substream(seed, "times"), n_samples)
    strings, combos, offsets = _expand_strings(observables)
    string_ops = [PauliSum.single(s) for s in strings]
    n_chunks = math.ceil(n_samples / chunk_size)

    def run_chunk(c: int) -> np.ndarray:
        sl = slice(c * chunk_size, min((c + 1) * chunk_size, n_samples))
        t = times[sl]
        active = np.abs(t) <= f.cutoff
        means = np.zeros((len(strings), t.size))
        if string_ops and np.any(active):
            means[:, active] = engine.expectations(psi0, string_ops, f.tau * t[active])
        if shots is not None and strings:
            rng = substream(seed, "shots", c)
            sampled = sample_pauli_means(means[:, active], shots, rng)
            means[:, active] = sampled
        vals = np.zeros((len(observables), t.size))
        for k, combo in enumerate(combos):
            row = np.full(t.size, offsets[k])
            for coeff, si in combo:
                row += coeff * means[si]
            vals[k] = np.where(active, row, 0.0)
        return vals

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    values = np.concatenate(parts, axis=1)
    return DrawSet(times=times, values=values, tau=f.tau, cutoff=f.cutoff, shots=shots, seed=seed)


@dataclass(frozen=True)
class SpectralEstimate:
    omega: np.ndarray
    g_hat: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.omega.ndim != 1 or self.omega.size == 0:
            raise ValueError("omega grid must be a nonempty 1D array")
        if self.omega.size > 1 and np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly ascending")
        if self.g_hat.shape != self.omega.shape or self.stderr.shape != self.omega.shape:
            raise ValueError("estimate arrays must match the grid")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.g_hat)

    @property
    def resolution(self) -> float:
        return float(np.median(np.diff(self.omega))) if self.omega.size > 1 else math.nan

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for om, g, se in zip(self.omega, self.g_hat, self.stderr):
                w.writerow([repr(float(om)), repr(float(g.real)), repr(float(g.imag)),
                            repr(float(abs(g))), repr(float(se))])

    @classmethod
    def from_csv(cls, path: str | Path, meta: dict | None = None) -> SpectralEstimate:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"unexpected header {rows[0]}")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        return cls(
            omega=data[:, 0],
            g_hat=data[:, 1] + 1j * data[:, 2],
            stderr=data[:, 4],
            meta=dict(meta or {}),
        )


def spectrum_from_draws(
    draws: DrawSet,
    omega_grid: np.ndarray,
    obs_index: int = 0,
    meta: dict | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> SpectralEstimate:
    """Sample mean of ``o(tau t_i) exp(i tau omega t_i)`` with a per-point standard error."""
    omega = np.asarray(omega_grid, dtype=float)
    n = draws.n_samples
    active = draws.active
    t = draws.times[active]
    v = draws.values[obs_index][active]
    s_re = np.zeros(omega.size)
    s_im = np.zeros(omega.size)
    q_re = np.zeros(omega.size)
    q_im = np.zeros(omega.size)
    for start in range(0, t.size, chunk_size):
        tc = t[start:start + chunk_size]
        vc = v[start:start + chunk_size]
        arg = draws.tau * np.outer(omega, tc)
        z_re = np.cos(arg) * vc
        z_im = np.sin(arg) * vc
        s_re += z_re.sum(axis=1)
        s_im += z_im.sum(axis=1)
        q_re += (z_re**2).sum(axis=1)
        q_im += (z_im**2).sum(axis=1)
    mean_re = s_re / n
    mean_im = s_im / n
    if n > 1:
        var_re = np.maximum(q_re - n * mean_re**2, 0.0) / (n - 1)
        var_im = np.maximum(q_im - n * mean_im**2, 0.0) / (n - 1)
        stderr = np.sqrt((var_re + var_im) / n)
    else:
        stderr = np.full(omega.size, math.inf)
    info = {
        "tau": draws.tau,
        "T": draws.cutoff,
        "n_samples": n,
        "shots": draws.shots,
        "seed": draws.seed,
    }
    info.update(meta or {})
    return SpectralEstimate(omega=omega, g_hat=mean_re + 1j * mean_im, stderr=stderr, meta=info)


def estimate_G(
    psi0: np.ndarray,
    engine: Engine,
    O: PauliSum,
    f: GaussianFilter,
    omega_grid: np.ndarray,
    n_samples: int,
    shots: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> SpectralEstimate:
    """Monte Carlo detector estimate; ``shots=None`` uses exact expectations.

    One evolution per sampled time serves every grid frequency.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    meta = {}
    if O.one_norm > 1 + 1e-12:
        msg = f"observable 1-norm {O.one_norm:.4g} exceeds 1; error bounds do not apply"
        warnings.warn(msg, stacklevel=2)
        meta["warning"] = msg
    draws = sample_draws(psi0, engine, [O], f, n_samples, shots=shots, seed=seed, workers=workers)
    return spectrum_from_draws(draws, omega_grid, meta=meta)


# -- peak search --------------------------------------------------------------


@dataclass(frozen=True)
class PeakReport:
    delta_hat: float
    window: tuple[float, float]
    peak_value: float
    sign: int
    fwhm_estimate: float
    grid_resolution: float

    def as_dict(self) -> dict:
        return {
            "delta_hat": self.delta_hat,
            "window": list(self.window),
            "peak_value": self.peak_value,
            "sign": self.sign,
            "fwhm_estimate": self.fwhm_estimate,
            "grid_resolution": self.grid_resolution,
        }


def _half_max_crossing(omega: np.ndarray, mag: np.ndarray, peak: int, half: float, step: int) -> float:
    i = peak
    while 0 <= i + step < omega.size:
        j = i + step
        if mag[j] < half:
            # linear interpolation between i (above) and j (below)
            frac = (mag[i] - half) / (mag[i] - mag[j])
            return float(omega[i] + frac * (omega[j] - omega[i]))
        i = j
    return math.nan


def fwhm_at(omega: np.ndarray, mag: np.ndarray, peak: int) -> float:
    half = mag[peak] / 2
    left = _half_max_crossing(omega, mag, peak, half, -1)
    right = _half_max_crossing(omega, mag, peak, half, +1)
    return right - left


def _report(est: SpectralEstimate, k: int, window: tuple[float, float]) -> PeakReport:
    mag = est.intensity
    re = est.g_hat[k].real
    return PeakReport(
        delta_hat=float(est.omega[k]),
        window=window,
        peak_value=float(mag[k]),
        sign=int(np.sign(re)) if re != 0 else 0,
        fwhm_estimate=fwhm_at(est.omega, mag, k),
        grid_resolution=est.resolution,
    )


def find_peak(est: SpectralEstimate, window: tuple[float, float]) -> PeakReport:
    """Grid argmax of ``|G(omega)|`` inside ``[a_L, a_R]``."""
    a_l, a_r = float(window[0]), float(window[1])
    inside = np.flatnonzero((est.omega >= a_l) & (est.omega <= a_r))
    if inside.size < 3:
        raise InvalidWindowError(
            f"window [{a_l}, {a_r}] contains {inside.size} grid points; need at least 3"
        )
    k = int(inside[np.argmax(est.intensity[inside])])
    return _report(est, k, (a_l, a_r))


def detect_peaks(
    est: SpectralEstimate,
    min_height: float = 0.0,
    window: tuple[float, float] | None = None,
) -> list[PeakReport]:
    """Strict local maxima of ``|G(omega)|`` at or above ``min_height``."""
    mag = est.intensity
    if window is None:
        window = (float(est.omega[0]), float(est.omega[-1]))
    peaks = []
    for k in range(1, mag.size - 1):
        if mag[k] >= mag[k - 1] and mag[k] > mag[k + 1] and mag[k] >= min_height:
            if window[0] <= est.omega[k] <= window[1]:
                peaks.append(_report(est, k, window))
    return peaks
