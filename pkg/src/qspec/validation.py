"""Synthetic spectra and end-to-end regression fixtures bound to the ED oracle."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from qspec.coherence import CoherenceTable, coherence_table
from qspec.estimator import (
    SpectralEstimate,
    detect_peaks,
    estimate_G,
    find_peak,
    frequency_grid,
    sample_draws,
    spectrum_from_draws,
)
from qspec.evolution import ExactEngine, TrotterEngine, build_trotter_plan, diagonalize
from qspec.filters import GaussianFilter
from qspec.momentum import estimate_site_spectra, extract_dispersion, site_observables, spatial_fourier
from qspec.noise import (
    DensityMatrixEngine,
    GlobalDepolarizingModel,
    GlobalNoiseEngine,
    LocalDepolarizingModel,
    benchmark_decay,
    depth_to_time,
    fit_lambda,
    mitigate,
)
from qspec.operators import (
    GateOp,
    PauliSum,
    StatePrepSpec,
    build_heisenberg,
    build_tfim,
    prepare_state,
    single_site,
)

FIXTURE_NAMES = ("two_level", "heis7", "ising11", "ferro13", "noise7")
SPECTRUM_SPAN = 10.0
REFERENCE_FILE = "fixture_reference.json"


# -- synthetic spectra --------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpectrum:
    """Sorted transitions ``delta`` with real weights and a designated probe transition."""

    delta: np.ndarray
    weights: np.ndarray
    gamma: float
    probe: int

    def __post_init__(self) -> None:
        if self.delta.size > 1 and np.min(np.diff(self.delta)) < self.gamma * (1 - 1e-12):
            raise ValueError("transitions violate the minimum gap")
        if np.sum(np.abs(self.weights)) > 1 + 1e-12:
            raise ValueError("sum of |weights| exceeds 1")

    @property
    def transitions(self) -> list[tuple[float, float]]:
        return [(float(d), float(w)) for d, w in zip(self.delta, self.weights)]

    def table(self) -> CoherenceTable:
        return CoherenceTable.from_transitions(self.delta, self.weights)


def random_spectrum(
    rng: np.random.Generator,
    n_transitions: int,
    gamma_min: float,
    weight_floor: float,
    span: float = SPECTRUM_SPAN,
) -> SyntheticSpectrum:
    """Transitions in ``[0, span]`` with pairwise gaps ``>= gamma_min``.

    Positions use a spacing transform: sorted uniform points on the reduced
    interval ``[0, span - (n-1) gamma_min]`` shifted by ``i * gamma_min``.
    One probe transition carries ``|weight| >= weight_floor``; the others share
    the remaining budget so that ``sum |weight| <= 1``.
    """
    if n_transitions < 1:
        raise ValueError("need at least one transition")
    if not gamma_min > 0:
        raise ValueError("gamma_min must be positive")
    if not 0 < weight_floor <= 1:
        raise ValueError("weight_floor must lie in (0, 1]")
    free = span - (n_transitions - 1) * gamma_min
    if free < 0:
        raise ValueError(
            f"cannot place {n_transitions} transitions with gap {gamma_min} in [0, {span}]"
        )
    delta = np.sort(rng.uniform(0.0, free, n_transitions)) + gamma_min * np.arange(n_transitions)
    probe = int(rng.integers(n_transitions))
    w_probe = rng.uniform(weight_floor, 1.0)
    others = rng.uniform(0.0, 1.0, n_transitions)
    others[probe] = 0.0
    total = others.sum()
    if total > 0:
        others *= (1.0 - w_probe) * rng.uniform(0.0, 1.0) / total
    signs = rng.choice([-1.0, 1.0], n_transitions)
    weights = signs * others
    weights[probe] = signs[probe] * w_probe
    return SyntheticSpectrum(delta=delta, weights=weights, gamma=gamma_min, probe=probe)


# -- fixtures -----------------------------------------------------------------


@dataclass
class FixtureResult:
    """Outcome of one fixture; ``passed`` iff each checked value lies in its ``[lo, hi]``."""

    name: str
    measured: dict[str, float]
    tolerances: dict[str, tuple[float, float]]
    info: dict = field(default_factory=dict)
    runtime: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(
            lo <= self.measured[k] <= hi and math.isfinite(self.measured[k])
            for k, (lo, hi) in self.tolerances.items()
        )

    def to_json(self) -> str:
        """Deterministic serialization (runtime excluded)."""
        return json.dumps(
            {
                "name": self.name,
                "passed": self.passed,
                "measured": self.measured,
                "tolerances": {k: list(v) for k, v in self.tolerances.items()},
                "info": self.info,
            },
            sort_keys=True,
        )


def load_reference() -> dict:
    text = resources.files("qspec.data").joinpath(REFERENCE_FILE).read_text()
    return json.loads(text)


def _significant_transitions(ct: CoherenceTable, threshold: float) -> list[tuple[float, float]]:
    idx = ct.significant(threshold)
    return [(float(ct.transitions[i]), float(abs(ct.weights[i]))) for i in idx]


def match_transitions(
    est: SpectralEstimate, references: list[float], rel_height: float = 0.05
) -> tuple[float, list[float]]:
    """Distance from each reference energy to the nearest detected peak.

    A detected peak is a local maximum of ``|G|`` with height at least
    ``rel_height`` times the global maximum and at least 5 standard errors.
    """
    mag = est.intensity
    peaks = [
        p for p in detect_peaks(est, min_height=rel_height * float(mag.max()))
        if p.peak_value >= 5 * est.stderr[np.searchsorted(est.omega, p.delta_hat)]
    ]
    found = np.array([p.delta_hat for p in peaks])
    if found.size == 0:
        return math.inf, []
    dists = [float(np.min(np.abs(found - d))) for d in references]
    return (max(dists) if dists else 0.0), found.tolist()


# scenario parameters shared by the fixtures and the reference generator
HEIS7 = {"n": 7, "J": -1.0, "h_z": -0.01, "site": 3, "tau": 8.0, "T": 6.0, "n_samples": 100_000,
         "grid": (-3.0, 3.0, 0.005), "gamma_floor": 0.02}
ISING11 = {"n": 11, "J": 1.0, "h_x": 2.0, "site": 5, "tau": 4.0, "T": 6.0, "n_samples": 20_000,
           "grid": (-8.0, 8.0, 0.02), "window": (0.5, 8.0), "tol": 0.8}
FERRO13 = {"n": 13, "J": -1.0, "h_z": -0.01, "site": 6, "tau": 4.0, "T": 6.0, "n_samples": 5_000,
           "grid": (-9.0, 9.0, 0.02), "window": (0.3, 9.0), "tol": 0.8}
NOISE7 = {"n": 7, "J": 1.0, "h_x": 2.0, "h_z": 0.1, "dt": 0.4, "p_values": (0.001, 0.005),
          "p_spectrum": 0.005, "depths": tuple(range(0, 21, 2)), "tau": 1.0, "T": 5.0,
          "n_samples": 300, "grid": (-10.0, 10.0, 0.05), "lam_global": 0.05}


def heis7_state() -> np.ndarray:
    spec = StatePrepSpec(base="all-plus", operations=(GateOp(HEIS7["site"], "X"),))
    return prepare_state(spec, HEIS7["n"])


def heis7_hamiltonian() -> PauliSum:
    return build_heisenberg(HEIS7["n"], HEIS7["J"], HEIS7["h_z"])


def quench_state(n: int, site: int) -> np.ndarray:
    """``Ry(pi/2)`` on one site of ``|+>^n``."""
    return prepare_state(StatePrepSpec(base="all-plus", operations=(GateOp(site, "RY", math.pi / 2),)), n)


def plus_i_state(n: int) -> np.ndarray:
    """``|+i>^n``: every site has ``<Y> = 1``."""
    ops = tuple(GateOp(q, "RX", -math.pi / 2) for q in range(n))
    return prepare_state(StatePrepSpec(base="all-zero", operations=ops), n)


def _fixture_two_level(seed: int, workers: int) -> FixtureResult:
    H = PauliSum.single("Z", 0.5)
    engine = ExactEngine.from_hamiltonian(H)
    psi = np.array([1.0, 1.0]) / math.sqrt(2)
    grid = frequency_grid(-3.0, 3.0, 0.005)
    est = estimate_G(psi, engine, PauliSum.single("X"), GaussianFilter(3.0, 6.0), grid,
                     50_000, seed=seed, workers=workers)
    peak = find_peak(est, (0.5, 1.5))
    return FixtureResult(
        name="two_level",
        measured={"delta_error": abs(peak.delta_hat - 1.0)},
        tolerances={"delta_error": (0.0, 0.02)},
        info={"delta_hat": peak.delta_hat, "fwhm": peak.fwhm_estimate},
    )


def _fixture_heis7(seed: int, workers: int) -> FixtureResult:
    p = HEIS7
    ref = load_reference()["heis7"]["transitions"]
    engine = ExactEngine.from_hamiltonian(heis7_hamiltonian())
    O = PauliSum.single(single_site("Y", p["site"], p["n"]))
    est = estimate_G(heis7_state(), engine, O, GaussianFilter(p["tau"], p["T"]),
                     frequency_grid(*p["grid"]), p["n_samples"], seed=seed, workers=workers)
    deltas = [d for d, _ in ref]
    worst, found = match_transitions(est, deltas)
    tol = math.sqrt(math.log(2)) / p["tau"]
    return FixtureResult(
        name="heis7",
        measured={"max_match_distance": worst},
        tolerances={"max_match_distance": (0.0, tol)},
        info={"reference": deltas, "peaks": found},
    )


def _dispersion_fixture(name: str, p: dict, H: PauliSum, theory: Callable, seed: int,
                        workers: int) -> FixtureResult:
    engine = ExactEngine.from_hamiltonian(H)
    psi = quench_state(p["n"], p["site"])
    spectra = estimate_site_spectra(psi, engine, site_observables("Y", p["n"]),
                                    GaussianFilter(p["tau"], p["T"]), frequency_grid(*p["grid"]),
                                    p["n_samples"], seed=seed, workers=workers)
    points = extract_dispersion(spatial_fourier(spectra), p["window"])
    present = [pt for pt in points if pt.present]
    dev = max((abs(pt.omega_star - theory(pt.k)) for pt in present), default=math.inf)
    ref = load_reference()[name]["ridge"]
    ed_dev = max(
        (abs(pt.omega_star - ref[pt.k_index]) for pt in present if ref[pt.k_index] is not None),
        default=math.inf,
    )
    return FixtureResult(
        name=name,
        measured={"max_dispersion_deviation": dev, "max_ed_ridge_deviation": ed_dev},
        tolerances={"max_dispersion_deviation": (0.0, p["tol"]),
                    "max_ed_ridge_deviation": (0.0, 0.1)},
        info={"omega_star": [pt.omega_star for pt in points], "n_present": len(present)},
    )


def ising_dispersion(k):
    return 2 * np.sqrt(5 - 4 * np.cos(k))


def ferro_dispersion(k):
    return 4 * (1 - np.cos(k))


def _fixture_ising11(seed: int, workers: int) -> FixtureResult:
    p = ISING11
    return _dispersion_fixture("ising11", p, build_tfim(p["n"], p["J"], p["h_x"]),
                               ising_dispersion, seed, workers)


def _fixture_ferro13(seed: int, workers: int) -> FixtureResult:
    p = FERRO13
    return _dispersion_fixture("ferro13", p, build_heisenberg(p["n"], p["J"], p["h_z"]),
                               ferro_dispersion, seed, workers)


def noise7_setup():
    p = NOISE7
    H = build_tfim(p["n"], p["J"], p["h_x"], p["h_z"])
    plan = build_trotter_plan(H, 1.0 / p["dt"])
    return H, plan, plus_i_state(p["n"]), site_observables("Y", p["n"])


def _fixture_noise7(seed: int, workers: int) -> FixtureResult:
    p = NOISE7
    _, plan, psi, ys = noise7_setup()
    y_sum = sum(ys[1:], ys[0])
    measured: dict[str, float] = {}
    tolerances: dict[str, tuple[float, float]] = {}

    # global model: analytic decay, fit round trip, exact inversion
    glob = GlobalDepolarizingModel(p["lam_global"])
    decay = benchmark_decay(plan, psi, glob, y_sum, p["depths"], p["dt"])
    fit_g = fit_lambda(depth_to_time(decay, p["dt"]))
    measured["global_lambda_rel_error"] = abs(fit_g.lambda_hat - glob.lam) / glob.lam
    tolerances["global_lambda_rel_error"] = (0.0, 0.05)

    # local model: decay fits for each noise rate
    fits_by_p = {}
    for pg in p["p_values"]:
        series = benchmark_decay(plan, psi, LocalDepolarizingModel(pg), [y_sum, *ys], p["depths"], p["dt"])
        total = fit_lambda(depth_to_time(series[0], p["dt"]))
        measured[f"r_squared_p{pg}"] = total.r_squared
        tolerances[f"r_squared_p{pg}"] = (0.99, 1.0)
        fits_by_p[pg] = [fit_lambda(depth_to_time(s, p["dt"])) for s in series[1:]]

    # frequency-domain error of noisy and mitigated spectra against the noiseless circuit
    f = GaussianFilter(p["tau"], p["T"])
    grid = frequency_grid(*p["grid"])
    model = LocalDepolarizingModel(p["p_spectrum"])
    noisy = sample_draws(psi, DensityMatrixEngine(plan, model), ys, f, p["n_samples"],
                         seed=seed, workers=workers)
    ideal = sample_draws(psi, TrotterEngine(plan), ys, f, p["n_samples"], seed=seed, workers=workers)
    mitigated = mitigate(noisy, fits_by_p[p["p_spectrum"]])
    err = {}
    for label, d in (("noisy", noisy), ("mitigated", mitigated)):
        per_site = [
            np.mean(np.abs(spectrum_from_draws(d, grid, x).g_hat - spectrum_from_draws(ideal, grid, x).g_hat))
            for x in range(len(ys))
        ]
        err[label] = float(np.mean(per_site))
    measured["mitigated_over_noisy_error"] = err["mitigated"] / err["noisy"]
    tolerances["mitigated_over_noisy_error"] = (0.0, 1.0 - 1e-12)

    # global model: mitigation with the true rate inverts the damping
    exact = ExactEngine.from_hamiltonian(build_tfim(p["n"], p["J"], p["h_x"], p["h_z"]))
    g_noisy = sample_draws(psi, GlobalNoiseEngine(exact, glob), ys[:1], f, 200, seed=seed)
    g_ideal = sample_draws(psi, exact, ys[:1], f, 200, seed=seed)
    g_mit = mitigate(g_noisy, fit_lambda([(0.0, 1.0), (1.0, math.exp(-glob.lam)), (2.0, math.exp(-2 * glob.lam))]))
    measured["global_mitigation_max_error"] = float(np.max(np.abs(g_mit.values - g_ideal.values)))
    tolerances["global_mitigation_max_error"] = (0.0, 1e-10)
    return FixtureResult(
        name="noise7",
        measured=measured,
        tolerances=tolerances,
        info={"frequency_error": err, "global_lambda_hat": fit_g.lambda_hat},
    )


_FIXTURES: dict[str, Callable[[int, int], FixtureResult]] = {
    "two_level": _fixture_two_level,
    "heis7": _fixture_heis7,
    "ising11": _fixture_ising11,
    "ferro13": _fixture_ferro13,
    "noise7": _fixture_noise7,
}


def run_fixture(name: str, seed: int = 0, workers: int = 1) -> FixtureResult:
    """Run one named scenario; failures are reported in the result, never raised."""
    if name not in _FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURE_NAMES)}")
    start = time.perf_counter()
    try:
        result = _FIXTURES[name](seed, workers)
    except Exception as exc:  # noqa: BLE001 - fixtures report, never throw
        result = FixtureResult(
            name=name,
            measured={"error": math.nan},
            tolerances={"error": (0.0, 0.0)},
            info={"exception": f"{type(exc).__name__}: {exc}"},
        )
    result.runtime = time.perf_counter() - start
    return result


# -- frozen reference data ----------------------------------------------------


def _exact_ridge(n: int, H: PauliSum, site: int, tau: float, grid: tuple, window: tuple) -> list:
    """Dispersion from the exact detector of every site (no sampling)."""
    from qspec.coherence import exact_G
    from qspec.momentum import MomentumSpectrum, k_grid, spatial_fourier_matrix

    ed = diagonalize(H)
    psi = quench_state(n, site)
    omega = frequency_grid(*grid)
    f = GaussianFilter(tau, 1.0)
    g_x = np.stack([
        exact_G(coherence_table(ed, psi, O, qubit_cap=n), f, omega) for O in site_observables("Y", n)
    ])
    m = MomentumSpectrum(k=k_grid(n), omega=omega, g_k=spatial_fourier_matrix(g_x))
    return [pt.omega_star for pt in extract_dispersion(m, window)]


def _magnon_energies(n: int, H: PauliSum) -> list:
    """One-flip excitation energies above the all-zero state, indexed by ``k = 2 pi m / n``.

    The one-flip block of a translation-invariant chain is circulant, so its
    eigenvalues are the DFT of its first row; they are cross-checked against
    a dense diagonalization of the block.
    """
    mat = H.to_sparse()
    idx = np.array([1 << (n - 1 - j) for j in range(n)])
    block = mat[idx][:, idx].toarray().real - mat[0, 0].real * np.eye(n)
    by_k = np.real(np.fft.fft(block[0]))
    if not np.allclose(np.sort(by_k), np.linalg.eigvalsh(block), atol=1e-9):
        raise RuntimeError("one-flip block is not circulant")
    return [None] + [float(e) for e in by_k[1:]]


def build_reference() -> dict:
    """Recompute the frozen ED reference values (slow: diagonalizes up to 13 qubits)."""
    ed7 = diagonalize(heis7_hamiltonian())
    O = PauliSum.single(single_site("Y", HEIS7["site"], HEIS7["n"]))
    ct = coherence_table(ed7, heis7_state(), O)
    p, q = ISING11, FERRO13
    return {
        "heis7": {"transitions": _significant_transitions(ct, HEIS7["gamma_floor"])},
        "ising11": {"ridge": _exact_ridge(p["n"], build_tfim(p["n"], p["J"], p["h_x"]), p["site"],
                                          p["tau"], p["grid"], p["window"])},
        "ferro13": {"ridge": _magnon_energies(q["n"], build_heisenberg(q["n"], q["J"], q["h_z"]))},
    }


def write_reference(path: str | Path) -> None:
    Path(path).write_text(json.dumps(build_reference(), indent=1) + "\n")


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Regenerate frozen fixture reference data.")
    parser.add_argument("path", nargs="?", default=str(Path(__file__).parent / "data" / REFERENCE_FILE))
    write_reference(parser.parse_args().path)
