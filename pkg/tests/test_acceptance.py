"""Acceptance criteria 1-10, each printing one PASS/FAIL line with measured numbers."""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import ACCEPTANCE_LINES, dense_heisenberg, dense_sum, quad_complex
from qspec import cli
from qspec.coherence import exact_G, lemma1_check, truncated_G
from qspec.estimator import estimate_G, find_peak, frequency_grid
from qspec.evolution import ExactEngine, build_trotter_plan, diagonalize, exact_evolve, trotter2_evolve
from qspec.filters import GaussianFilter, g_density, truncation_bound
from qspec.operators import PauliSum, build_heisenberg
from qspec.validation import HEIS7, ISING11, random_spectrum, run_fixture, quench_state

_FIXTURE_CACHE: dict[str, object] = {}


def _fixture(name: str):
    if name not in _FIXTURE_CACHE:
        _FIXTURE_CACHE[name] = run_fixture(name, seed=0, workers=1)
    return _FIXTURE_CACHE[name]


def report(capsys, number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)


def test_criterion_01_two_level_peak(capsys):
    t0 = time.perf_counter()
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    est = estimate_G(plus, ExactEngine.from_hamiltonian(PauliSum.single("Z", 0.5)), PauliSum.single("X"),
                     GaussianFilter(3.0, 6.0), frequency_grid(-3, 3, 0.005), 50_000, seed=0)
    err = abs(find_peak(est, (0.5, 1.5)).delta_hat - 1.0)
    elapsed = time.perf_counter() - t0
    ok = err <= 0.02 and elapsed < 10
    report(capsys, 1, "two-level peak", ok, f"|delta_hat - 1| = {err:.4f} (<= 0.02), {elapsed:.1f} s (< 10 s)")
    assert ok


def _random_pauli_sum(rng, n, n_terms):
    letters = rng.choice(list("IXYZ"), size=(n_terms, n))
    strings = ["".join(r) for r in letters if set(r) != {"I"}]
    return PauliSum.from_terms(list(zip(rng.normal(size=len(strings)), strings)), n)


def test_criterion_02_unbiasedness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 3
    H = _random_pauli_sum(rng, n, 8)
    O = _random_pauli_sum(rng, n, 4)
    O = (1.0 / O.one_norm) * O
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi /= np.linalg.norm(psi)
    f = GaussianFilter(1.5, 3.0)
    grid = np.linspace(-4, 4, 20)
    est = estimate_G(psi, ExactEngine.from_hamiltonian(H), O, f, grid, 100_000, seed=11)
    elapsed = time.perf_counter() - t0

    # oracle: dense matrix exponentials and adaptive quadrature
    Hd, Od = dense_sum(H.terms, n), dense_sum(O.terms, n)
    E, V = np.linalg.eigh(Hd)
    a = V.conj().T @ psi
    Oe = V.conj().T @ Od @ V

    def signal(t):
        c = a * np.exp(-1j * E * t)
        return np.vdot(c, Oe @ c)

    assert abs(signal(0.7) - np.vdot(expm(-0.7j * Hd) @ psi, Od @ expm(-0.7j * Hd) @ psi)) < 1e-12
    ref = np.array([quad_complex(lambda t: signal(f.tau * t) * g_density(t) * np.exp(1j * f.tau * w * t),
                                 -f.cutoff, f.cutoff, epsabs=1e-12) for w in grid])
    within = np.abs(est.g_hat - ref) <= 4 * est.stderr
    frac = float(np.mean(within))
    ok = frac >= 0.95 and elapsed < 60
    report(capsys, 2, "estimator unbiasedness", ok,
           f"{int(within.sum())}/20 points within 4 stderr (>= 95%), estimate {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_03_truncation_bound(capsys):
    rng = np.random.default_rng(3)
    grid = np.linspace(-3, 13, 321)
    violations, worst_ratio, quad_err = 0, 0.0, 0.0
    for _ in range(20):
        s = random_spectrum(rng, int(rng.integers(2, 10)), 0.5, 0.1)
        ct = s.table()
        tau = float(rng.uniform(0.5, 4.0))
        for T in (1.0, 2.0, 3.0, 4.0):
            f = GaussianFilter(tau, T)
            diff = np.abs(truncated_G(ct, f, grid) - exact_G(ct, f, grid))
            violations += int(np.sum(diff > truncation_bound(T)))
            worst_ratio = max(worst_ratio, float(diff.max() / truncation_bound(T)))
            # independent quadrature cross-check of the closed form at a few frequencies
            for w in grid[::80]:
                val = quad_complex(lambda t: np.sum(ct.weights * np.exp(-1j * ct.transitions * tau * t))
                                   * g_density(t) * np.exp(1j * tau * w * t), -T, T, epsabs=1e-12)
                quad_err = max(quad_err, abs(val - truncated_G(ct, f, w)))
    ok = violations == 0 and quad_err < 1e-8
    report(capsys, 3, "truncation bound", ok,
           f"{violations} violations over 20 spectra x 4 cutoffs x {grid.size} points, "
           f"max |G_T - G| / bound = {worst_ratio:.3f}, closed form vs quadrature {quad_err:.1e}")
    assert ok


def test_criterion_04_separation_inequalities(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    gamma = 0.5
    passed = 0
    for _ in range(100):
        s = random_spectrum(rng, int(rng.integers(1, 15)), gamma, 0.1)
        rep = lemma1_check(s.table(), s.probe, eps=0.05 * gamma, gamma=gamma)
        passed += rep.passed
    elapsed = time.perf_counter() - t0
    ok = passed == 100 and elapsed < 30
    report(capsys, 4, "separation lemma property suite", ok, f"{passed}/100 pass, {elapsed:.2f} s (< 30 s)")
    assert ok


def test_criterion_05_heisenberg_peaks(capsys):
    t0 = time.perf_counter()
    res = _fixture("heis7")
    dist = res.measured["max_match_distance"]
    tol = math.sqrt(math.log(2)) / HEIS7["tau"]

    # width ratio on an isolated peak: the RY(pi/2) quench has a lone transition doublet near 1.5
    n, site = HEIS7["n"], HEIS7["site"]
    engine = ExactEngine.from_hamiltonian(build_heisenberg(n, HEIS7["J"], HEIS7["h_z"]))
    O = PauliSum.single("I" * site + "Y" + "I" * (n - site - 1))
    widths = {}
    for tau in (8.0, 4.0):
        est = estimate_G(quench_state(n, site), engine, O, GaussianFilter(tau, HEIS7["T"]),
                         frequency_grid(0.5, 2.5, 0.005), HEIS7["n_samples"], seed=0)
        widths[tau] = find_peak(est, (1.2, 1.8)).fwhm_estimate
    ratio = widths[8.0] / widths[4.0]
    elapsed = time.perf_counter() - t0
    ok = dist <= tol and abs(ratio - 0.5) <= 0.05 and elapsed < 300
    report(capsys, 5, "7-site Heisenberg quench spectrum", ok,
           f"max transition-to-peak distance {dist:.4f} (<= {tol:.4f}), "
           f"FWHM ratio {ratio:.3f} (0.5 +- 10%), {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_06_ising_dispersion(capsys):
    res = _fixture("ising11")
    dev = res.measured["max_dispersion_deviation"]
    fwhm = 2 * math.sqrt(math.log(2)) / ISING11["tau"]
    ok = res.passed and dev <= 0.8 and fwhm <= 0.5 and res.runtime < 900
    report(capsys, 6, "11-site Ising dispersion", ok,
           f"max |omega*(k) - 2 sqrt(5 - 4 cos k)| = {dev:.4f} (<= 0.8), FWHM {fwhm:.3f} (<= 0.5), "
           f"{res.runtime:.1f} s (< 900 s)")
    assert ok


def test_criterion_07_ferromagnet_dispersion(capsys):
    res = _fixture("ferro13")
    dev = res.measured["max_dispersion_deviation"]
    ok = res.passed and dev <= 0.8
    report(capsys, 7, "13-site ferromagnet dispersion", ok,
           f"max |omega*(k) - 4 (1 - cos k)| = {dev:.4f} (<= 0.8) over "
           f"{res.info['n_present']} rows above floor, {res.runtime:.1f} s")
    assert ok


def test_criterion_08_trotter_order(capsys):
    n, site = HEIS7["n"], HEIS7["site"]
    H = build_heisenberg(n, HEIS7["J"], HEIS7["h_z"])
    psi = quench_state(n, site)
    exact = exact_evolve(diagonalize(H), psi, 1.0)
    # the ED propagator itself agrees with a dense matrix exponential
    oracle = expm(-1j * dense_heisenberg(n, HEIS7["J"], HEIS7["h_z"])) @ psi
    assert np.linalg.norm(exact - oracle) < 1e-10
    errs = {r: np.linalg.norm(trotter2_evolve(build_trotter_plan(H, r), psi, 1.0) - exact) for r in (8, 16)}
    ratio = errs[8] / errs[16]
    ok = 3.4 <= ratio <= 4.6
    report(capsys, 8, "second-order Trotter", ok,
           f"error ratio dt=1/8 -> 1/16: {ratio:.3f} (in [3.4, 4.6]), errors {errs[8]:.2e}, {errs[16]:.2e}")
    assert ok


def test_criterion_09_noise(capsys):
    res = _fixture("noise7")
    m = res.measured
    a = m["global_lambda_rel_error"] <= 0.05 and m["global_mitigation_max_error"] <= 1e-10
    b = m["r_squared_p0.001"] >= 0.99 and m["r_squared_p0.005"] >= 0.99
    c = m["mitigated_over_noisy_error"] < 1.0
    ok = a and b and c
    err = res.info["frequency_error"]
    report(capsys, 9, "depolarizing noise and mitigation", ok,
           f"(a) lambda rel. error {m['global_lambda_rel_error']:.1e} (<= 5%), mitigation error "
           f"{m['global_mitigation_max_error']:.1e} (<= 1e-10); (b) R^2 {m['r_squared_p0.001']:.5f}, "
           f"{m['r_squared_p0.005']:.5f} (>= 0.99); (c) grid-mean error mitigated {err['mitigated']:.4f} "
           f"< noisy {err['noisy']:.4f}")
    assert ok


def _cli_files(tmp_path, verb, config, workers):
    out = tmp_path / f"{verb}-{workers}"
    assert cli.main([verb, "--config", str(config), "--out", str(out), "--workers", str(workers)]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_criterion_10_determinism(capsys, tmp_path):
    (tmp_path / "h.pauli").write_text("0.5 Z\n")
    spectrum = {
        "schema": 1, "model": {"kind": "pauli_file", "path": "h.pauli"},
        "state_prep": {"base": "all-plus"}, "observable": {"kind": "pauli", "letter": "X", "site": 0},
        "filter": {"tau": 3.0, "T": 6.0}, "omega": {"min": -3.0, "max": 3.0, "resolution": 0.005},
        "sampling": {"n_samples": 50_000, "shots": 100, "seed": 5},
    }
    dispersion = {
        "schema": 1, "model": {"kind": "tfim", "n": 7, "J": 1.0, "h_x": 2.0, "h_z": 0.0, "periodic": True},
        "state_prep": {"base": "all-plus", "operations": [{"site": 3, "gate": "RY", "theta": math.pi / 2}]},
        "observable": {"kind": "site_family", "letter": "Y"}, "filter": {"tau": 4.0, "T": 6.0},
        "omega": {"min": -8.0, "max": 8.0, "resolution": 0.02}, "sampling": {"n_samples": 5000, "seed": 5},
        "dispersion": {"window": [0.5, 8.0]},
    }
    checks = {}
    for verb, data in (("spectrum", spectrum), ("dispersion", dispersion)):
        config = tmp_path / f"{verb}.json"
        config.write_text(json.dumps(data))
        runs = [_cli_files(tmp_path, verb, config, w) for w in (1, 2, 3)]
        checks[f"cli {verb}"] = runs[0] == runs[1] == runs[2]
    for name in ("two_level", "heis7", "noise7"):
        checks[f"fixture {name}"] = _fixture(name).to_json() == run_fixture(name, seed=0, workers=2).to_json()
    ok = all(checks.values())
    detail = ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in checks.items())
    report(capsys, 10, "determinism across worker counts", ok, detail)
    assert ok
