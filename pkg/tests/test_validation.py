from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PAULI, dense_heisenberg, site_op
from qspec.estimator import SpectralEstimate, frequency_grid
from qspec.validation import (
    HEIS7,
    FixtureResult,
    SyntheticSpectrum,
    build_reference,
    ferro_dispersion,
    ising_dispersion,
    load_reference,
    match_transitions,
    random_spectrum,
    run_fixture,
)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 15), st.sampled_from([0.1, 0.5]), st.floats(0.05, 1.0))
def test_random_spectrum_constraints(seed, n, gamma, floor):
    s = random_spectrum(np.random.default_rng(seed), n, gamma, floor)
    assert s.delta.size == n
    assert np.all(s.delta >= 0) and np.all(s.delta <= 10 + 1e-12)
    if n > 1:
        assert np.min(np.diff(s.delta)) >= gamma * (1 - 1e-12)
    assert np.sum(np.abs(s.weights)) <= 1 + 1e-12
    assert abs(s.weights[s.probe]) >= floor


def test_random_spectrum_rejects_overfull_interval():
    with pytest.raises(ValueError):
        random_spectrum(np.random.default_rng(0), 30, 0.5, 0.1)


def test_synthetic_spectrum_validation():
    with pytest.raises(ValueError):
        SyntheticSpectrum(np.array([0.0, 0.2]), np.array([0.5, 0.5]), 0.5, 0)
    with pytest.raises(ValueError):
        SyntheticSpectrum(np.array([0.0, 1.0]), np.array([0.7, 0.5]), 0.5, 0)


def test_heis7_reference_matches_dense_oracle():
    n, site = HEIS7["n"], HEIS7["site"]
    E, V = np.linalg.eigh(dense_heisenberg(n, HEIS7["J"], HEIS7["h_z"]))
    psi = site_op(n, {site: PAULI["X"]}) @ np.full(1 << n, 2 ** (-n / 2))
    a = V.conj().T @ psi
    O = V.conj().T @ site_op(n, {site: PAULI["Y"]}) @ V
    gam = np.outer(a, a.conj()) * O.T
    delta = E[:, None] - E[None, :]
    # merge degenerate transitions before thresholding
    merged: dict[float, complex] = {}
    for d, g in zip(delta.ravel(), gam.ravel()):
        key = round(float(d), 7)
        merged[key] = merged.get(key, 0) + g
    expected = sorted(d for d, g in merged.items() if abs(g) >= 0.02)
    ref = load_reference()["heis7"]["transitions"]
    assert [d for d, _ in ref] == pytest.approx(expected, abs=1e-7)


@pytest.mark.slow
def test_frozen_reference_reproducible():
    fresh = json.loads(json.dumps(build_reference()))
    assert fresh == load_reference()


def test_analytic_dispersions():
    k = np.array([0.0, math.pi])
    np.testing.assert_allclose(ising_dispersion(k), [2.0, 6.0])
    np.testing.assert_allclose(ferro_dispersion(k), [0.0, 8.0])


def test_match_transitions_threshold():
    grid = frequency_grid(-2, 2, 0.01)
    g = np.exp(-64 * (grid - 1) ** 2) + 0.01 * np.exp(-64 * (grid + 1) ** 2)
    est = SpectralEstimate(grid, g.astype(complex), np.full(grid.size, 1e-3))
    worst, found = match_transitions(est, [1.0])
    assert worst == pytest.approx(0.0, abs=1e-9)
    assert found == pytest.approx([1.0])
    worst, _ = match_transitions(est, [1.0, -1.0])
    assert worst == pytest.approx(2.0)


def test_fixture_result_serialisation():
    r = FixtureResult("x", {"a": 0.5}, {"a": (0.0, 1.0)}, runtime=3.0)
    assert r.passed
    assert "runtime" not in r.to_json()
    assert not FixtureResult("x", {"a": math.nan}, {"a": (-math.inf, math.inf)}).passed


def test_run_fixture_two_level():
    r = run_fixture("two_level")
    assert r.passed
    assert r.to_json() == run_fixture("two_level", workers=2).to_json()


def test_run_fixture_unknown():
    with pytest.raises(ValueError, match="unknown fixture"):
        run_fixture("nope")
