"""Depolarizing noise: global analytic model, per-gate density-matrix simulation,
decay benchmarking, exponential fitting and rescaling mitigation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from qspec.errors import FitError, ResourceCapError
from qspec.estimator import DrawSet, Engine
from qspec.evolution import TrotterPlan, apply_gate
from qspec.operators import PauliSum

DENSITY_QUBIT_CAP = 10
DEFAULT_FIT_FLOOR = 1e-3


@dataclass(frozen=True)
class GlobalDepolarizingModel:
    """Traceless expectations shrink by ``exp(-lam * t)`` after evolution time ``t``."""

    lam: float

    def __post_init__(self) -> None:
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"noise rate must satisfy lambda >= 0, got {self.lam}")


@dataclass(frozen=True)
class LocalDepolarizingModel:
    """Symmetric depolarizing channel with probability ``p_gate`` on every qubit a gate touches."""

    p_gate: float

    def __post_init__(self) -> None:
        if not 0 <= self.p_gate < 1:
            raise ValueError(f"gate error must satisfy 0 <= p < 1, got {self.p_gate}")


NoiseModel = GlobalDepolarizingModel | LocalDepolarizingModel


def _require_traceless(O: PauliSum) -> None:
    if not O.is_traceless:
        raise ValueError(
            "observable has an identity component; the maximally mixed offset is not modelled"
        )


def apply_global_noise(ideal, model: GlobalDepolarizingModel, t, observable: PauliSum | None = None):
    """Noisy expectation ``ideal * exp(-lam |t|)`` of a traceless observable."""
    if observable is not None:
        _require_traceless(observable)
    return np.asarray(ideal) * np.exp(-model.lam * np.abs(np.asarray(t, dtype=float)))


# -- density matrices ---------------------------------------------------------


def density_from_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _check_cap(n: int) -> None:
    if n > DENSITY_QUBIT_CAP:
        raise ResourceCapError(
            f"density-matrix simulation limited to {DENSITY_QUBIT_CAP} qubits, got {n}"
        )


def conjugate_gate(rho: np.ndarray, qubits: tuple[int, ...], unitary: np.ndarray, n: int) -> np.ndarray:
    """``U rho U^dagger`` with ``rho`` viewed as a vector on ``2n`` qubits."""
    vec = rho.reshape(-1)
    vec = apply_gate(vec, qubits, unitary, 2 * n)
    vec = apply_gate(vec, tuple(q + n for q in qubits), unitary.conj(), 2 * n)
    return vec.reshape(rho.shape)


def depolarize(rho: np.ndarray, q: int, n: int, p: float) -> np.ndarray:
    """``(1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)`` on qubit ``q``.

    Uses the identity ``sum_P P rho P = 2 Tr_q(rho) (x) I`` over all four Paulis.
    """
    if p == 0:
        return rho
    a, b = 1 << q, 1 << (n - q - 1)
    r = rho.reshape(a, 2, b, a, 2, b)
    reduced = r[:, 0, :, :, 0, :] + r[:, 1, :, :, 1, :]
    out = (1 - 4 * p / 3) * r
    out[:, 0, :, :, 0, :] += (2 * p / 3) * reduced
    out[:, 1, :, :, 1, :] += (2 * p / 3) * reduced
    return out.reshape(rho.shape)


def _noisy_step(rho: np.ndarray, seq, n: int, p: float) -> np.ndarray:
    for qubits, u in seq:
        rho = conjugate_gate(rho, qubits, u, n)
        for q in qubits:
            rho = depolarize(rho, q, n, p)
    return rho


def evolve_density_local_noise(
    plan: TrotterPlan, rho0: np.ndarray, t: float, model: LocalDepolarizingModel
) -> np.ndarray:
    """Second-order Trotter evolution with a depolarizing channel after every gate."""
    n = plan.n_qubits
    _check_cap(n)
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (plan.dim, plan.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match {plan.dim}")
    if t == 0:
        return rho
    steps = plan.n_steps(t)
    seq = plan.step_sequence(t / steps)
    for _ in range(steps):
        rho = _noisy_step(rho, seq, n, model.p_gate)
    return rho


def density_expectation(rho: np.ndarray, O: PauliSum) -> float:
    return float(np.real(np.trace(O.apply(rho))))


class GlobalNoiseEngine:
    """Wraps a noiseless engine and damps every Pauli expectation by ``exp(-lam |t|)``."""

    name = "global-noise"

    def __init__(self, base: Engine, model: GlobalDepolarizingModel) -> None:
        self.base = base
        self.model = model

    @property
    def dim(self) -> int:
        return self.base.dim

    def expectations(
        self, psi0: np.ndarray, observables: Sequence[PauliSum], times: np.ndarray
    ) -> np.ndarray:
        for O in observables:
            _require_traceless(O)
        ideal = self.base.expectations(psi0, observables, times)
        return apply_global_noise(ideal, self.model, np.asarray(times)[None, :])


class DensityMatrixEngine:
    """Per-gate local depolarizing noise on the Trotter circuit of each sampled time."""

    name = "density"

    def __init__(self, plan: TrotterPlan, model: LocalDepolarizingModel) -> None:
        _check_cap(plan.n_qubits)
        self.plan = plan
        self.model = model

    @property
    def dim(self) -> int:
        return self.plan.dim

    def expectations(
        self, psi0: np.ndarray, observables: Sequence[PauliSum], times: np.ndarray
    ) -> np.ndarray:
        rho0 = density_from_state(psi0)
        times = np.asarray(times, dtype=float)
        out = np.empty((len(observables), times.size))
        for i, t in enumerate(times):
            rho = evolve_density_local_noise(self.plan, rho0, t, self.model)
            for k, O in enumerate(observables):
                out[k, i] = density_expectation(rho, O)
        return out


# -- benchmarking and fitting -------------------------------------------------


def benchmark_decay(
    plan: TrotterPlan,
    psi0: np.ndarray,
    model: NoiseModel | None,
    observables: PauliSum | Sequence[PauliSum],
    depths: Sequence[int],
    dt: float,
) -> list[tuple[int, float]] | list[list[tuple[int, float]]]:
    """Observable values after ``m`` repetitions of ``U(dt) U^dagger(dt)``.

    Without noise the circuit is the identity. A single observable returns one
    ``(m, value)`` list; a sequence returns one list per observable, all
    sharing a single noisy simulation.
    """
    if len(depths) == 0:
        raise ValueError("depths must be nonempty")
    if any(m < 0 for m in depths):
        raise ValueError("depths must be non-negative")
    single = isinstance(observables, PauliSum)
    obs = [observables] if single else list(observables)
    n = plan.n_qubits
    if isinstance(model, GlobalDepolarizingModel):
        initial = [O.expectation(np.asarray(psi0, dtype=complex)) for O in obs]
        table = [
            [(int(m), float(apply_global_noise(v0, model, 2 * m * dt, O))) for m in depths]
            for v0, O in zip(initial, obs)
        ]
        return table[0] if single else table
    _check_cap(n)
    p = 0.0 if model is None else model.p_gate
    forward = plan.step_sequence(dt)
    backward = plan.step_sequence(-dt)
    rho = density_from_state(psi0)
    done = 0
    values: dict[int, list[float]] = {}
    for m in sorted(set(int(d) for d in depths)):
        for _ in range(m - done):
            rho = _noisy_step(rho, forward, n, p)
            rho = _noisy_step(rho, backward, n, p)
        done = m
        values[m] = [density_expectation(rho, O) for O in obs]
    table = [[(int(m), values[int(m)][k]) for m in depths] for k in range(len(obs))]
    return table[0] if single else table


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``A exp(-lambda x)`` to ``|value|``."""

    lambda_hat: float
    r_squared: float
    samples: tuple[tuple[float, float], ...]
    amplitude: float = 1.0
    floor: float = DEFAULT_FIT_FLOOR
    n_used: int = field(default=0)

    def predict(self, x) -> np.ndarray:
        return self.amplitude * np.exp(-self.lambda_hat * np.asarray(x, dtype=float))

    def as_dict(self) -> dict:
        return {"lambda_hat": self.lambda_hat, "r_squared": self.r_squared, "n_samples": len(self.samples)}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")


def fit_lambda(samples: Sequence[tuple[float, float]], floor: float = DEFAULT_FIT_FLOOR) -> DecayFit:
    """Log-linear fit on samples with ``|value| > floor``; ``lambda_hat`` is clamped at 0.

    ``r_squared`` is ``1 - SS_res/SS_tot`` of the fitted curve against
    ``|value|`` in linear space. Constant data gives ``r_squared = 1``.
    """
    pts = tuple((float(x), float(y)) for x, y in samples)
    data = np.array(pts, dtype=float).reshape(-1, 2)
    keep = np.abs(data[:, 1]) > floor
    x, y = data[keep, 0], np.abs(data[keep, 1])
    if x.size < 3:
        raise FitError(f"need at least 3 samples above floor {floor}, got {x.size}")
    if np.ptp(x) == 0:
        raise FitError("samples need at least two distinct x values")
    logy = np.log(y)
    slope, intercept = np.polyfit(x, logy, 1)
    lam = -slope
    if lam < 0:
        lam = 0.0
        intercept = float(np.mean(logy))
    amp = math.exp(intercept)
    pred = amp * np.exp(-lam * x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    scale = max(float(np.max(y)), 1.0)
    if ss_tot <= 1e-24 * scale**2:
        r2 = 1.0 if ss_res <= 1e-20 * scale**2 * x.size else 0.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return DecayFit(
        lambda_hat=float(lam),
        r_squared=r2,
        samples=pts,
        amplitude=amp,
        floor=floor,
        n_used=int(x.size),
    )


def depth_to_time(samples: Sequence[tuple[int, float]], dt: float) -> list[tuple[float, float]]:
    """Map repetition counts to elapsed circuit time ``2 m dt``."""
    return [(2 * m * dt, v) for m, v in samples]


def mitigate(draws: DrawSet, fit: DecayFit | Sequence[DecayFit]) -> DrawSet:
    """Rescale each raw value by ``exp(lambda_hat * tau |t_i|)``.

    ``fit`` is one shared fit or one fit per observable row of ``draws``.
    Values of inactive draws stay zero.
    """
    fits = [fit] * draws.values.shape[0] if isinstance(fit, DecayFit) else list(fit)
    if len(fits) != draws.values.shape[0]:
        raise ValueError(f"{len(fits)} fits for {draws.values.shape[0]} observables")
    lam = np.array([f.lambda_hat for f in fits])[:, None]
    factor = np.exp(lam * np.abs(draws.physical_times)[None, :])
    return draws.with_values(draws.values * factor)


def benchmark_to_csv(samples: Sequence[tuple[int, float]], path: str | Path) -> None:
    lines = ["depth,value"] + [f"{m},{v!r}" for m, v in samples]
    Path(path).write_text("\n".join(lines) + "\n")
