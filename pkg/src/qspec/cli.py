"""Batch front end: ``qspec {spectrum,dispersion,noise-bench,validate}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from qspec.coherence import COHERENCE_QUBIT_CAP, CoherenceTable, coherence_table
from qspec.config import RunConfig, load_config
from qspec.errors import ConfigError, DomainError, InvalidWindowError, PauliParseError, ResourceCapError
from qspec.estimator import SpectralEstimate, estimate_G, find_peak, frequency_grid, sample_draws, spectrum_from_draws
from qspec.evolution import DEFAULT_QUBIT_CAP, ExactEngine, TrotterEngine, build_trotter_plan, diagonalize
from qspec.filters import GaussianFilter
from qspec.momentum import dispersion_to_csv, estimate_site_spectra, extract_dispersion, spatial_fourier
from qspec.noise import (
    DensityMatrixEngine,
    GlobalDepolarizingModel,
    GlobalNoiseEngine,
    LocalDepolarizingModel,
    benchmark_decay,
    benchmark_to_csv,
    depth_to_time,
    fit_lambda,
    mitigate,
)
from qspec.operators import (
    GateOp,
    PauliSum,
    StatePrepSpec,
    build_fermi_hubbard_1d,
    build_heisenberg,
    build_tfim,
    load_pauli_sum,
    prepare_state,
    single_site,
)
from qspec.outputs import OutputStage
from qspec.resources import plan_resources
from qspec.validation import FIXTURE_NAMES, run_fixture

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

AUTO_TRANSITION_FLOOR = 1e-9


# -- config to objects --------------------------------------------------------


def build_hamiltonian(cfg: RunConfig) -> PauliSum:
    m = cfg["model"]
    if m["kind"] == "heisenberg":
        return build_heisenberg(m["n"], m["J"], m["h_z"], m["periodic"])
    if m["kind"] == "tfim":
        return build_tfim(m["n"], m["J"], m["h_x"], m["h_z"], m["periodic"])
    if m["kind"] == "fermi_hubbard":
        return build_fermi_hubbard_1d(m["n_sites"], m["t_hop"], m["U"])
    return load_pauli_sum(cfg.resolve_path(m["path"]))


def build_state(cfg: RunConfig, n: int) -> np.ndarray:
    s = cfg["state_prep"]
    amps = None
    if s["amplitudes"] is not None:
        amps = tuple(complex(*a) if isinstance(a, list) else complex(a) for a in s["amplitudes"])
    spec = StatePrepSpec(
        base=s["base"],
        operations=tuple(GateOp(op["site"], op["gate"], op["theta"]) for op in s["operations"]),
        amplitudes=amps,
        beta=s["beta"],
    )
    try:
        return prepare_state(spec, n)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"state_prep: {exc}") from exc


def build_observables(cfg: RunConfig, n: int) -> list[PauliSum]:
    o = cfg["observable"]
    if o["kind"] == "pauli_file":
        obs = load_pauli_sum(cfg.resolve_path(o["path"]))
        if obs.n_qubits != n:
            raise ConfigError(f"observable.path: {obs.n_qubits} qubits, model has {n}")
        return [obs]
    if o["kind"] == "pauli":
        if o["site"] >= n:
            raise ConfigError(f"observable.site: {o['site']} out of range for {n} qubits")
        return [PauliSum.single(single_site(o["letter"], o["site"], n))]
    return [PauliSum.single(single_site(o["letter"], x, n)) for x in range(n)]


def _noise_model(cfg: RunConfig):
    nz = cfg["noise"]
    if nz is None:
        return None
    if nz["kind"] == "global":
        return GlobalDepolarizingModel(nz["lambda"])
    return LocalDepolarizingModel(nz["p_gate"])


def _plan_rate(cfg: RunConfig) -> float:
    eng = cfg["engine"]
    if eng["kind"] == "trotter":
        return eng["steps_per_unit_time"]
    bench = cfg["benchmark"]
    if bench is not None:
        return 1.0 / bench["dt"]
    raise ConfigError("noise.kind: local noise needs engine.kind 'trotter' or a benchmark.dt")


def build_engine(cfg: RunConfig, H: PauliSum, with_noise: bool = True):
    eng = cfg["engine"]
    model = _noise_model(cfg) if with_noise else None
    if isinstance(model, LocalDepolarizingModel):
        return DensityMatrixEngine(build_trotter_plan(H, _plan_rate(cfg)), model)
    if eng["kind"] == "trotter":
        if H.n_qubits > DEFAULT_QUBIT_CAP:
            raise ResourceCapError(f"{H.n_qubits} qubits exceeds the statevector cap {DEFAULT_QUBIT_CAP}")
        base = TrotterEngine(build_trotter_plan(H, eng["steps_per_unit_time"]))
    else:
        base = ExactEngine.from_hamiltonian(H)
    if isinstance(model, GlobalDepolarizingModel):
        return GlobalNoiseEngine(base, model)
    return base


def _ed_for(engine, H: PauliSum):
    inner = getattr(engine, "base", engine)
    if isinstance(inner, ExactEngine):
        return inner.ed
    return diagonalize(H)


def _check_auto_feasible(cfg: RunConfig, n: int) -> None:
    if not cfg.auto_filter:
        return
    a = cfg["filter"]["auto"]
    if (a["gamma"] is None or a["weight"] is None) and n > COHERENCE_QUBIT_CAP:
        raise ResourceCapError(
            f"auto filter needs exact diagonalization, infeasible for {n} qubits "
            f"(cap {COHERENCE_QUBIT_CAP}); set filter.auto.gamma and filter.auto.weight manually"
        )


def resolve_filter(
    cfg: RunConfig, H: PauliSum, psi: np.ndarray, O: PauliSum, engine
) -> tuple[RunConfig, GaussianFilter, dict]:
    """Return the config with explicit ``tau``, ``T`` and ``n_samples`` filled in."""
    filt = cfg["filter"]
    sampling = dict(cfg["sampling"])
    provenance = dict(cfg.data.get("provenance", {}))
    if "auto" not in filt:
        f = GaussianFilter(filt["tau"], filt["T"])
        return cfg, f, provenance
    a = filt["auto"]
    gamma, weight = a["gamma"], a["weight"]
    target = None
    if gamma is None or weight is None:
        _check_auto_feasible(cfg, H.n_qubits)
        ct = coherence_table(_ed_for(engine, H), psi, O)
        idx = [j for j in ct.significant(AUTO_TRANSITION_FLOOR) if ct.transitions[j] > AUTO_TRANSITION_FLOOR]
        if not idx:
            raise ConfigError("filter.auto: the state and observable show no nonzero transition")
        j = max(idx, key=lambda i: abs(ct.weights[i]))
        target = float(ct.transitions[j])
        if gamma is None:
            gamma = float(ct.gaps[j])
            if not math.isfinite(gamma):
                raise ConfigError("filter.auto: single isolated transition; set filter.auto.gamma")
        if weight is None:
            weight = min(float(abs(ct.weights[j])), 1.0)
    try:
        plan = plan_resources(gamma, a["eps"], weight, a["delta"], a["log_numerator"])
    except DomainError as exc:
        raise ConfigError(f"filter.auto: {exc}") from exc
    if sampling["n_samples"] is None:
        sampling["n_samples"] = plan.n_samples
    provenance["auto_filter"] = {
        **a,
        "gamma": gamma,
        "weight": weight,
        "target_transition": target,
        "tau": plan.tau,
        "T": plan.cutoff,
        "n_samples_bound": plan.n_samples,
    }
    resolved = cfg.with_updates(
        filter={"tau": plan.tau, "T": plan.cutoff}, sampling=sampling, provenance=provenance
    )
    return resolved, GaussianFilter(plan.tau, plan.cutoff), provenance


def manifest_text(cfg: RunConfig, files: Sequence[str]) -> str:
    """Resolved config as JSON, usable as input from inside the output directory.

    Operator file paths are made absolute and ``outputs.dir`` points at the
    manifest's own directory.
    """
    data = json.loads(cfg.to_json())
    for section in ("model", "observable"):
        if data[section].get("kind") == "pauli_file":
            data[section]["path"] = str(cfg.resolve_path(data[section]["path"]).resolve())
    data["outputs"] = {"dir": "."}
    prov = dict(data.get("provenance", {}))
    prov["outputs"] = sorted(set(files) | {"manifest.json"})
    data["provenance"] = prov
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def coherence_csv(ct: CoherenceTable, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("n_prime", "n", "delta", "gamma_re", "gamma_im"))
        for n_p, n, d, g in ct.rows():
            w.writerow([n_p, n, repr(d), repr(g.real), repr(g.imag)])


def _grid(cfg: RunConfig) -> np.ndarray:
    w = cfg["omega"]
    return frequency_grid(w["min"], w["max"], w["resolution"])


def _prepare(cfg: RunConfig, seed: int | None):
    if seed is not None:
        cfg = cfg.with_updates(sampling={**cfg["sampling"], "seed": seed})
    H = build_hamiltonian(cfg)
    n = H.n_qubits
    return cfg, H, n, build_state(cfg, n), build_observables(cfg, n)


# -- verbs --------------------------------------------------------------------


def run_spectrum(cfg: RunConfig, out_dir: Path, seed: int | None = None, workers: int = 1) -> list[str]:
    if cfg["observable"]["kind"] == "site_family":
        raise ConfigError("observable.kind: site_family needs the 'dispersion' verb")
    if cfg["noise"] is not None and cfg["noise"]["mitigate"]:
        raise ConfigError("noise.mitigate: mitigation needs decay fits; use the 'noise-bench' verb")
    cfg, H, n, psi, (O,) = _prepare(cfg, seed)
    _check_auto_feasible(cfg, n)
    engine = build_engine(cfg, H)
    cfg, f, _ = resolve_filter(cfg, H, psi, O, engine)
    s = cfg["sampling"]
    grid = _grid(cfg)
    est = estimate_G(psi, engine, O, f, grid, s["n_samples"], shots=s["shots"], seed=s["seed"], workers=workers)
    windows = cfg["peaks"]["windows"] or [[float(grid[0]), float(grid[-1])]]
    try:
        peaks = [find_peak(est, tuple(w)).as_dict() for w in windows]
    except InvalidWindowError as exc:
        raise ConfigError(f"peaks.windows: {exc}") from exc
    with OutputStage(out_dir) as stage:
        est.to_csv(stage.path("spectrum.csv"))
        stage.write_text("peaks.json", json.dumps({"peaks": peaks, "meta": _meta(est)}, indent=2) + "\n")
        if n <= COHERENCE_QUBIT_CAP:
            ct = coherence_table(_ed_for(engine, H), psi, O)
            coherence_csv(ct, stage.path("coherence.csv"))
        stage.write_text("manifest.json", manifest_text(cfg, stage.names))
        return stage.names


def _meta(est: SpectralEstimate) -> dict:
    return {k: v for k, v in est.meta.items() if isinstance(v, (int, float, str, type(None)))}


def run_dispersion(cfg: RunConfig, out_dir: Path, seed: int | None = None, workers: int = 1) -> list[str]:
    if cfg["observable"]["kind"] != "site_family":
        raise ConfigError("observable.kind: the dispersion verb needs a site_family observable")
    if cfg["noise"] is not None and cfg["noise"]["mitigate"]:
        raise ConfigError("noise.mitigate: mitigation needs decay fits; use the 'noise-bench' verb")
    if cfg.auto_filter:
        raise ConfigError("filter.auto: give tau and T explicitly for site-resolved runs")
    cfg, H, n, psi, obs = _prepare(cfg, seed)
    if n < 2:
        raise ConfigError("model: the spatial Fourier transform needs at least 2 sites")
    engine = build_engine(cfg, H)
    f = GaussianFilter(cfg["filter"]["tau"], cfg["filter"]["T"])
    s = cfg["sampling"]
    grid = _grid(cfg)
    spectra = estimate_site_spectra(psi, engine, obs, f, grid, s["n_samples"], shots=s["shots"],
                                    seed=s["seed"], workers=workers)
    momentum = spatial_fourier(spectra)
    d = cfg["dispersion"]
    window = tuple(d["window"]) if d["window"] else (float(grid[0]), float(grid[-1]))
    try:
        points = extract_dispersion(momentum, window, floor=d["floor"], remove_k0=d["remove_k0"])
    except InvalidWindowError as exc:
        raise ConfigError(f"dispersion.window: {exc}") from exc
    with OutputStage(out_dir) as stage:
        momentum.to_csv(stage.path("momentum.csv"))
        dispersion_to_csv(points, stage.path("dispersion.csv"))
        stage.write_text("manifest.json", manifest_text(cfg, stage.names))
        return stage.names


def run_noise_benchmark(cfg: RunConfig, out_dir: Path, seed: int | None = None, workers: int = 1) -> list[str]:
    if cfg["noise"] is None:
        raise ConfigError("noise: the noise-bench verb needs a noise model")
    if cfg["benchmark"] is None:
        raise ConfigError("benchmark: the noise-bench verb needs depths and dt")
    if cfg.auto_filter:
        raise ConfigError("filter.auto: give tau and T explicitly for noise benchmarks")
    cfg, H, n, psi, obs = _prepare(cfg, seed)
    model = _noise_model(cfg)
    bench = cfg["benchmark"]
    plan = build_trotter_plan(H, _plan_rate(cfg))
    total = obs[0] if len(obs) == 1 else sum(obs[1:], obs[0])
    series = benchmark_decay(plan, psi, model, [total, *obs], bench["depths"], bench["dt"])
    fit_total = fit_lambda(depth_to_time(series[0], bench["dt"]))
    fits = [fit_lambda(depth_to_time(s_, bench["dt"])) for s_ in series[1:]]
    with OutputStage(out_dir) as stage:
        benchmark_to_csv(series[0], stage.path("benchmark.csv"))
        stage.write_text("decay_fit.json", json.dumps(fit_total.as_dict(), indent=2) + "\n")
        if len(obs) > 1:
            stage.write_text("decay_fits.json", json.dumps([f_.as_dict() for f_ in fits], indent=2) + "\n")
        if cfg["noise"]["mitigate"]:
            s = cfg["sampling"]
            f = GaussianFilter(cfg["filter"]["tau"], cfg["filter"]["T"])
            engine = build_engine(cfg, H)
            draws = sample_draws(psi, engine, obs, f, s["n_samples"], shots=s["shots"], seed=s["seed"],
                                 workers=workers)
            grid = _grid(cfg)
            for label, d in (("noisy", draws), ("mitigated", mitigate(draws, fits))):
                averaged = d.with_values(d.values.mean(axis=0, keepdims=True))
                spectrum_from_draws(averaged, grid).to_csv(stage.path(f"spectrum_{label}.csv"))
        stage.write_text("manifest.json", manifest_text(cfg, stage.names))
        return stage.names


def run_validate(fixtures: Sequence[str], out_dir: Path | None, seed: int, workers: int) -> bool:
    results = []
    for name in fixtures:
        r = run_fixture(name, seed=seed, workers=workers)
        results.append(r)
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {name} ({r.runtime:.1f} s) {json.dumps(r.measured, sort_keys=True)}")
    if out_dir is not None:
        with OutputStage(out_dir) as stage:
            stage.write_text("fixtures.jsonl", "".join(r.to_json() + "\n" for r in results))
    return all(r.passed for r in results)


# -- entry point --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qspec", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_ in (
        ("spectrum", "estimate G(omega) for one observable"),
        ("dispersion", "site-resolved spectra and the momentum-space ridge"),
        ("noise-bench", "decay benchmark, fit and optional mitigation"),
    ):
        p = sub.add_parser(verb, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides outputs.dir)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
    p = sub.add_parser("validate", help="run regression fixtures")
    p.add_argument("--fixtures", default=",".join(FIXTURE_NAMES),
                   help=f"comma-separated subset of {','.join(FIXTURE_NAMES)}")
    p.add_argument("--out", help="directory for fixtures.jsonl")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1)
    return parser


_VERBS = {"spectrum": run_spectrum, "dispersion": run_dispersion, "noise-bench": run_noise_benchmark}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be a non-negative integer")
        if args.verb == "validate":
            names = [s.strip() for s in args.fixtures.split(",") if s.strip()]
            bad = [s for s in names if s not in FIXTURE_NAMES]
            if bad or not names:
                raise ConfigError(f"--fixtures: unknown fixture(s) {', '.join(bad) or '(none given)'}")
            ok = run_validate(names, Path(args.out) if args.out else None, args.seed, args.workers)
            return EXIT_OK if ok else EXIT_VALIDATION
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.resolve_path(cfg["outputs"]["dir"])
        files = _VERBS[args.verb](cfg, out, seed=args.seed, workers=args.workers)
        print(f"wrote {', '.join(sorted(files))} to {out}")
        return EXIT_OK
    except (ConfigError, PauliParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
