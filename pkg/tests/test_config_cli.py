from __future__ import annotations

import copy
import json
import math
import re

import pytest

from qspec import cli
from qspec.config import SCHEMA_VERSION, load_config, validate
from qspec.errors import ConfigError
from qspec.outputs import OutputStage, atomic_write_text
from qspec.validation import FixtureResult

HALF_PI = math.pi / 2

TWO_LEVEL = {
    "schema": SCHEMA_VERSION,
    "model": {"kind": "pauli_file", "path": "h.pauli"},
    "state_prep": {"base": "all-plus"},
    "observable": {"kind": "pauli", "letter": "X", "site": 0},
    "filter": {"tau": 3.0, "T": 6.0},
    "omega": {"min": -3.0, "max": 3.0, "resolution": 0.01},
    "sampling": {"n_samples": 3000, "seed": 0},
    "peaks": {"windows": [[0.5, 1.5]]},
}

TFIM_FAMILY = {
    "schema": SCHEMA_VERSION,
    "model": {"kind": "tfim", "n": 5, "J": 1.0, "h_x": 2.0, "h_z": 0.1, "periodic": True},
    "state_prep": {"base": "all-zero", "operations": [{"site": q, "gate": "RX", "theta": -HALF_PI} for q in range(5)]},
    "observable": {"kind": "site_family", "letter": "Y"},
    "filter": {"tau": 1.0, "T": 5.0},
    "omega": {"min": -10.0, "max": 10.0, "resolution": 0.1},
    "sampling": {"n_samples": 60, "seed": 0},
    "engine": {"kind": "trotter", "steps_per_unit_time": 2.5},
    "noise": {"kind": "local", "p_gate": 0.005, "mitigate": True},
    "benchmark": {"depths": [0, 2, 4, 6, 8, 10], "dt": 0.4},
}


def _write(tmp_path, data, name="run.json"):
    (tmp_path / "h.pauli").write_text("0.5 Z\n")
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def _run(tmp_path, verb, data, out="out", *extra):
    cfg = _write(tmp_path, data)
    return cli.main([verb, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def _files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# -- config validation -----------------------------------------------------------


def test_valid_config_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, TWO_LEVEL))
    assert cfg["engine"]["kind"] == "exact"
    assert cfg["sampling"]["shots"] is None
    # the qubit count of a file model is only known after parsing the file
    assert cfg.n_qubits is None


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d.update(schema=99), "schema"),
    (lambda d: d.pop("sampling"), "sampling"),
    (lambda d: d["omega"].update(resolution=0.0), "omega.resolution"),
    (lambda d: d["omega"].update(min=5.0), "omega"),
    (lambda d: d["sampling"].update(n_samples=0), "sampling.n_samples"),
    (lambda d: d["filter"].update(tau=-1.0), "filter.tau"),
    (lambda d: d["model"].update(kind="potts"), "model.kind"),
    (lambda d: d["observable"].update(letter="Q"), "observable.letter"),
    (lambda d: d["filter"].update(auto={"eps": 0.1, "delta": 0.05}), "filter"),
    (lambda d: d["state_prep"].update(colour="red"), "state_prep: unknown field(s) colour"),
])
def test_invalid_configs_name_the_field(mutate, field):
    data = copy.deepcopy(TWO_LEVEL)
    mutate(data)
    with pytest.raises(ConfigError, match=re.escape(field)):
        validate(data)


def test_auto_filter_without_sample_count():
    data = copy.deepcopy(TWO_LEVEL)
    data["filter"] = {"auto": {"eps": 0.01, "delta": 0.05}}
    data["sampling"] = {"seed": 0}
    assert validate(data).auto_filter


def test_manifest_is_valid_config(tmp_path):
    assert _run(tmp_path, "spectrum", TWO_LEVEL) == cli.EXIT_OK
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert sorted(manifest["provenance"]["outputs"]) == ["coherence.csv", "manifest.json", "peaks.json", "spectrum.csv"]
    validate(manifest, tmp_path / "out")


# -- spectrum verb ---------------------------------------------------------------


def test_spectrum_outputs(tmp_path):
    assert _run(tmp_path, "spectrum", TWO_LEVEL) == 0
    out = tmp_path / "out"
    peaks = json.loads((out / "peaks.json").read_text())["peaks"]
    assert peaks[0]["delta_hat"] == pytest.approx(1.0, abs=0.02)
    assert (out / "spectrum.csv").read_text().startswith("omega,re,im,abs,stderr\n")
    assert not [p for p in out.iterdir() if p.name.startswith(".")]


def test_spectrum_bit_identical_reruns(tmp_path):
    _run(tmp_path, "spectrum", TWO_LEVEL, "a")
    _run(tmp_path, "spectrum", TWO_LEVEL, "b", "--workers", "2")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_manifest_round_trip_reproduces_outputs(tmp_path):
    _run(tmp_path, "spectrum", TWO_LEVEL, "a")
    manifest = tmp_path / "a" / "manifest.json"
    assert cli.main(["spectrum", "--config", str(manifest), "--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_seed_override_changes_draws(tmp_path):
    _run(tmp_path, "spectrum", TWO_LEVEL, "a")
    _run(tmp_path, "spectrum", TWO_LEVEL, "b", "--seed", "7")
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() != (tmp_path / "b" / "spectrum.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["sampling"]["seed"] == 7


def test_auto_filter_records_resources(tmp_path):
    data = copy.deepcopy(TWO_LEVEL)
    data["filter"] = {"auto": {"eps": 0.05, "delta": 0.05}}
    data["sampling"] = {"n_samples": 500, "seed": 0}
    assert _run(tmp_path, "spectrum", data) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    auto = manifest["provenance"]["auto_filter"]
    # the two transitions at +-1 are 2 apart with weight 1/2 each
    assert auto["tau"] == pytest.approx(math.sqrt(math.log(20 / (0.05**2 * 0.5))) / (0.9 * 2.0))
    assert manifest["filter"]["tau"] == auto["tau"]


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d["omega"].update(resolution=0), cli.EXIT_CONFIG),
    (lambda d: d.pop("model"), cli.EXIT_CONFIG),
    (lambda d: d.update(peaks={"windows": [[20.0, 30.0]]}), cli.EXIT_CONFIG),
    (lambda d: d["observable"].update(kind="site_family"), cli.EXIT_CONFIG),
])
def test_spectrum_error_exit_codes(tmp_path, mutate, code):
    data = copy.deepcopy(TWO_LEVEL)
    mutate(data)
    assert _run(tmp_path, "spectrum", data) == code
    assert not (tmp_path / "out").exists() or not list((tmp_path / "out").iterdir())


def test_bad_pauli_file_is_config_error(tmp_path, capsys):
    path = _write(tmp_path, TWO_LEVEL)
    (tmp_path / "h.pauli").write_text("0.5 Z\nbroken\n")
    assert cli.main(["spectrum", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_auto_filter_on_large_chain_is_resource_error(tmp_path, capsys):
    data = copy.deepcopy(TWO_LEVEL)
    data["model"] = {"kind": "heisenberg", "n": 12, "J": -1.0, "h_z": -0.01, "periodic": True}
    data["filter"] = {"auto": {"eps": 0.005, "delta": 0.05}}
    assert _run(tmp_path, "spectrum", data) == cli.EXIT_RESOURCE
    assert "gamma" in capsys.readouterr().err


def test_failure_mid_run_leaves_no_files(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConfigError("injected")

    monkeypatch.setattr(cli, "coherence_csv", boom)
    assert _run(tmp_path, "spectrum", TWO_LEVEL) == cli.EXIT_CONFIG
    assert list((tmp_path / "out").iterdir()) == []


def test_output_stage_keeps_previous_outputs(tmp_path):
    atomic_write_text(tmp_path / "a.txt", "old")
    with pytest.raises(RuntimeError):
        with OutputStage(tmp_path) as stage:
            stage.write_text("a.txt", "new")
            raise RuntimeError
    assert (tmp_path / "a.txt").read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]


# -- dispersion and noise verbs -----------------------------------------------------


def test_dispersion_outputs(tmp_path):
    data = copy.deepcopy(TFIM_FAMILY)
    data.pop("noise")
    data.pop("benchmark")
    data["engine"] = {"kind": "exact"}
    data["state_prep"] = {"base": "all-plus", "operations": [{"site": 2, "gate": "RY", "theta": HALF_PI}]}
    data["dispersion"] = {"window": [0.5, 8.0], "remove_k0": True}
    assert _run(tmp_path, "dispersion", data) == 0
    rows = (tmp_path / "out" / "dispersion.csv").read_text().splitlines()
    assert rows[0] == "k_index,k,omega_star,intensity"
    assert len(rows) == 6
    assert rows[1].split(",")[2] == ""


def test_dispersion_uniform_quench_all_absent(tmp_path):
    data = copy.deepcopy(TFIM_FAMILY)
    data.pop("noise")
    data.pop("benchmark")
    data["engine"] = {"kind": "exact"}
    data["observable"] = {"kind": "site_family", "letter": "X"}
    data["state_prep"] = {"base": "all-plus"}
    data["dispersion"] = {"window": [0.5, 8.0], "remove_k0": True}
    assert _run(tmp_path, "dispersion", data) == 0
    rows = (tmp_path / "out" / "dispersion.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] == "" for r in rows)


def test_noise_bench_with_mitigation(tmp_path):
    assert _run(tmp_path, "noise-bench", TFIM_FAMILY) == 0
    out = tmp_path / "out"
    names = {p.name for p in out.iterdir()}
    assert {"benchmark.csv", "decay_fit.json", "spectrum_noisy.csv", "spectrum_mitigated.csv"} <= names
    fit = json.loads((out / "decay_fit.json").read_text())
    assert fit["r_squared"] >= 0.99


def test_noise_bench_without_mitigation(tmp_path):
    data = copy.deepcopy(TFIM_FAMILY)
    data["noise"]["mitigate"] = False
    assert _run(tmp_path, "noise-bench", data) == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert "spectrum_mitigated.csv" not in names
    assert "spectrum_noisy.csv" not in names


def test_noise_bench_global_round_trip(tmp_path):
    data = copy.deepcopy(TFIM_FAMILY)
    data["noise"] = {"kind": "global", "lambda": 0.05, "mitigate": False}
    assert _run(tmp_path, "noise-bench", data) == 0
    fit = json.loads((tmp_path / "out" / "decay_fit.json").read_text())
    assert fit["lambda_hat"] == pytest.approx(0.05, rel=0.05)


def test_noise_bench_requires_noise(tmp_path):
    data = copy.deepcopy(TFIM_FAMILY)
    data.pop("noise")
    assert _run(tmp_path, "noise-bench", data) == cli.EXIT_CONFIG


# -- validate verb ---------------------------------------------------------------------


def test_validate_pass(tmp_path, capsys):
    assert cli.main(["validate", "--fixtures", "two_level", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert capsys.readouterr().out.startswith("PASS two_level")
    line = json.loads((tmp_path / "fixtures.jsonl").read_text())
    assert line["name"] == "two_level" and line["passed"]


def test_validate_failure_exit_code(monkeypatch, capsys):
    def failing(name, seed=0, workers=1):
        return FixtureResult(name, {"x": 2.0}, {"x": (0.0, 1.0)})

    monkeypatch.setattr(cli, "run_fixture", failing)
    assert cli.main(["validate", "--fixtures", "two_level"]) == cli.EXIT_VALIDATION
    assert capsys.readouterr().out.startswith("FAIL two_level")


def test_validate_unknown_fixture():
    assert cli.main(["validate", "--fixtures", "nope"]) == cli.EXIT_CONFIG
