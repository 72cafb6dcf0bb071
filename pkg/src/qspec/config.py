"""Versioned JSON run configuration with strict, field-level validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from qspec.errors import ConfigError

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema": True,
    "model": True,
    "state_prep": True,
    "observable": True,
    "filter": True,
    "omega": True,
    "sampling": True,
    "engine": False,
    "noise": False,
    "peaks": False,
    "dispersion": False,
    "benchmark": False,
    "outputs": False,
    "provenance": False,
}

_MODEL_KEYS = {
    "heisenberg": ({"kind", "n"}, {"J", "h_z", "periodic"}),
    "tfim": ({"kind", "n"}, {"J", "h_x", "h_z", "periodic"}),
    "fermi_hubbard": ({"kind", "n_sites"}, {"t_hop", "U"}),
    "pauli_file": ({"kind", "path"}, set()),
}
_OBSERVABLE_KEYS = {
    "pauli": ({"kind", "letter", "site"}, set()),
    "site_family": ({"kind", "letter"}, set()),
    "pauli_file": ({"kind", "path"}, set()),
}
_DEFAULTS = {
    "heisenberg": {"J": 1.0, "h_z": 0.0, "periodic": True},
    "tfim": {"J": 1.0, "h_x": 1.0, "h_z": 0.0, "periodic": True},
    "fermi_hubbard": {"t_hop": 1.0, "U": 0.0},
}


def _fail(path: str, msg: str) -> None:
    raise ConfigError(f"{path}: {msg}")


def _obj(data: Any, path: str) -> dict:
    if not isinstance(data, dict):
        _fail(path, f"expected an object, got {type(data).__name__}")
    return data


def _keys(data: dict, path: str, required: set[str], optional: set[str]) -> None:
    unknown = sorted(set(data) - required - optional)
    if unknown:
        _fail(path, f"unknown field(s) {', '.join(unknown)}")
    missing = sorted(required - set(data))
    if missing:
        _fail(path, f"missing field(s) {', '.join(missing)}")


def _num(data: dict, key: str, path: str, positive: bool = False, nonneg: bool = False) -> float:
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{path}.{key}", f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        _fail(f"{path}.{key}", f"must be > 0, got {v}")
    if nonneg and v < 0:
        _fail(f"{path}.{key}", f"must be >= 0, got {v}")
    return float(v)


def _int(data: dict, key: str, path: str, minimum: int | None = None) -> int:
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}.{key}", f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    return v


def _bool(data: dict, key: str, path: str) -> bool:
    v = data[key]
    if not isinstance(v, bool):
        _fail(f"{path}.{key}", f"expected true/false, got {v!r}")
    return v


def _kinded(data: Any, path: str, table: dict) -> dict:
    data = _obj(data, path)
    kind = data.get("kind")
    if kind not in table:
        _fail(f"{path}.kind", f"expected one of {sorted(table)}, got {kind!r}")
    required, optional = table[kind]
    _keys(data, path, required, optional)
    return data


def _validate_model(m: dict) -> dict:
    m = _kinded(m, "model", _MODEL_KEYS)
    out = {**_DEFAULTS.get(m["kind"], {}), **m}
    kind = out["kind"]
    if kind in ("heisenberg", "tfim"):
        _int(out, "n", "model", minimum=2)
        for key in _MODEL_KEYS[kind][1] - {"periodic"}:
            out[key] = _num(out, key, "model")
        _bool(out, "periodic", "model")
    elif kind == "fermi_hubbard":
        _int(out, "n_sites", "model", minimum=2)
        out["t_hop"] = _num(out, "t_hop", "model")
        out["U"] = _num(out, "U", "model")
    elif not isinstance(out["path"], str):
        _fail("model.path", "expected a file path string")
    return out


def _validate_state(s: Any) -> dict:
    s = _obj(s, "state_prep")
    _keys(s, "state_prep", {"base"}, {"operations", "amplitudes", "beta"})
    out = {"base": s["base"], "operations": [], "amplitudes": None, "beta": None, **s}
    if out["base"] not in ("all-plus", "all-zero", "custom"):
        _fail("state_prep.base", f"expected all-plus, all-zero or custom, got {out['base']!r}")
    ops = out["operations"]
    if not isinstance(ops, list):
        _fail("state_prep.operations", "expected a list")
    clean = []
    for i, op in enumerate(ops):
        p = f"state_prep.operations[{i}]"
        op = _obj(op, p)
        _keys(op, p, {"site", "gate"}, {"theta"})
        _int(op, "site", p, minimum=0)
        gate = op["gate"]
        if gate not in ("X", "Y", "Z", "RX", "RY", "RZ"):
            _fail(f"{p}.gate", f"unknown gate {gate!r}")
        theta = None
        if gate.startswith("R"):
            if "theta" not in op:
                _fail(f"{p}.theta", f"rotation {gate} needs an angle")
            theta = _num(op, "theta", p)
        elif op.get("theta") is not None:
            _fail(f"{p}.theta", f"gate {gate} takes no angle")
        clean.append({"site": op["site"], "gate": gate, "theta": theta})
    out["operations"] = clean
    if out["base"] == "custom":
        amps = out["amplitudes"]
        if not isinstance(amps, list) or not amps:
            _fail("state_prep.amplitudes", "custom base needs a list of amplitudes")
        for i, a in enumerate(amps):
            ok = (isinstance(a, (int, float)) and not isinstance(a, bool)) or (
                isinstance(a, list) and len(a) == 2 and all(isinstance(x, (int, float)) for x in a)
            )
            if not ok:
                _fail(f"state_prep.amplitudes[{i}]", "expected a number or [re, im]")
    elif out["amplitudes"] is not None:
        _fail("state_prep.amplitudes", "only allowed with base 'custom'")
    if out["beta"] is not None:
        _num(out, "beta", "state_prep")
    return out


def _validate_observable(o: Any) -> dict:
    o = _kinded(o, "observable", _OBSERVABLE_KEYS)
    if o["kind"] in ("pauli", "site_family") and o["letter"] not in ("X", "Y", "Z"):
        _fail("observable.letter", f"expected X, Y or Z, got {o['letter']!r}")
    if o["kind"] == "pauli":
        _int(o, "site", "observable", minimum=0)
    return dict(o)


def _validate_filter(f: Any) -> dict:
    f = _obj(f, "filter")
    if "auto" in f:
        _keys(f, "filter", {"auto"}, set())
        a = _obj(f["auto"], "filter.auto")
        _keys(a, "filter.auto", {"eps", "delta"}, {"gamma", "weight", "log_numerator"})
        out = {"gamma": None, "weight": None, "log_numerator": 20.0, **a}
        _num(out, "eps", "filter.auto", positive=True)
        d = _num(out, "delta", "filter.auto", positive=True)
        if d >= 1:
            _fail("filter.auto.delta", f"failure probability must be < 1, got {d}")
        for key in ("gamma", "weight"):
            if out[key] is not None:
                _num(out, key, "filter.auto", positive=True)
        if out["log_numerator"] not in (10, 20, 10.0, 20.0):
            _fail("filter.auto.log_numerator", "expected 10 or 20")
        return {"auto": out}
    _keys(f, "filter", {"tau", "T"}, set())
    return {"tau": _num(f, "tau", "filter", positive=True), "T": _num(f, "T", "filter", positive=True)}


def _validate_omega(w: Any) -> dict:
    w = _obj(w, "omega")
    _keys(w, "omega", {"min", "max", "resolution"}, set())
    lo, hi = _num(w, "min", "omega"), _num(w, "max", "omega")
    res = _num(w, "resolution", "omega")
    if not res > 0:
        _fail("omega.resolution", f"must be > 0, got {res}")
    if not hi > lo:
        _fail("omega", f"min must be < max, got {lo} >= {hi}")
    return {"min": lo, "max": hi, "resolution": res}


def _validate_sampling(s: Any, auto_filter: bool) -> dict:
    s = _obj(s, "sampling")
    _keys(s, "sampling", {"seed"}, {"n_samples", "shots"})
    out = {"n_samples": None, "shots": None, **s}
    _int(out, "seed", "sampling", minimum=0)
    if out["n_samples"] is None:
        if not auto_filter:
            _fail("sampling.n_samples", "required unless the filter is auto")
    else:
        _int(out, "n_samples", "sampling", minimum=1)
    if out["shots"] is not None:
        _int(out, "shots", "sampling", minimum=1)
    return out


def _validate_engine(e: Any) -> dict:
    e = _obj(e, "engine")
    kind = e.get("kind")
    if kind == "exact":
        _keys(e, "engine", {"kind"}, set())
        return {"kind": "exact"}
    if kind == "trotter":
        _keys(e, "engine", {"kind", "steps_per_unit_time"}, set())
        return {"kind": "trotter", "steps_per_unit_time": _num(e, "steps_per_unit_time", "engine", positive=True)}
    _fail("engine.kind", f"expected exact or trotter, got {kind!r}")


def _validate_noise(n: Any) -> dict | None:
    if n is None:
        return None
    n = _obj(n, "noise")
    kind = n.get("kind")
    if kind == "global":
        _keys(n, "noise", {"kind", "lambda"}, {"mitigate"})
        out = {"mitigate": False, **n}
        _num(out, "lambda", "noise", nonneg=True)
    elif kind == "local":
        _keys(n, "noise", {"kind", "p_gate"}, {"mitigate"})
        out = {"mitigate": False, **n}
        p = _num(out, "p_gate", "noise", nonneg=True)
        if p >= 1:
            _fail("noise.p_gate", f"must be < 1, got {p}")
    else:
        _fail("noise.kind", f"expected global or local, got {kind!r}")
    _bool(out, "mitigate", "noise")
    return out


def _validate_peaks(p: Any) -> dict:
    p = _obj(p, "peaks")
    _keys(p, "peaks", set(), {"windows"})
    windows = p.get("windows", [])
    if not isinstance(windows, list):
        _fail("peaks.windows", "expected a list of [a_L, a_R] pairs")
    for i, w in enumerate(windows):
        if not (isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w)):
            _fail(f"peaks.windows[{i}]", "expected [a_L, a_R]")
        if not w[0] < w[1]:
            _fail(f"peaks.windows[{i}]", "requires a_L < a_R")
    return {"windows": [[float(a), float(b)] for a, b in windows]}


def _validate_dispersion(d: Any) -> dict:
    d = _obj(d, "dispersion")
    _keys(d, "dispersion", set(), {"window", "remove_k0", "floor"})
    out = {"window": None, "remove_k0": True, "floor": 1e-3, **d}
    if out["window"] is not None:
        w = out["window"]
        if not (isinstance(w, list) and len(w) == 2 and w[0] < w[1]):
            _fail("dispersion.window", "expected [lo, hi] with lo < hi")
        out["window"] = [float(w[0]), float(w[1])]
    _bool(out, "remove_k0", "dispersion")
    _num(out, "floor", "dispersion", nonneg=True)
    return out


def _validate_benchmark(b: Any) -> dict:
    b = _obj(b, "benchmark")
    _keys(b, "benchmark", {"depths", "dt"}, set())
    depths = b["depths"]
    if not isinstance(depths, list) or not depths or not all(
        isinstance(m, int) and not isinstance(m, bool) and m >= 0 for m in depths
    ):
        _fail("benchmark.depths", "expected a nonempty list of non-negative integers")
    return {"depths": list(depths), "dt": _num(b, "dt", "benchmark", positive=True)}


def _validate_outputs(o: Any) -> dict:
    o = _obj(o, "outputs")
    _keys(o, "outputs", set(), {"dir"})
    out = {"dir": "out", **o}
    if not isinstance(out["dir"], str):
        _fail("outputs.dir", "expected a directory path string")
    return out


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration; ``data`` is the normalised JSON object."""

    data: dict
    base_dir: Path = Path(".")

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    @property
    def n_qubits(self) -> int | None:
        m = self.data["model"]
        if m["kind"] in ("heisenberg", "tfim"):
            return m["n"]
        if m["kind"] == "fermi_hubbard":
            return 2 * m["n_sites"]
        return None

    @property
    def auto_filter(self) -> bool:
        return "auto" in self.data["filter"]

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def with_updates(self, **sections: Any) -> RunConfig:
        data = copy.deepcopy(self.data)
        data.update(sections)
        return validate(data, self.base_dir)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def validate(raw: Any, base_dir: str | Path = ".") -> RunConfig:
    raw = _obj(raw, "config")
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        _fail("config", f"unknown field(s) {', '.join(unknown)}")
    missing = sorted(k for k, req in _TOP_KEYS.items() if req and k not in raw)
    if missing:
        _fail("config", f"missing field(s) {', '.join(missing)}")
    if raw["schema"] != SCHEMA_VERSION or isinstance(raw["schema"], bool):
        _fail("schema", f"unsupported schema version {raw['schema']!r}; expected {SCHEMA_VERSION}")
    filt = _validate_filter(raw["filter"])
    data = {
        "schema": SCHEMA_VERSION,
        "model": _validate_model(raw["model"]),
        "state_prep": _validate_state(raw["state_prep"]),
        "observable": _validate_observable(raw["observable"]),
        "filter": filt,
        "omega": _validate_omega(raw["omega"]),
        "sampling": _validate_sampling(raw["sampling"], "auto" in filt),
        "engine": _validate_engine(raw.get("engine", {"kind": "exact"})),
        "noise": _validate_noise(raw.get("noise")),
        "peaks": _validate_peaks(raw.get("peaks", {})),
        "dispersion": _validate_dispersion(raw.get("dispersion", {})),
        "benchmark": None if raw.get("benchmark") is None else _validate_benchmark(raw["benchmark"]),
        "outputs": _validate_outputs(raw.get("outputs", {})),
    }
    if "provenance" in raw:
        data["provenance"] = _obj(raw["provenance"], "provenance")
    n = None
    if data["model"]["kind"] in ("heisenberg", "tfim"):
        n = data["model"]["n"]
    elif data["model"]["kind"] == "fermi_hubbard":
        n = 2 * data["model"]["n_sites"]
    if n is not None:
        for i, op in enumerate(data["state_prep"]["operations"]):
            if op["site"] >= n:
                _fail(f"state_prep.operations[{i}].site", f"site {op['site']} out of range for {n} qubits")
        if data["observable"]["kind"] == "pauli" and data["observable"]["site"] >= n:
            _fail("observable.site", f"site {data['observable']['site']} out of range for {n} qubits")
        amps = data["state_prep"]["amplitudes"]
        if amps is not None and len(amps) != 1 << n:
            _fail("state_prep.amplitudes", f"expected {1 << n} amplitudes, got {len(amps)}")
    return RunConfig(data=data, base_dir=Path(base_dir))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return validate(raw, path.parent)
