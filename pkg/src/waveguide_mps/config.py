"""Experiment configuration: TOML schema, validation and dotted-key overrides.

Schema (version 1)::

    schema = 1
    [run]      mode, output, t_out, snapshot_stride, two_photon_map, strict
    [model]    n_cav, epsilon, hopping, n_max, coupling, dicke_cap, max_local_dim
    [[model.scatterers]]  position, delta, g | g_collective, kind, count, n_osc
    [model.array]         n, spacing, center, delta, g, kind, n_osc
    [packet]   x_in, theta, k_in, n_photons
    [engine]   every EngineConfig field
    [sweep]    style = "product" | "zip", [sweep.axes] dotted-key = [values]

``model.array`` places ``n`` identical qubits ``spacing`` sites apart around
``center``; ``spacing = 0`` fuses them into one collective group. A scatterer
given ``g_collective`` gets ``g = g_collective / sqrt(count)``.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from .errors import ConfigurationError
from .model import ModelSpec, ScattererSpec
from .scattering import EngineConfig, ScatteringRun, Wavepacket

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "SweepSpec",
    "apply_override",
    "bundled_config",
    "bundled_names",
    "load_config",
    "parse_config",
    "parse_override",
]

SCHEMA_VERSION = 1
MODES = ("ground-state", "scatter", "sweep", "oracle")
_BUNDLED = Path(__file__).parent / "configs"

_TOP = {"schema", "run", "model", "packet", "engine", "sweep"}
_RUN_KEYS = {"mode", "output", "t_out", "snapshot_stride", "two_photon_map", "strict"}
_MODEL_KEYS = {f.name for f in fields(ModelSpec)} | {"array"}
_SCATTERER_KEYS = {f.name for f in fields(ScattererSpec)} | {"g_collective"}
_ARRAY_KEYS = {"n", "spacing", "center", "delta", "g", "kind", "n_osc"}
_PACKET_KEYS = {f.name for f in fields(Wavepacket)}
_ENGINE_KEYS = {f.name for f in fields(EngineConfig)}


@dataclass(frozen=True)
class SweepSpec:
    """Sweep axes as dotted config keys mapped to value lists."""

    axes: dict = field(default_factory=dict)
    style: str = "product"

    def points(self) -> list[dict]:
        if not self.axes:
            return [{}]
        keys = list(self.axes)
        if self.style == "zip":
            return [dict(zip(keys, vals)) for vals in zip(*(self.axes[k] for k in keys))]
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.axes[k] for k in keys))]


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: model, packet, engine parameters, run mode and sweep axes."""

    raw: dict
    model: ModelSpec
    packet: Wavepacket | None
    engine: EngineConfig
    mode: str = "scatter"
    output: str = "runs/out"
    t_out: float | None = None
    snapshot_stride: int = 20
    two_photon_map: bool | None = None
    strict: bool = False
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def scattering_run(self) -> ScatteringRun:
        if self.packet is None:
            raise ConfigurationError("a [packet] table is required for scattering", "packet")
        return ScatteringRun(
            self.model,
            self.packet,
            t_out=self.t_out,
            engine=self.engine,
            snapshot_stride=self.snapshot_stride,
            two_photon_map=self.two_photon_map,
            strict=self.strict,
        )

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        for key, value in overrides.items():
            apply_override(raw, key, value)
        return parse_config(raw)


# --- parsing ------------------------------------------------------------------------

def _table(raw: dict, key: str, allowed: set, where: str) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        raise ConfigurationError("must be a table", f"{where}{key}")
    unknown = sorted(set(val) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key {unknown[0]!r}", f"{where}{key}.{unknown[0]}")
    return val


def _build(cls, kwargs: dict, where: str):
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        name = f"{where}.{exc.field}" if exc.field else where
        raise ConfigurationError(str(exc).split(": ", 1)[-1], name) from None
    except TypeError as exc:
        raise ConfigurationError(str(exc), where) from None


def _check_types(values: dict, where: str, specs: dict) -> None:
    for key, val in values.items():
        want = specs.get(key)
        if want is None:
            continue
        ok = isinstance(val, want) and not (isinstance(val, bool) and bool not in _as_tuple(want))
        if not ok:
            names = "/".join(t.__name__ for t in _as_tuple(want))
            raise ConfigurationError(f"expected {names}, got {type(val).__name__} {val!r}", f"{where}.{key}")


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


_NUM = (int, float)
_MODEL_TYPES = {"n_cav": int, "epsilon": _NUM, "hopping": _NUM, "n_max": int, "coupling": str,
                "dicke_cap": int, "max_local_dim": int}
_SCATTERER_TYPES = {"position": int, "delta": _NUM, "g": _NUM, "g_collective": _NUM, "kind": str,
                    "count": int, "n_osc": int}
_ARRAY_TYPES = {"n": int, "spacing": int, "center": int, "delta": _NUM, "g": _NUM, "kind": str, "n_osc": int}
_PACKET_TYPES = {"x_in": int, "theta": _NUM, "k_in": _NUM, "n_photons": int}
_ENGINE_TYPES = {f.name: (int if f.type in ("int", int) else _NUM) for f in fields(EngineConfig)}
_RUN_TYPES = {"mode": str, "output": str, "t_out": _NUM, "snapshot_stride": int,
              "two_photon_map": bool, "strict": bool}


def _scatterers(model_raw: dict) -> tuple:
    out = []
    items = model_raw.get("scatterers", [])
    if not isinstance(items, list):
        raise ConfigurationError("must be an array of tables", "model.scatterers")
    for i, sc in enumerate(items):
        where = f"model.scatterers.{i}"
        if not isinstance(sc, dict):
            raise ConfigurationError("must be a table", where)
        unknown = sorted(set(sc) - _SCATTERER_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown key {unknown[0]!r}", f"{where}.{unknown[0]}")
        _check_types(sc, where, _SCATTERER_TYPES)
        sc = dict(sc)
        if "g_collective" in sc:
            if "g" in sc:
                raise ConfigurationError("give either g or g_collective", f"{where}.g_collective")
            gc = sc.pop("g_collective")
            sc["g"] = gc / math.sqrt(sc.get("count", 1)) if sc.get("kind", "qubit") == "qubit" else gc
        if "position" not in sc:
            raise ConfigurationError("missing", f"{where}.position")
        out.append(_build(ScattererSpec, sc, where))
    arr = model_raw.get("array")
    if arr is not None:
        if not isinstance(arr, dict):
            raise ConfigurationError("must be a table", "model.array")
        unknown = sorted(set(arr) - _ARRAY_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown key {unknown[0]!r}", f"model.array.{unknown[0]}")
        _check_types(arr, "model.array", _ARRAY_TYPES)
        n = arr.get("n", 1)
        spacing = arr.get("spacing", 0)
        center = arr.get("center", 0)
        if n < 1:
            raise ConfigurationError("must be >= 1", "model.array.n")
        if spacing < 0:
            raise ConfigurationError("must be >= 0", "model.array.spacing")
        common = {k: arr[k] for k in ("delta", "g", "kind", "n_osc") if k in arr}
        if spacing == 0:
            out.append(_build(ScattererSpec, {"position": center, "count": n, **common}, "model.array"))
        else:
            first = center - spacing * (n - 1) // 2
            for j in range(n):
                out.append(_build(ScattererSpec, {"position": first + j * spacing, **common}, "model.array"))
    return tuple(out)


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a parsed TOML document; every failure names the offending field."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a table", "<root>")
    unknown = sorted(set(raw) - _TOP)
    if unknown:
        raise ConfigurationError(f"unknown top-level key {unknown[0]!r}", unknown[0])
    schema = raw.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema version {schema!r}", "schema")

    run = _table(raw, "run", _RUN_KEYS, "")
    _check_types(run, "run", _RUN_TYPES)
    mode = run.get("mode", "scatter")
    if mode not in MODES:
        raise ConfigurationError(f"must be one of {', '.join(MODES)}", "run.mode")

    model_raw = _table(raw, "model", _MODEL_KEYS, "")
    _check_types({k: v for k, v in model_raw.items() if k not in ("scatterers", "array")}, "model", _MODEL_TYPES)
    scatterers = _scatterers(model_raw)
    model_kw = {k: v for k, v in model_raw.items() if k not in ("scatterers", "array")}
    model = _build(ModelSpec, {**model_kw, "scatterers": scatterers}, "model")

    packet = None
    if "packet" in raw:
        p = _table(raw, "packet", _PACKET_KEYS, "")
        _check_types(p, "packet", _PACKET_TYPES)
        for req in ("x_in", "theta"):
            if req not in p:
                raise ConfigurationError("missing", f"packet.{req}")
        packet = _build(Wavepacket, p, "packet")

    eng = _table(raw, "engine", _ENGINE_KEYS, "")
    _check_types(eng, "engine", _ENGINE_TYPES)
    engine = _build(EngineConfig, eng, "engine")

    sw = _table(raw, "sweep", {"axes", "style"}, "")
    axes = sw.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigurationError("must be a table", "sweep.axes")
    for key, vals in axes.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigurationError("must be a non-empty array", f"sweep.axes.{key}")
    style = sw.get("style", "product")
    if style not in ("product", "zip"):
        raise ConfigurationError("must be 'product' or 'zip'", "sweep.style")
    if style == "zip" and len({len(v) for v in axes.values()}) > 1:
        raise ConfigurationError("zip axes need equal lengths", "sweep.axes")

    cfg = ExperimentConfig(
        raw=raw,
        model=model,
        packet=packet,
        engine=engine,
        mode=mode,
        output=run.get("output", "runs/out"),
        t_out=run.get("t_out"),
        snapshot_stride=run.get("snapshot_stride", 20),
        two_photon_map=run.get("two_photon_map"),
        strict=run.get("strict", False),
        sweep=SweepSpec(dict(axes), style),
    )
    if packet is not None:
        try:
            cfg.scattering_run()
        except ConfigurationError as exc:
            if exc.field in ("t_out", "snapshot_stride"):
                name = f"run.{exc.field}"
            elif exc.field in ("x_in", "theta", "k_in", "n_photons"):
                name = f"packet.{exc.field}"
            else:
                name = "packet"
            raise ConfigurationError(str(exc).split(": ", 1)[-1], name) from None
    if axes:
        for point in cfg.sweep.points():
            try:
                cfg_raw = copy.deepcopy(raw)
                cfg_raw["sweep"] = {}
                cfg_raw.setdefault("run", {})["mode"] = "scatter"
                for key, value in point.items():
                    apply_override(cfg_raw, key, value)
                parse_config(cfg_raw)
            except ConfigurationError as exc:
                raise ConfigurationError(f"sweep point {point}: {exc}", f"sweep.axes.{exc.field}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", str(path)) from None
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"TOML syntax error: {exc}", str(path)) from None
    return parse_config(raw)


# --- overrides ----------------------------------------------------------------------

def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value read as a TOML literal (bare words become strings)."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not key=value", text)
    key, value = text.split("=", 1)
    key = key.strip()
    try:
        parsed = tomli.loads(f"v = {value.strip()}")["v"]
    except tomli.TOMLDecodeError:
        parsed = value.strip()
    return key, parsed


def split_key(key: str) -> list[str]:
    """Segments of a TOML dotted key; quoted segments may contain dots."""
    try:
        node = tomli.loads(f"{key} = 0")
    except tomli.TOMLDecodeError:
        raise ConfigurationError("not a valid dotted key", key) from None
    parts = []
    while isinstance(node, dict):
        (part, node), = node.items()
        parts.append(part)
    return parts


def apply_override(raw: dict, key: str, value) -> None:
    """Set dotted ``key`` in ``raw``; integer segments index arrays of tables."""
    parts = split_key(key)
    node = raw
    for i, part in enumerate(parts[:-1]):
        nxt = parts[i + 1]
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigurationError("no such array element", key) from None
            continue
        if not isinstance(node, dict):
            raise ConfigurationError("path runs through a scalar", key)
        if part not in node:
            node[part] = [] if nxt.isdigit() else {}
        node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigurationError("no such array element", key) from None
    elif isinstance(node, dict):
        node[last] = value
        # g and g_collective are mutually exclusive; an override of one replaces the other
        if last in ("g", "g_collective") and len(parts) >= 3 and parts[-3] == "scatterers":
            node.pop("g_collective" if last == "g" else "g", None)
    else:
        raise ConfigurationError("path runs through a scalar", key)


# --- bundled configs ------------------------------------------------------------------

def bundled_names() -> list[str]:
    return sorted(p.stem for p in _BUNDLED.glob("*.toml"))


def bundled_config(name: str) -> Path:
    path = _BUNDLED / f"{name}.toml"
    if not path.exists():
        raise ConfigurationError(f"no bundled config {name!r}; available: {', '.join(bundled_names())}", "figure")
    return path

