"""On-disk outputs: one CSV per observable, a JSON manifest per run, and run comparison.

Floats are written with 17 significant digits so a re-run reproduces every data
file byte for byte. Timings and host details live only in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .model import dispersion
from .mps import save_checkpoint

__all__ = [
    "KEY_COLUMNS",
    "Manifest",
    "compare_runs",
    "read_csv",
    "run_id",
    "write_csv",
    "write_ground_state",
    "write_result",
]

# columns that identify a row rather than carry a measured value
KEY_COLUMNS = ("t", "k", "x", "x1", "x2", "position", "x_i", "x_j", "sweep", "point")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and a float array; non-numeric cells become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], np.zeros((0, 0))
    header, body = rows[0], rows[1:]

    def num(s):
        try:
            return float(s)
        except ValueError:
            return math.nan

    return header, np.array([[num(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_id(config_echo: dict) -> str:
    """12-hex-digit content hash of the config echo (output path excluded) and package version."""
    echo = json.loads(json.dumps(_jsonable(config_echo)))
    echo.get("run", {}).pop("output", None)
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(f"{__version__}\n{blob}".encode()).hexdigest()[:12]


class Manifest:
    """Collects run metadata and writes ``manifest.json``.

    The file is written on creation and again by :meth:`finish`, so it exists
    even when a run aborts part way.
    """

    def __init__(self, out_dir, command: str, config_echo: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.data = {
            "schema": 1,
            "package": "waveguide_mps",
            "version": __version__,
            "command": command,
            "run_id": run_id(config_echo),
            "config": _jsonable(config_echo),
            "status": "running",
            "exit_code": None,
            "error": None,
            "diagnostics": {},
            "timings": {},
            "files": [],
            "environment": {
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }
        self.write()

    def add_files(self, *paths) -> None:
        for p in paths:
            name = str(Path(p).relative_to(self.dir))
            if name not in self.data["files"]:
                self.data["files"].append(name)

    def finish(self, status: str, exit_code: int, error: BaseException | None = None) -> None:
        self.data["status"] = status
        self.data["exit_code"] = exit_code
        if error is not None:
            info = {"type": type(error).__name__, "message": str(error)}
            for attr in ("field", "diagnostics", "trace"):
                val = getattr(error, attr, None)
                if val is not None:
                    info[attr] = _jsonable(val.__dict__ if hasattr(val, "__dict__") else val)
            self.data["error"] = info
        self.write()

    def write(self) -> Path:
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(_jsonable(self.data), indent=2, sort_keys=True) + "\n")
        return path


# --- writers --------------------------------------------------------------------------

def write_ground_state(out_dir, model, gs) -> list[Path]:
    out = Path(out_dir)
    x = model.positions()
    files = [
        write_csv(out / "ground_state_density.csv", ["x", "n"], zip(x, gs.photon_density)),
        write_csv(out / "ground_state_energy_trace.csv", ["sweep", "energy"], enumerate(gs.energy_trace)),
        write_csv(out / "ground_state_populations.csv", ["position", "P"], sorted(gs.populations.items())),
    ]
    ck = out / "ground_state.mps"
    save_checkpoint(gs.state, ck)
    files.append(ck)
    return files


def write_spectra(out_dir, model, ks, t_k, r_k, T, R, T2=None, T2u=None, name="spectra.csv") -> Path:
    ks = np.asarray(ks)
    omega = dispersion(ks, model)
    cols = ["k", "omega", "T", "R"]
    data = [ks, omega, T, R]
    if t_k is not None:
        cols += ["t_re", "t_im", "r_re", "r_im", "abs_t2", "abs_r2", "T2", "T2_unhalved"]
        data += [t_k.real, t_k.imag, r_k.real, r_k.imag, np.abs(t_k) ** 2, np.abs(r_k) ** 2, T2, T2u]
    return write_csv(Path(out_dir) / name, cols, zip(*data))


def write_pair_map(out_dir, model, pair, name="pair_map.csv") -> Path:
    x = model.positions()
    n = len(x)
    rows = ((x[i], x[j], pair[i, j].real, pair[i, j].imag, abs(pair[i, j]) ** 2) for i in range(n) for j in range(n))
    return write_csv(Path(out_dir) / name, ["x1", "x2", "re", "im", "abs2"], rows)


def write_result(out_dir, model, res, save_state=None) -> list[Path]:
    """Every observable of a :class:`ScatteringResult` as CSV; the final state as a checkpoint."""
    out = Path(out_dir)
    x = model.positions()
    files = []
    files.append(write_csv(
        out / "density.csv", ["t", "x", "n"],
        ((t, xi, n) for t, row in zip(res.times, res.photon_density) for xi, n in zip(x, row)),
    ))
    files.append(write_csv(out / "momentum.csv", ["k", "nk_gs", "nk0", "nk_out"], zip(res.ks, res.nk_gs, res.nk0, res.nk_out)))
    files.append(write_spectra(out, model, res.k_defined, res.t_k, res.r_k, res.T, res.R, res.T2, res.T2_unhalved))
    if res.populations:
        files.append(write_csv(
            out / "populations.csv", ["t", "position", "delta_P"],
            ((t, pos, trace[i]) for i, t in enumerate(res.times) for pos, trace in sorted(res.populations.items())),
        ))
    if res.correlators:
        files.append(write_csv(
            out / "correlators.csv", ["t", "x_i", "x_j", "re", "im"],
            ((t, a, b, trace[i].real, trace[i].imag)
             for i, t in enumerate(res.times) for (a, b), trace in sorted(res.correlators.items())),
        ))
    files.append(write_csv(
        out / "conservation.csv", ["t", "energy", "excitations", "norm"],
        zip(res.times, res.energies, res.excitations, res.norms),
    ))
    if res.pair_map is not None:
        files.append(write_pair_map(out, model, res.pair_map))
    if save_state is not None:
        ck = out / "final_state.mps"
        save_checkpoint(save_state, ck)
        files.append(ck)
    return files


# --- comparison -----------------------------------------------------------------------

def _tolerance(tolerances: dict, fname: str, col: str) -> float:
    stem = Path(fname).stem
    for key in (f"{stem}.{col}", col, stem, "default"):
        if key in tolerances:
            return float(tolerances[key])
    return 0.0


def compare_runs(dir_a, dir_b, tolerances: dict | None = None) -> dict:
    """Per-file, per-column max/mean absolute deviation of rows matched on key columns.

    ``tolerances`` maps ``file.column``, ``column``, ``file`` or ``default`` to the
    allowed maximum deviation (default 0). Raises :class:`ConfigurationError` on
    schema mismatch: no shared CSV files, or shared files with different columns
    or key values.
    """
    tolerances = dict(tolerances or {})
    a, b = Path(dir_a), Path(dir_b)
    for d in (a, b):
        if not d.is_dir():
            raise ConfigurationError(f"not a run directory: {d}", "run_dir")
    common = sorted({p.name for p in a.glob("*.csv")} & {p.name for p in b.glob("*.csv")})
    if not common:
        raise ConfigurationError("the runs share no CSV observables", "schema")
    report = {"run_a": str(a), "run_b": str(b), "files": {}, "passed": True}
    for fname in common:
        ha, da = read_csv(a / fname)
        hb, db = read_csv(b / fname)
        keys = [c for c in ha if c in KEY_COLUMNS]
        shared = [c for c in ha if c in hb and c not in KEY_COLUMNS]
        if [c for c in hb if c in KEY_COLUMNS] != keys:
            raise ConfigurationError(f"key columns differ ({keys} vs {[c for c in hb if c in KEY_COLUMNS]})", fname)
        ia = [ha.index(c) for c in keys]
        ib = [hb.index(c) for c in keys]
        rows_a = {tuple(np.round(r[ia], 9)): r for r in da}
        rows_b = {tuple(np.round(r[ib], 9)): r for r in db}
        matched = sorted(set(rows_a) & set(rows_b))
        if not matched and (rows_a or rows_b):
            raise ConfigurationError("no rows share key values", fname)
        entry = {"rows_a": len(rows_a), "rows_b": len(rows_b), "rows_matched": len(matched), "columns": {}}
        for col in shared:
            va = np.array([rows_a[k][ha.index(col)] for k in matched])
            vb = np.array([rows_b[k][hb.index(col)] for k in matched])
            diff = np.abs(va - vb)
            finite = diff[np.isfinite(diff)]
            mx = float(finite.max()) if finite.size else 0.0
            mean = float(finite.mean()) if finite.size else 0.0
            tol = _tolerance(tolerances, fname, col)
            ok = mx <= tol and np.array_equal(np.isnan(va), np.isnan(vb))
            entry["columns"][col] = {"max_abs": mx, "mean_abs": mean, "tolerance": tol, "passed": bool(ok)}
            report["passed"] &= bool(ok)
        report["files"][fname] = entry
    return report
