"""Command-line runner: ``waveguide-mps <subcommand> ...``.

Exit codes: 0 success, 1 numeric or convergence failure (also a failed
``compare``), 2 configuration error, 3 resource abort. Every run directory gets
a ``manifest.json``, including runs that abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .artifacts import Manifest, compare_runs, write_csv, write_ground_state, write_result
from .config import ExperimentConfig, apply_override, bundled_config, bundled_names, load_config, parse_config, parse_override
from .errors import ArgumentError, ConfigurationError, NumericError, ResourceError, WaveguideMPSError
from .mps import load_checkpoint
from .scattering import ground_state_from_state, prepare_ground_state, run

__all__ = ["main", "exit_code_for"]

log = logging.getLogger("waveguide_mps")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def exit_code_for(exc: BaseException) -> int:
    """2 for configuration errors, 3 for resource aborts, 1 for every other package error."""
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, ResourceError):
        return EXIT_RESOURCE
    return EXIT_NUMERIC


# --- config assembly ------------------------------------------------------------------

def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = dict(parse_override(s) for s in (args.set or []))
    if getattr(args, "output", None):
        overrides["run.output"] = args.output
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg


# --- one experiment --------------------------------------------------------------------

def _ground_state(cfg: ExperimentConfig, out: Path, manifest: Manifest, checkpoint=None):
    t0 = time.perf_counter()
    if checkpoint:
        try:
            state = load_checkpoint(checkpoint)
        except (OSError, ArgumentError) as exc:
            raise ConfigurationError(f"cannot read ground-state checkpoint: {exc}", "ground_state") from exc
        gs = ground_state_from_state(cfg.model, state, cfg.engine)
    else:
        gs = prepare_ground_state(cfg.model, cfg.engine)
    manifest.data["timings"]["ground_state"] = time.perf_counter() - t0
    manifest.add_files(*write_ground_state(out, cfg.model, gs))
    manifest.data["diagnostics"]["ground_state"] = {
        "energy": gs.energy,
        "sweeps": gs.sweeps,
        "photons": gs.total_photons,
        "max_bond": gs.state.max_bond,
        "populations": gs.populations,
    }
    manifest.write()
    return gs


def _scatter(cfg: ExperimentConfig, out: Path, manifest: Manifest, checkpoint=None) -> dict:
    spec = cfg.scattering_run()
    gs = _ground_state(cfg, out, manifest, checkpoint)
    manifest.data["diagnostics"]["t_out"] = spec.steps * spec.engine.dt
    res = run(spec, gs=gs)
    manifest.add_files(*write_result(out, cfg.model, res, save_state=res.state))
    cons = res.conservation()
    summary = {
        "R_max": res.R_max,
        "max_bond": res.diagnostics.max_bond,
        "conservation": cons,
        "inconsistent_bins": res.inconsistent_bins,
    }
    if res.T2 is not None:
        summary["T2_peak"] = res.T2_peak()
    manifest.data["diagnostics"]["scattering"] = summary
    manifest.data["diagnostics"]["evolution"] = {
        "max_bond": res.diagnostics.max_bond,
        "total_discarded": res.diagnostics.total_discarded,
        "max_sweep_discarded": max(res.diagnostics.sweep_discarded, default=0.0),
    }
    manifest.data["timings"].update({k: v for k, v in res.timings.items() if k != "ground_state"})
    return summary


def _oracle(cfg: ExperimentConfig, out: Path, manifest: Manifest) -> dict:
    from .oracle.export import run_oracle

    files, diag = run_oracle(cfg.scattering_run(), out)
    manifest.add_files(*files)
    manifest.data["diagnostics"]["oracle"] = diag
    return diag


def resolved(cfg: ExperimentConfig) -> dict:
    """Every effective parameter, defaults included."""
    out = {"model": dataclasses.asdict(cfg.model), "engine": dataclasses.asdict(cfg.engine), "mode": cfg.mode}
    if cfg.packet is not None:
        out["packet"] = dataclasses.asdict(cfg.packet)
        out["t_out"] = cfg.scattering_run().resolved_t_out
        out["snapshot_stride"] = cfg.snapshot_stride
    return out


def _guarded(command: str, cfg: ExperimentConfig, out: Path, body) -> int:
    """Run ``body(manifest)`` and always leave a manifest with status and exit code."""
    manifest = Manifest(out, command, cfg.raw)
    manifest.data["resolved_config"] = resolved(cfg)
    manifest.write()
    t0 = time.perf_counter()
    try:
        body(manifest)
    except WaveguideMPSError as exc:
        code = exit_code_for(exc)
        manifest.data["timings"]["total"] = time.perf_counter() - t0
        manifest.finish("aborted" if code == EXIT_RESOURCE else "failed", code, exc)
        log.error("%s: %s", type(exc).__name__, exc)
        return code
    manifest.data["timings"]["total"] = time.perf_counter() - t0
    manifest.finish("ok", EXIT_OK)
    return EXIT_OK


def _sweep_point(task):
    index, raw, out = task
    cfg = parse_config(raw)
    holder = {}

    def body(manifest):
        holder["summary"] = _scatter(cfg, Path(out), manifest)

    code = _guarded("sweep-point", cfg, Path(out), body)
    return index, code, holder.get("summary", {})


def _run_sweep(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    points = cfg.sweep.points()
    tasks = []
    for i, point in enumerate(points):
        raw = json.loads(json.dumps(cfg.raw))
        raw.pop("sweep", None)
        raw.setdefault("run", {})["mode"] = "scatter"
        for key, value in point.items():
            apply_override(raw, key, value)
        tasks.append((i, raw, str(out / f"point_{i:03d}")))

    def body(manifest):
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_point, tasks))
        else:
            results = [_sweep_point(t) for t in tasks]
        keys = list(cfg.sweep.axes)
        rows = []
        worst = EXIT_OK
        for (i, code, summ), point in zip(results, points):
            rows.append([i, *[point[k] for k in keys], code, summ.get("R_max", np.nan), summ.get("T2_peak", np.nan),
                         summ.get("max_bond", np.nan)])
            worst = max(worst, code)
        manifest.add_files(write_csv(out / "sweep_summary.csv", ["point", *keys, "exit_code", "R_max", "T2_peak", "max_bond"], rows))
        manifest.data["diagnostics"]["points"] = [{"point": i, "exit_code": c, **s} for i, c, s in results]
        if worst != EXIT_OK:
            failing = [i for i, c, _ in results if c != EXIT_OK]
            err = ResourceError if worst == EXIT_RESOURCE else ConfigurationError if worst == EXIT_CONFIG else NumericError
            raise err(f"sweep points {failing} failed")

    return _guarded("sweep", cfg, out, body)


def _dispatch(cfg: ExperimentConfig, mode: str, args) -> int:
    out = Path(cfg.output)
    checkpoint = getattr(args, "ground_state", None)
    if mode == "ground-state":
        return _guarded("ground-state", cfg, out, lambda m: _ground_state(cfg, out, m, checkpoint))
    if mode == "scatter":
        return _guarded("scatter", cfg, out, lambda m: _scatter(cfg, out, m, checkpoint))
    if mode == "oracle":
        return _guarded("oracle", cfg, out, lambda m: _oracle(cfg, out, m))
    if mode == "sweep":
        return _run_sweep(cfg, out, getattr(args, "workers", 1))
    raise ConfigurationError(f"unknown mode {mode!r}", "run.mode")


# --- subcommands ----------------------------------------------------------------------

def _cmd_mode(mode):
    def handler(args) -> int:
        cfg = _load(args)
        return _dispatch(cfg, mode, args)

    return handler


def _cmd_figures(args) -> int:
    if args.id == "list":
        print("\n".join(bundled_names()))
        return EXIT_OK
    args.config = bundled_config(args.id)
    if not args.output:
        args.output = f"runs/{args.id}"
    cfg = _load(args)
    return _dispatch(cfg, cfg.mode, args)


def _cmd_compare(args) -> int:
    tolerances = {}
    for text in args.tol or []:
        key, value = parse_override(text)
        try:
            tolerances[key] = float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"tolerance {text!r} is not numeric", key) from None
    report = compare_runs(args.run_a, args.run_b, tolerances)
    path = Path(args.report) if args.report else Path(args.run_a) / "compare_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"{'PASS' if report['passed'] else 'FAIL'} {path}")
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waveguide-mps", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="TOML experiment config")
        sp.add_argument("-o", "--output", help="output directory (overrides run.output)")
        sp.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                        help="override any config key, e.g. model.n_cav=65 or model.scatterers.0.g=0.2")

    for name, mode in (("ground-state", "ground-state"), ("scatter", "scatter"), ("oracle", "oracle")):
        sp = sub.add_parser(name, help=f"run the {name} mode of a config")
        common(sp)
        if name != "oracle":
            sp.add_argument("--ground-state", help="reuse a ground-state checkpoint instead of imaginary time")
        sp.set_defaults(func=_cmd_mode(mode))
    sp = sub.add_parser("sweep", help="run every point of the config's sweep axes")
    common(sp)
    sp.add_argument("-j", "--workers", type=int, default=1)
    sp.set_defaults(func=_cmd_mode("sweep"))

    sp = sub.add_parser("compare", help="diff two run directories and write a JSON report")
    sp.add_argument("run_a")
    sp.add_argument("run_b")
    sp.add_argument("--tol", action="append", metavar="KEY=VALUE",
                    help="max abs deviation for file.column, column, file or default")
    sp.add_argument("--report", help="report path (default RUN_A/compare_report.json)")
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("figures", help="run a bundled figure config ('list' to show them)")
    sp.add_argument("id")
    common(sp, config=False)
    sp.add_argument("-j", "--workers", type=int, default=1)
    sp.set_defaults(func=_cmd_figures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WaveguideMPSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
