"""Print the headline numbers of one or more run directories.

Usage: python scripts/summarize_run.py RUN_DIR [RUN_DIR ...]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from waveguide_mps.artifacts import read_csv


def summarize(run_dir: Path) -> list[str]:
    manifest = json.loads((run_dir / "manifest.json").read_text())
    lines = [f"{run_dir}: {manifest['command']} run {manifest['run_id']} {manifest['status']} (exit {manifest['exit_code']})"]
    if manifest.get("error"):
        lines.append(f"  error: {manifest['error']['type']}: {manifest['error']['message']}")
    diag = manifest.get("diagnostics", {})
    if "ground_state" in diag:
        gs = diag["ground_state"]
        lines.append(f"  ground state: E={gs['energy']:.8f}, <N>={gs['photons']:.4g}, {gs['sweeps']} sweeps")
    if "scattering" in diag:
        sc = diag["scattering"]
        line = f"  R_max={sc['R_max']:.4f}, max bond {sc['max_bond']}"
        if "T2_peak" in sc:
            line += f", T2 peak {sc['T2_peak']:.4f}"
        lines.append(line)
        cons = sc["conservation"]
        lines.append("  conservation: " + ", ".join(f"{k}={v:.2e}" for k, v in cons.items()))
    spectra = run_dir / "spectra.csv"
    if spectra.exists():
        header, data = read_csv(spectra)
        k, R = data[:, header.index("k")], data[:, header.index("R")]
        j = int(np.argmin(np.abs(k - np.pi / 2)))
        lines.append(f"  R at k={k[j]:.4f}: {R[j]:.4f}")
    for point in sorted(run_dir.glob("point_*")):
        lines += ["  " + s for s in summarize(point)]
    return lines


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("runs", nargs="+", type=Path)
    for run_dir in p.parse_args().runs:
        print("\n".join(summarize(run_dir)))


if __name__ == "__main__":
    main()
