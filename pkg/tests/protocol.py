"""Full-scale sweep runs shared by the acceptance tests.

A run is cached under ``.acceptance/L<l>/`` next to the package, keyed by a
hash of the sweep configuration and of every source file that can change a
count. Sweeps are deterministic, so a cache hit is the same result a fresh
run would produce; delete the directory (or set JOINTCS_FRESH=1) to rerun.
"""

import hashlib
import json
import os
import shutil
from pathlib import Path

import jointcs
from jointcs.cli import main

ROOT = Path(__file__).resolve().parents[1]
CACHE = Path(os.environ.get("JOINTCS_ACCEPTANCE_DIR", ROOT / ".acceptance"))
SEED = 20240611
SOURCES = ("core.py", "generation.py", "solver.py", "experiments.py", "cli.py")


def sweep_args(l, out):
    return ["sweep", "--n", "100", "--l", str(l), "--type", "all", "--trials", "100",
            "--m-grid", "5:100:5", "--k-grid", "5:100:5", "--seed", str(SEED),
            "--threads", str(os.cpu_count() or 1), "--out", str(out)]


def fingerprint(l):
    h = hashlib.sha256()
    pkg = Path(jointcs.__file__).parent
    for name in SOURCES:
        h.update((pkg / name).read_bytes())
    args = [a for a in sweep_args(l, "OUT") if a not in (str(os.cpu_count() or 1),)]
    h.update(json.dumps(args).encode())
    return h.hexdigest()


def ensure_protocol_sweep(l):
    """Directory holding sweep.csv/phase.csv/bd_agreement.csv for the L run."""
    out = CACHE / f"L{l}"
    stamp = out / "fingerprint.txt"
    fp = fingerprint(l)
    fresh = os.environ.get("JOINTCS_FRESH") == "1"
    if not fresh and stamp.exists() and stamp.read_text().strip() == fp and (out / "sweep.csv").exists():
        return out
    if out.exists():
        shutil.rmtree(out)
    assert main(sweep_args(l, out)) == 0
    stamp.write_text(fp + "\n")
    return out


if __name__ == "__main__":
    import sys
    import time

    for l in map(int, sys.argv[1:] or ["3", "9"]):
        t = time.perf_counter()
        print(ensure_protocol_sweep(l), f"{time.perf_counter() - t:.0f}s", flush=True)
