"""Shared plumbing for the region experiment scripts: each one is a list of CLI runs."""
import argparse
import sys
import time
from pathlib import Path

from effcap.cli import main as effcap


def parse(description, default_steps=41):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--delta-steps", type=int, default=default_steps)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    return ap.parse_args()


def run_all(args, jobs):
    """jobs: list of (file stem, extra CLI args).  Returns the worst exit code."""
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for stem, extra in jobs:
        t0 = time.perf_counter()
        argv = ["region", "--samples", str(args.samples), "--delta-steps", str(args.delta_steps),
                "--seed", str(args.seed), "--workers", str(args.workers),
                "--out", str(out / f"{stem}.csv"), *extra]
        code = effcap(argv)
        print(f"{stem}: exit {code} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        worst = max(worst, code)
    return worst
