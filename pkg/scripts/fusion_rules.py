"""Regions for OR, Majority and AND fusion at a low and a high false-alarm operating point."""
import sys

from _common import parse, run_all

if __name__ == "__main__":
    args = parse(__doc__)
    jobs = [(f"fusion_pf{pf}", ["--rule", "all", "--strategy", "2", "--pf", pf]) for pf in ("0.13", "0.96")]
    sys.exit(run_all(args, jobs))
