"""PU interference level beta; the per-SU pair follows from the fixed threshold at each beta."""
import sys

from _common import parse, run_all

if __name__ == "__main__":
    args = parse(__doc__)
    betas = ["1.5", "2", "3", "5"]
    sys.exit(run_all(args, [("beta", ["--strategy", "2", "--sweep", "beta", *betas])]))
