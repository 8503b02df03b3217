"""Regions for common delay exponents, plus one user's exponent varied with the other fixed."""
import sys

from _common import parse, run_all

if __name__ == "__main__":
    args = parse(__doc__)
    jobs = [("theta_common", ["--strategy", "2", "--sweep", "theta", "0.001", "0.01", "0.1"])]
    for th in ("0.001", "0.1"):
        jobs.append((f"theta1_{th}", ["--strategy", "2", "--theta1", th, "--theta2", "0.01"]))
    sys.exit(run_all(args, jobs))
