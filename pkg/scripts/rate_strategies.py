"""Greedy vs precautious idle-rate choice under every fusion rule at 0 dB."""
import sys

from _common import parse, run_all

if __name__ == "__main__":
    args = parse(__doc__)
    sys.exit(run_all(args, [("strategies", ["--rule", "all", "--strategy", "both", "--snr-db", "0"])]))
