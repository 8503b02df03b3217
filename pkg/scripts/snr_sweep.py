"""Both rate strategies across interference-limited SNR values, Majority fusion only."""
import sys

from _common import parse, run_all

if __name__ == "__main__":
    args = parse(__doc__)
    snrs = ["7", "5", "0", "-5", "-15"]
    sys.exit(run_all(args, [("snr", ["--rule", "majority", "--strategy", "both", "--sweep", "snr", *snrs])]))
