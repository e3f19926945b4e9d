"""Largest distance with N <= 1e16 for three, four and five parties at 0.1% misalignment."""

import argparse
import csv
import sys

from mqds.params import ChannelParams
from mqds.rate import max_distance

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--e-mis", type=float, default=0.001)
    p.add_argument("--resolution", type=float, default=1.0)
    args = p.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("parties", "max_distance_km"))
    for M in (3, 4, 5):
        d = max_distance(M, ChannelParams(e_mis=args.e_mis), lo=100.0, hi=356.0, resolution=args.resolution)
        w.writerow((M, f"{d:.1f}"))
        sys.stdout.flush()
