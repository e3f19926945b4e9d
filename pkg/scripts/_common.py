"""Shared helpers for the curve scripts: sweep one configuration and write CSV."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from mqds.cli import format_csv, point_row
from mqds.params import ChannelParams
from mqds.rate import OptimizerConfig, rate_curve


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--dist-start", type=float, default=0.0)
    p.add_argument("--dist-end", type=float, default=300.0)
    p.add_argument("--dist-step", type=float, default=10.0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-dir", default=".")
    return p


def sweep(args, M: int, channel: ChannelParams, name: str) -> str:
    distances = np.arange(args.dist_start, args.dist_end + args.dist_step / 2, args.dist_step)
    points = rate_curve(distances, M, channel, config=OptimizerConfig(), workers=args.workers)
    path = os.path.join(args.out_dir, name)
    with open(path, "w") as fh:
        fh.write(format_csv([point_row(p) for p in points]))
    print(f"wrote {path}", file=sys.stderr)
    return path
