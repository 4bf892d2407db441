#!/usr/bin/env python3
"""Profile MACs across input sizes to exhibit the linear cost of the
attention branches and the selective scan, then print a full per-layer
report for one size.

Example:
    python3 scripts/profile_scaling.py --sizes 32,64,128
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from samaseg.attention import AttnConfig, DiffAggAttention
from samaseg.model import ModelConfig, SamaUNet
from samaseg.profiler import build_report, count_macs
from samaseg.ssm import SelectiveSsm
from samaseg.tensor import Tensor


def macs_of(fn) -> int:
    with count_macs() as counter:
        fn()
    return counter.total


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="16,32,64",
                    help="comma-separated square input sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)

    cfg = AttnConfig(channels=16, heads=4, local_window=3, global_pool=7)
    branches = {kind: DiffAggAttention(cfg, kind, rng) for kind in ("local", "global")}
    ssm = SelectiveSsm(16, 8, rng)

    print(f"{'size':>6} {'pixels':>8} {'attn-local':>12} {'attn-global':>12} {'scan':>12}")
    prev = None
    for s in sizes:
        row = {kind: macs_of(lambda b=b: b(Tensor(np.zeros((1, 16, s, s), np.float32))))
               for kind, b in branches.items()}
        row["scan"] = macs_of(lambda: ssm(Tensor(np.zeros((1, s * s, 16), np.float32))))
        line = f"{s:>6} {s * s:>8} {row['local']:>12} {row['global']:>12} {row['scan']:>12}"
        if prev is not None:
            ratios = {k: row[k] / prev[k] for k in row}
            line += ("   x" + "/".join(f"{ratios[k]:.2f}"
                                       for k in ("local", "global", "scan")))
        print(line)
        prev = row

    size = sizes[-1]
    print(f"\nfull network report at {size}x{size}:")
    model = SamaUNet(ModelConfig(), np.random.default_rng(args.seed))
    x = Tensor(np.zeros((1, 1, size, size), np.float32))
    print(build_report(model, lambda: model(x)).format())
    return 0


if __name__ == "__main__":
    sys.exit(main())
