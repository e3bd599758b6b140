#!/usr/bin/env python3
"""Read-latency scaling: bounded consolidating memory vs unbounded growth.

Replays the same synthetic stream twice, once with consolidation on and once
with the unbounded baseline, then reports the least-squares slope of
read_duration_ns over the trailing window of each run. Bounded runs plateau
once the long-term store saturates; the unbounded store grows by h*w elements
every r frames and its latency keeps climbing.
"""

import argparse

import numpy as np

from xmem import FeatureDims, PipelineConfig
from xmem.harness import run_stream, write_metrics_csv
from xmem.stream import StreamHeader, synthetic_frames


def slope(rows, window):
    tail = rows[-window:]
    xs = np.array([r.frame_idx for r in tail], dtype=float)
    ys = np.array([r.read_duration_ns for r in tail], dtype=float)
    return float(np.polyfit(xs, ys, 1)[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=3000)
    ap.add_argument("--window", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--r", type=int, default=5)
    ap.add_argument("--lt-max", type=int, default=1000)
    ap.add_argument("--out-prefix", default="plateau")
    args = ap.parse_args()

    dims = FeatureDims(h=8, w=8, c_k=8, c_v=16, c_h=4)
    header = StreamHeader(
        c_k=8, c_v=16, c_in=4, h=8, w=8,
        frame_count=args.frames, object_count=1,
    )

    results = {}
    for label, unbounded in (("bounded", False), ("unbounded", True)):
        cfg = PipelineConfig(
            dims=dims, r=args.r, l_max=args.lt_max, unbounded=unbounded,
            sensory_input_channels=4,
        )
        _, rows, _ = run_stream(
            synthetic_frames(args.seed, header, drift=0.05), cfg, seed=args.seed
        )
        path = f"{args.out_prefix}_{label}.csv"
        write_metrics_csv(path, rows)
        results[label] = slope(rows, args.window)
        print(f"{label:10s} final elements {rows[-1].total_elements:7d}  "
              f"tail slope {results[label]:8.2f} ns/frame  -> {path}")

    ratio = abs(results["bounded"]) / results["unbounded"]
    print(f"bounded/unbounded slope ratio: {ratio:.3f}")


if __name__ == "__main__":
    main()
