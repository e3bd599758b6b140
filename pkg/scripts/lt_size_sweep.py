#!/usr/bin/env python3
"""Steady-state read latency across long-term memory caps.

Replays one synthetic stream under several l_max settings and prints the mean
read duration over the steady tail of each run. Larger caps hold more
prototypes, so every read scans a larger combined memory.
"""

import argparse

import numpy as np

from xmem import FeatureDims, PipelineConfig
from xmem.harness import run_stream
from xmem.stream import StreamHeader, synthetic_frames


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=700)
    ap.add_argument("--window", type=int, default=250)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument(
        "--caps", type=int, nargs="+", default=[500, 1000, 2500, 5000, 10000]
    )
    args = ap.parse_args()

    dims = FeatureDims(h=8, w=8, c_k=8, c_v=16, c_h=4)
    header = StreamHeader(
        c_k=8, c_v=16, c_in=4, h=8, w=8,
        frame_count=args.frames, object_count=1,
    )

    print(f"{'l_max':>8s} {'final L':>8s} {'mean read us':>14s}")
    for cap in args.caps:
        cfg = PipelineConfig(
            dims=dims, r=1, l_max=cap, sensory_input_channels=4,
        )
        _, rows, _ = run_stream(
            synthetic_frames(args.seed, header, drift=0.05), cfg, seed=args.seed
        )
        tail = [r.read_duration_ns for r in rows[-args.window:]]
        print(f"{cap:8d} {rows[-1].lt_elements:8d} {np.mean(tail) / 1e3:14.1f}")


if __name__ == "__main__":
    main()
