"""
Full-resolution forward pass on a synthetic sensor frame.
Reports latency and the tracked allocation peak against ALLOCATION_BUDGET_BYTES.

Run with: python -m scripts.scale_check [--config bayer8] [--height 2848 --width 4256]
"""
import argparse
import sys
import os
import time

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from app.core.config import settings
from app.core.tensor import Tensor, track_allocations
from app.models import llpacknet
from app.schemas.model import PRESETS, get_preset
from app.utils.report import format_bytes

FULL_HEIGHT = 2848
FULL_WIDTH = 4256


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", choices=sorted(PRESETS), default="bayer8")
    parser.add_argument("--height", type=int, default=FULL_HEIGHT)
    parser.add_argument("--width", type=int, default=FULL_WIDTH)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = get_preset(args.config)
    weights = llpacknet.build(config, args.seed)
    rng = np.random.default_rng(args.seed)
    raw = Tensor(rng.uniform(0.0, 0.01, size=(args.height, args.width, config.input_channels)))

    with track_allocations() as stats:
        start = time.perf_counter()
        result = llpacknet.enhance_image(raw, weights, config)
        latency = time.perf_counter() - start

    print("=" * 60)
    print(f"  Config:        {args.config}")
    print(f"  Input:         {args.height}x{args.width}x{config.input_channels}")
    print(f"  Output:        {'x'.join(str(d) for d in result.output.dims)}")
    print(f"  Amplification: {result.amplification:.4g}")
    print(f"  Latency:       {latency:.2f}s")
    print(f"  Peak tracked:  {format_bytes(stats.peak_bytes)}")
    print(f"  Budget:        {format_bytes(settings.ALLOCATION_BUDGET_BYTES)}")
    print("=" * 60)
    if stats.peak_bytes > settings.ALLOCATION_BUDGET_BYTES:
        print("\nOver budget")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
