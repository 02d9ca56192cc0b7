#!/usr/bin/env python3
"""Wall-clock scaling of the dual-score aggregation in the client count.

Prints mean aggregation time per N at fixed dimension; the cost is dominated
by the pairwise distance matrix, so doubling N should roughly quadruple time.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from robustfed.geometry import GradientSet
from robustfed.prodigy import ProdigyParams, prodigy_aggregate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=10_000)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--clients", type=int, nargs="+", default=[25, 50, 100, 200])
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    previous = None
    for n in args.clients:
        f = max(1, n // 5)
        sets = [GradientSet(rng.standard_normal((n, args.dim))) for _ in range(args.reps)]
        prodigy_aggregate(sets[0], ProdigyParams(n, f))  # warmup
        times = []
        for g in sets:
            t0 = time.perf_counter()
            prodigy_aggregate(g, ProdigyParams(n, f))
            times.append(time.perf_counter() - t0)
        mean_ms = 1e3 * float(np.mean(times))
        ratio = "" if previous is None else f"  x{mean_ms / previous:.2f} vs previous"
        print(f"N={n:<5d} f={f:<4d} mean {mean_ms:8.1f} ms over {args.reps} reps{ratio}")
        previous = mean_ms
    return 0


if __name__ == "__main__":
    sys.exit(main())
