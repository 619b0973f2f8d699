#!/usr/bin/env python3
"""Empirical arrival-rate check for the alert simulator.

Generates scripts across the daily-rate range for several seeds and reports
how far the realized mean rate drifts from the nominal one.

Usage: python scripts/rate_experiment.py [--days 30] [--seeds 10]
"""

import argparse

from qdss import feeds


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--days", type=int, default=30)
    parser.add_argument("--seeds", type=int, default=10)
    args = parser.parse_args()

    print(f"{'rate/day':>8} {'mean':>8} {'drift%':>8} {'min':>6} {'max':>6} "
          f"{'high-risk%':>10}")
    for rate in (5, 8, 10, 15, 20, 25, 30):
        counts = []
        high = total = 0
        for s in range(args.seeds):
            script = feeds.generate_script(rate, args.days, seed=1000 + s)
            counts.append(len(script) / args.days)
            high += sum(1 for a in script if a.high_risk)
            total += len(script)
        mean = sum(counts) / len(counts)
        drift = 100.0 * (mean - rate) / rate
        print(f"{rate:>8} {mean:>8.2f} {drift:>8.2f} {min(counts):>6.2f} "
              f"{max(counts):>6.2f} {100.0 * high / total:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
