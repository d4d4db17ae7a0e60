#!/usr/bin/env python3
"""Generate the synthetic pose-benchmark fixture (trajectory + intrinsics +
SEKP predictions + config) into a directory, then print the bench command."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from superevent.synthetic import write_benchmark_fixture


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--rate-hz", type=float, default=8.0)
    parser.add_argument("--duration-s", type=float, default=3.0)
    args = parser.parse_args()
    layout = write_benchmark_fixture(
        args.out, seed=args.seed, rate_hz=args.rate_hz, duration_s=args.duration_s
    )
    print("fixture written:")
    for key, path in layout.items():
        print(f"  {key}: {path}")
    print(
        "\nrun it with:\n"
        f"  superevent bench pose --trajectory {layout['trajectory']} "
        f"--predictions {layout['predictions']} --intrinsics {layout['intrinsics']} "
        f"--config {layout['config']} --out bench_out"
    )


if __name__ == "__main__":
    main()
