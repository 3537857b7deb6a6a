#!/usr/bin/env python3
"""Run the whole experiment pipeline, or a tail of it, in stage order.

Examples:
    python3 scripts/run_pipeline.py --out out
    python3 scripts/run_pipeline.py --config configs/default.toml --out out
    python3 scripts/run_pipeline.py --out out --from train
"""

import argparse
import sys
import time

from agcml.cli import STAGES, main as stage_main


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, help="TOML config file")
    parser.add_argument("--seed", type=int, default=None, help="override the base seed")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument(
        "--from",
        dest="start",
        choices=STAGES,
        default=STAGES[0],
        help="first stage to run (earlier stages must already have run)",
    )
    parser.add_argument(
        "--until",
        choices=STAGES,
        default=STAGES[-1],
        help="last stage to run",
    )
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    start, stop = STAGES.index(args.start), STAGES.index(args.until)
    if start > stop:
        print(f"error: --from {args.start} comes after --until {args.until}", file=sys.stderr)
        return 2
    for stage in STAGES[start : stop + 1]:
        argv_stage = [stage, "--out", args.out]
        if args.config is not None:
            argv_stage += ["--config", args.config]
        if args.seed is not None:
            argv_stage += ["--seed", str(args.seed)]
        began = time.perf_counter()
        code = stage_main(argv_stage)
        if code != 0:
            return code
        print(f"  ({stage} took {time.perf_counter() - began:.1f}s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
