#!/usr/bin/env python3
"""Print a text summary of a finished artifact directory.

Usage:
    python3 scripts/summarize.py out
"""

import argparse
import json
import sys
from pathlib import Path


def fmt_pct(value) -> str:
    return "     -" if value is None else f"{value:6.2f}"


def summarize(out: Path) -> int:
    if not out.is_dir():
        print(f"error: {out} is not a directory", file=sys.stderr)
        return 2

    eval_path = out / "eval.json"
    if eval_path.is_file():
        payload = json.loads(eval_path.read_text())
        print("classifier accuracy vs majority baseline")
        for run in payload["runs"]:
            print(
                f"  run {run['run_index']}: accuracy {run['accuracy']:.3f}  "
                f"baseline {run['majority_baseline']:.3f}  "
                f"gap {run['gap_points']:+.1f} points"
            )
        print(f"  min gap: {payload['min_gap_points']:+.1f} points")

    report_path = out / "report.json"
    if report_path.is_file():
        payload = json.loads(report_path.read_text())
        rows = payload["rows"]
        levels = sorted({row["blocker_dbm"] for row in rows})
        by_key = {(row["blocker_dbm"], row["mode"]): row for row in rows}
        print(
            f"\npacket error rate, wanted {payload['wanted_dbm']} dBm, "
            f"{payload['packets']} packets x {payload['repetitions']} reps"
        )
        print("  blocker_dbm   per_ref   per_s4   std_ref   std_s4")
        for level in levels:
            ref = by_key.get((level, "reference"))
            s4 = by_key.get((level, "scenario4"))
            print(
                f"  {level:11.1f}  {fmt_pct(ref and ref['per_percent'])}   "
                f"{fmt_pct(s4 and s4['per_percent'])}   "
                f"{fmt_pct(ref and ref['per_std'])}   {fmt_pct(s4 and s4['per_std'])}"
            )

    flip_path = out / "flip.json"
    if flip_path.is_file():
        payload = json.loads(flip_path.read_text())
        frac = payload["fraction"]
        frac_text = "n/a" if frac is None else f"{100.0 * frac:.0f}%"
        print(
            f"\nflip experiment: {payload['flipped_count']}/{payload['qualifying_count']}"
            f" recovered ({frac_text}; hardware reference"
            f" {100.0 * payload['hardware_fraction']:.0f}%)"
        )

    if not any((eval_path.is_file(), report_path.is_file(), flip_path.is_file())):
        print(f"error: no summarizable artifacts in {out}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=Path, help="artifact directory")
    args = parser.parse_args(argv)
    return summarize(args.out)


if __name__ == "__main__":
    raise SystemExit(main())
