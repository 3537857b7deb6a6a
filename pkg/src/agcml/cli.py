"""Pipeline front end.

Stages write their artifacts plus a manifest into --out; each stage
requires its upstream manifest and checks it was produced under the same
config hash. Exit codes: 0 ok, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .config import ExperimentConfig, config_hash, load_config
from .errors import DataError, UsageError
from .labeling import (
    flip_experiment,
    read_dataset_csv,
    sweep_dataset,
    write_dataset_csv,
    write_dataset_json,
)
from .manifest import output_hashes, require_manifest, write_manifest
from .mlengine import evaluate, load_model, save_model, train, write_curve_csv
from .runtime import (
    PerSweepSpec,
    RuntimeMode,
    per_report_rows_json,
    per_sweep,
    write_gnuplot_dat,
    write_per_csv,
)
from .signalgen import (
    crossval_runs,
    make_windows,
    read_signal_csv,
    read_windows_csv,
    synthesize_signal,
    write_signal_csv,
    write_windows_csv,
)
from .util import derive_seed

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _run_dir(out: Path, run_index: int) -> Path:
    return out / "runs" / f"run{run_index}"


def _piece_ranges(pieces) -> list[list[int]]:
    return [[piece[0].index, piece[-1].index + 1] for piece in pieces]


def cmd_sweep(config: ExperimentConfig, out: Path) -> None:
    rows = sweep_dataset(
        config.sweep, config.gain_table, config.link_budget, config.target_window_dbm
    )
    csv_path = out / "dataset.csv"
    json_path = out / "dataset.json"
    write_dataset_csv(rows, csv_path)
    write_dataset_json(rows, json_path)
    write_manifest(
        out,
        "sweep",
        config_hash(config),
        config.seed,
        outputs={"dataset_csv": csv_path, "dataset_json": json_path},
        extra={"rows": len(rows)},
    )
    print(f"sweep: labeled {len(rows)} configs -> {csv_path}")


def cmd_synth(config: ExperimentConfig, out: Path) -> None:
    upstream = require_manifest(out, "sweep", config_hash(config))
    pool = read_dataset_csv(out / "dataset.csv")
    signal = synthesize_signal(
        config.pattern,
        pool,
        config.signal.length,
        derive_seed(config.seed, "synth"),
        config.gain_table,
        config.link_budget,
        reference_wanted_dbm=config.signal.reference_wanted_dbm,
        after_freeze_prob=config.signal.after_freeze_prob,
        jitter_sigma_db=config.signal.jitter_sigma_db,
        target_window_dbm=config.target_window_dbm,
    )
    path = out / "signal.csv"
    write_signal_csv(signal, path)
    write_manifest(
        out,
        "synth",
        config_hash(config),
        config.seed,
        outputs={"signal_csv": path},
        inputs=output_hashes(upstream),
        extra={
            "length": len(signal),
            "pattern_bands": [[b.value, n] for b, n in config.pattern.band_sequence],
            "signal_seed": signal.seed,
        },
    )
    print(f"synth: {len(signal)} packets -> {path}")


def cmd_split(config: ExperimentConfig, out: Path) -> None:
    upstream = require_manifest(out, "synth", config_hash(config))
    signal = read_signal_csv(out / "signal.csv")
    gain_count = config.gain_table.size
    runs = crossval_runs(
        signal,
        config.split.folds,
        config.split.repeats,
        derive_seed(config.seed, "split"),
        gain_count,
        test_frac=config.split.test_frac,
        window_len=config.window_len,
    )
    outputs: dict[str, Path] = {}
    run_meta = []
    for run in runs:
        run_dir = _run_dir(out, run.run_index)
        run_dir.mkdir(parents=True, exist_ok=True)
        train_w = make_windows(run.train_pieces, config.window_len, gain_count)
        test_w = make_windows(run.test_pieces, config.window_len, gain_count)
        train_path = run_dir / "windows_train.csv"
        test_path = run_dir / "windows_test.csv"
        write_windows_csv(train_w, train_path)
        write_windows_csv(test_w, test_path)
        outputs[f"run{run.run_index}_train"] = train_path
        outputs[f"run{run.run_index}_test"] = test_path
        run_meta.append(
            {
                "run_index": run.run_index,
                "seed": run.seed,
                "train_pieces": _piece_ranges(run.train_pieces),
                "test_pieces": _piece_ranges(run.test_pieces),
                "train_class_counts": {str(k): v for k, v in run.train_class_counts.items()},
                "test_class_counts": {str(k): v for k, v in run.test_class_counts.items()},
                "train_windows": len(train_w),
                "test_windows": len(test_w),
            }
        )
    write_manifest(
        out,
        "split",
        config_hash(config),
        config.seed,
        outputs=outputs,
        inputs=output_hashes(upstream),
        extra={"runs": run_meta, "folds": config.split.folds},
    )
    print(f"split: {len(runs)} cross-validation runs -> {out / 'runs'}")


def cmd_train(config: ExperimentConfig, out: Path) -> None:
    upstream = require_manifest(out, "split", config_hash(config))
    run_meta = upstream["extra"]["runs"]
    outputs: dict[str, Path] = {}
    extra_runs = []
    for meta in run_meta:
        r = meta["run_index"]
        run_dir = _run_dir(out, r)
        train_w = read_windows_csv(run_dir / "windows_train.csv")
        test_w = read_windows_csv(run_dir / "windows_test.csv")
        params = replace(config.train, seed=derive_seed(config.train.seed, "train", r))
        model, curve = train(
            train_w, test_w, params, config.gain_table.size, config.window_len
        )
        model_path = run_dir / "model.json"
        curve_path = run_dir / "curves.csv"
        save_model(model, model_path)
        write_curve_csv(curve, curve_path)
        outputs[f"run{r}_model"] = model_path
        outputs[f"run{r}_curves"] = curve_path
        extra_runs.append(
            {
                "run_index": r,
                "best_epoch": model.training_meta["best_epoch"],
                "best_val_accuracy": model.training_meta["best_val_accuracy"],
                "final_loss": model.training_meta["final_loss"],
            }
        )
        log.info(
            "run %d: best val accuracy %.4f at epoch %d",
            r,
            model.training_meta["best_val_accuracy"],
            model.training_meta["best_epoch"],
        )
    write_manifest(
        out,
        "train",
        config_hash(config),
        config.seed,
        outputs=outputs,
        inputs=output_hashes(upstream),
        extra={"runs": extra_runs},
    )
    print(f"train: {len(run_meta)} models -> {out / 'runs'}")


def _majority_baseline(train_labels, test_labels) -> tuple[int, float]:
    """Modal class of the training windows, scored on the test windows."""
    counts: dict[int, int] = {}
    for label in train_labels:
        counts[label] = counts.get(label, 0) + 1
    # Lowest class wins count ties so the baseline is deterministic.
    modal = min(sorted(counts), key=lambda c: (-counts[c], c))
    share = sum(1 for label in test_labels if label == modal) / len(test_labels)
    return modal, share


def cmd_eval(config: ExperimentConfig, out: Path) -> None:
    upstream = require_manifest(out, "train", config_hash(config))
    split_manifest = require_manifest(out, "split", config_hash(config))
    run_meta = split_manifest["extra"]["runs"]
    results = []
    for meta in run_meta:
        r = meta["run_index"]
        run_dir = _run_dir(out, r)
        model = load_model(run_dir / "model.json")
        train_w = read_windows_csv(run_dir / "windows_train.csv")
        test_w = read_windows_csv(run_dir / "windows_test.csv")
        report = evaluate(model, test_w)
        modal, baseline = _majority_baseline(
            [s.label for s in train_w], [s.label for s in test_w]
        )
        results.append(
            {
                "run_index": r,
                "accuracy": report.accuracy,
                "majority_class": modal,
                "majority_baseline": baseline,
                "gap_points": 100.0 * (report.accuracy - baseline),
                "report": report.to_json(),
            }
        )
        log.info(
            "run %d: accuracy %.4f vs baseline %.4f (gap %.1f points)",
            r, report.accuracy, baseline, results[-1]["gap_points"],
        )
    payload = {
        "schema": "agcml.eval.v1",
        "runs": results,
        "mean_accuracy": sum(x["accuracy"] for x in results) / len(results),
        "min_gap_points": min(x["gap_points"] for x in results),
    }
    path = out / "eval.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    write_manifest(
        out,
        "eval",
        config_hash(config),
        config.seed,
        outputs={"eval_json": path},
        inputs=output_hashes(upstream),
        extra={"min_gap_points": payload["min_gap_points"]},
    )
    print(
        f"eval: mean accuracy {payload['mean_accuracy']:.4f}, "
        f"min gap {payload['min_gap_points']:.1f} points -> {path}"
    )


def cmd_report(config: ExperimentConfig, out: Path, mode: str) -> None:
    upstream = require_manifest(out, "train", config_hash(config))
    model_path = _run_dir(out, config.report.model_run) / "model.json"
    model = load_model(model_path)
    modes = {
        "reference": [RuntimeMode.REFERENCE],
        "scenario4": [RuntimeMode.SCENARIO4],
        "both": [RuntimeMode.REFERENCE, RuntimeMode.SCENARIO4],
    }[mode]
    spec = PerSweepSpec(
        wanted_dbm=config.signal.reference_wanted_dbm,
        blocker_levels_dbm=config.report.blocker_levels_dbm,
        offset_mhz=config.report.offset_mhz,
        packets=config.report.packets,
        repetitions=config.report.repetitions,
        after_freeze_prob=config.signal.after_freeze_prob,
        jitter_sigma_db=config.signal.jitter_sigma_db,
        seed=derive_seed(config.seed, "report"),
    )
    report = per_sweep(
        spec,
        model,
        modes,
        config.gain_table,
        config.link_budget,
        window_len=config.window_len,
        countermeasure_threshold=config.runtime.countermeasure_threshold,
        target_window_dbm=config.target_window_dbm,
    )
    csv_path = out / "per_report.csv"
    write_per_csv(report, csv_path)
    outputs: dict[str, Path] = {"per_report_csv": csv_path}
    for m in modes:
        dat_path = out / f"per_{'reference' if m is RuntimeMode.REFERENCE else 'scenario4'}.dat"
        write_gnuplot_dat(report, m, dat_path)
        outputs[f"per_{m.value}_dat"] = dat_path
    json_path = out / "report.json"
    json_path.write_text(
        json.dumps(
            {
                "schema": "agcml.report.v1",
                "wanted_dbm": spec.wanted_dbm,
                "offset_mhz": spec.offset_mhz,
                "packets": spec.packets,
                "repetitions": spec.repetitions,
                "model_run": config.report.model_run,
                "rows": per_report_rows_json(report),
            },
            indent=1,
            sort_keys=True,
        )
        + "\n"
    )
    outputs["report_json"] = json_path
    write_manifest(
        out,
        "report",
        config_hash(config),
        config.seed,
        outputs=outputs,
        inputs=output_hashes(upstream),
        extra={"modes": [m.value for m in modes]},
    )
    print(f"report: {len(report.rows)} rows -> {csv_path}")


def cmd_flip(config: ExperimentConfig, out: Path) -> None:
    upstream = require_manifest(out, "sweep", config_hash(config))
    rows = read_dataset_csv(out / "dataset.csv")
    flip = flip_experiment(
        rows, config.gain_table, config.link_budget, config.target_window_dbm
    )
    payload = {
        "schema": "agcml.flip.v1",
        "qualifying_count": flip.qualifying_count,
        "flipped_count": flip.flipped_count,
        "fraction": flip.fraction,
        "hardware_fraction": flip.hardware_fraction,
    }
    path = out / "flip.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    write_manifest(
        out,
        "flip",
        config_hash(config),
        config.seed,
        outputs={"flip_json": path},
        inputs=output_hashes(upstream),
        extra={"qualifying_count": flip.qualifying_count},
    )
    frac = "n/a" if flip.fraction is None else f"{flip.fraction:.2%}"
    print(
        f"flip: {flip.flipped_count}/{flip.qualifying_count} flipped ({frac}, "
        f"hardware reference {flip.hardware_fraction:.0%}) -> {path}"
    )


STAGES = ("sweep", "synth", "split", "train", "eval", "report", "flip")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agcml",
        description=(
            "Gain-control prediction pipeline: label interferer configs, "
            "synthesize burst signals, train and evaluate the window "
            "classifier, and measure packet error rates."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML config file")
    common.add_argument("--seed", type=int, default=None, help="override the base seed")
    common.add_argument(
        "--out", type=Path, default=Path("out"), help="artifact directory (default: out)"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "label the interferer config grid",
        "synth": "synthesize a burst-pattern signal from the labeled grid",
        "split": "blocked cross-validation splits and window assembly",
        "train": "train one classifier per cross-validation run",
        "eval": "score each run's model against its majority baseline",
        "report": "packet error rate sweep, assisted vs reference",
        "flip": "force the early-arrival gain into vulnerable configs",
    }
    for stage in STAGES:
        p = sub.add_parser(stage, parents=[common], help=helps[stage])
        if stage == "report":
            p.add_argument(
                "--mode",
                choices=("reference", "scenario4", "both"),
                default="both",
                help="which replay modes to sweep (default: both)",
            )
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            cmd_sweep(config, out)
        elif args.command == "synth":
            cmd_synth(config, out)
        elif args.command == "split":
            cmd_split(config, out)
        elif args.command == "train":
            cmd_train(config, out)
        elif args.command == "eval":
            cmd_eval(config, out)
        elif args.command == "report":
            cmd_report(config, out, args.mode)
        elif args.command == "flip":
            cmd_flip(config, out)
        else:  # pragma: no cover - argparse enforces choices
            raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
