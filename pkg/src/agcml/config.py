"""Experiment configuration: one frozen tree that fully specifies a run.

Loaded from TOML with defaults filled in; unknown keys are rejected so a
typo cannot silently fall back to a default. The hash of the resolved
tree is stamped into every artifact manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .agc import DEFAULT_TARGET_WINDOW_DBM
from .errors import UsageError
from .labeling import DEFAULT_JITTER_SIGMA_DB, SweepSpec
from .mlengine import TrainParams
from .rxsim import GainTable, LinkBudget
from .signalgen import Band, DEFAULT_AFTER_FREEZE_PROB, WiFiPattern
from .util import stable_hash


@dataclass(frozen=True)
class SignalConfig:
    reference_wanted_dbm: float = -60.0
    length: int = 2400
    after_freeze_prob: float = DEFAULT_AFTER_FREEZE_PROB
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB

    def __post_init__(self) -> None:
        if self.length < 1:
            raise UsageError("signal length must be >= 1")
        if self.jitter_sigma_db < 0:
            raise UsageError("jitter sigma must be >= 0")


@dataclass(frozen=True)
class SplitConfig:
    folds: int = 5
    test_frac: float = 0.30
    repeats: int = 3

    def __post_init__(self) -> None:
        if self.folds < 1:
            raise UsageError("folds must be >= 1")
        if self.repeats < 1:
            raise UsageError("repeats must be >= 1")
        if not 0.0 < self.test_frac < 1.0:
            raise UsageError("test_frac must be in (0,1)")


@dataclass(frozen=True)
class RuntimeConfig:
    countermeasure_threshold: Optional[int] = 3

    def __post_init__(self) -> None:
        if self.countermeasure_threshold is not None and self.countermeasure_threshold < 1:
            raise UsageError("countermeasure threshold must be >= 1")


# Report sweep reaches below the burst bands so the low end shows both
# modes on par before assistance starts to matter.
DEFAULT_REPORT_LEVELS_DBM = tuple(float(b) for b in range(-53, -10, 6))


@dataclass(frozen=True)
class ReportConfig:
    blocker_levels_dbm: tuple[float, ...] = DEFAULT_REPORT_LEVELS_DBM
    offset_mhz: float = 37.0
    packets: int = 50
    repetitions: int = 3
    # Which cross-validation run's model the report replays.
    model_run: int = 0

    def __post_init__(self) -> None:
        if not self.blocker_levels_dbm:
            raise UsageError("report needs at least one blocker level")
        if self.packets < 1 or self.repetitions < 1:
            raise UsageError("report packets and repetitions must be >= 1")
        if self.model_run < 0:
            raise UsageError("model_run must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    window_len: int = 10
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM
    gain_table: GainTable = field(default_factory=GainTable)
    link_budget: LinkBudget = field(default_factory=LinkBudget)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    pattern: WiFiPattern = field(default_factory=WiFiPattern)
    signal: SignalConfig = field(default_factory=SignalConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    train: TrainParams = field(default_factory=TrainParams)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise UsageError("window_len must be >= 1")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "window_len": self.window_len,
            "target_window_dbm": list(self.target_window_dbm),
            "gain_table": {
                "gains_db": list(self.gain_table.gains_db),
                "noise_floors_dbm": list(self.gain_table.noise_floors_dbm),
                "sat_threshold_dbm": self.gain_table.sat_threshold_dbm,
            },
            "link_budget": {
                "rejection_curve_db": [list(p) for p in self.link_budget.rejection_curve_db],
                "snr_aa_threshold_db": self.link_budget.snr_aa_threshold_db,
                "snr_crc_threshold_db": self.link_budget.snr_crc_threshold_db,
                "overdrive_margin_db": self.link_budget.overdrive_margin_db,
                "distortion_db_per_db": self.link_budget.distortion_db_per_db,
            },
            "sweep": {
                "wanted_dbm": list(self.sweep.wanted_dbm),
                "blocker_dbm": list(self.sweep.blocker_dbm),
                "offsets_mhz": list(self.sweep.offsets_mhz),
                "include_absent": self.sweep.include_absent,
            },
            "pattern": {
                "bands": [[band.value, run] for band, run in self.pattern.band_sequence],
            },
            "signal": {
                "reference_wanted_dbm": self.signal.reference_wanted_dbm,
                "length": self.signal.length,
                "after_freeze_prob": self.signal.after_freeze_prob,
                "jitter_sigma_db": self.signal.jitter_sigma_db,
            },
            "split": {
                "folds": self.split.folds,
                "test_frac": self.split.test_frac,
                "repeats": self.split.repeats,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "l2": self.train.l2,
                "seed": self.train.seed,
                "init_scale": self.train.init_scale,
                # TOML has no null, so uniform weighting spells as "none".
                "class_weights": (
                    "none"
                    if self.train.class_weights is None
                    else self.train.class_weights
                    if isinstance(self.train.class_weights, str)
                    else list(self.train.class_weights)
                ),
            },
            "runtime": {
                # TOML has no null; 0 spells "countermeasure disabled".
                "countermeasure_threshold": (
                    0
                    if self.runtime.countermeasure_threshold is None
                    else self.runtime.countermeasure_threshold
                ),
            },
            "report": {
                "blocker_levels_dbm": list(self.report.blocker_levels_dbm),
                "offset_mhz": self.report.offset_mhz,
                "packets": self.report.packets,
                "repetitions": self.report.repetitions,
                "model_run": self.report.model_run,
            },
        }


def config_hash(config: ExperimentConfig) -> str:
    return stable_hash(config.to_dict())


def _check_keys(section: str, data: Mapping[str, Any], allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        where = section or "top level"
        raise UsageError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def _build_gain_table(data: Mapping[str, Any]) -> GainTable:
    _check_keys("gain_table", data, {"gains_db", "noise_floors_dbm", "sat_threshold_dbm"})
    kwargs: dict[str, Any] = {}
    if "gains_db" in data:
        kwargs["gains_db"] = tuple(float(g) for g in data["gains_db"])
    if "noise_floors_dbm" in data:
        kwargs["noise_floors_dbm"] = tuple(float(f) for f in data["noise_floors_dbm"])
    if "sat_threshold_dbm" in data:
        kwargs["sat_threshold_dbm"] = float(data["sat_threshold_dbm"])
    return GainTable(**kwargs)


def _build_link_budget(data: Mapping[str, Any]) -> LinkBudget:
    allowed = {
        "rejection_curve_db",
        "snr_aa_threshold_db",
        "snr_crc_threshold_db",
        "overdrive_margin_db",
        "distortion_db_per_db",
    }
    _check_keys("link_budget", data, allowed)
    kwargs: dict[str, Any] = {}
    if "rejection_curve_db" in data:
        kwargs["rejection_curve_db"] = tuple(
            (float(p[0]), float(p[1])) for p in data["rejection_curve_db"]
        )
    for key in allowed - {"rejection_curve_db"}:
        if key in data:
            kwargs[key] = float(data[key])
    return LinkBudget(**kwargs)


def _build_sweep(data: Mapping[str, Any]) -> SweepSpec:
    _check_keys("sweep", data, {"wanted_dbm", "blocker_dbm", "offsets_mhz", "include_absent"})
    kwargs: dict[str, Any] = {}
    if "wanted_dbm" in data:
        kwargs["wanted_dbm"] = tuple(float(w) for w in data["wanted_dbm"])
    if "blocker_dbm" in data:
        kwargs["blocker_dbm"] = tuple(float(b) for b in data["blocker_dbm"])
    if "offsets_mhz" in data:
        kwargs["offsets_mhz"] = tuple(float(o) for o in data["offsets_mhz"])
    if "include_absent" in data:
        kwargs["include_absent"] = bool(data["include_absent"])
    return SweepSpec(**kwargs)


def _build_pattern(data: Mapping[str, Any]) -> WiFiPattern:
    _check_keys("pattern", data, {"bands"})
    if "bands" not in data:
        return WiFiPattern()
    try:
        bands = tuple((Band(str(name)), int(run)) for name, run in data["bands"])
    except ValueError as exc:
        raise UsageError(f"bad pattern band entry: {exc}") from exc
    return WiFiPattern(band_sequence=bands)


def _build_train(data: Mapping[str, Any]) -> TrainParams:
    allowed = {"learning_rate", "epochs", "l2", "seed", "init_scale", "class_weights"}
    _check_keys("train", data, allowed)
    kwargs: dict[str, Any] = {}
    for key in ("learning_rate", "l2", "init_scale"):
        if key in data:
            kwargs[key] = float(data[key])
    for key in ("epochs", "seed"):
        if key in data:
            kwargs[key] = int(data[key])
    if "class_weights" in data:
        raw = data["class_weights"]
        if raw is None or raw == "none":
            kwargs["class_weights"] = None
        elif isinstance(raw, str):
            kwargs["class_weights"] = raw
        else:
            kwargs["class_weights"] = tuple(float(w) for w in raw)
    return TrainParams(**kwargs)


def _simple_section(cls, section: str, data: Mapping[str, Any], fields: dict[str, Any]):
    _check_keys(section, data, set(fields))
    kwargs = {}
    for key, conv in fields.items():
        if key in data:
            kwargs[key] = conv(data[key])
    return cls(**kwargs)


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    _check_keys(
        "",
        data,
        {
            "seed", "window_len", "target_window_dbm",
            "gain_table", "link_budget", "sweep", "pattern",
            "signal", "split", "train", "runtime", "report",
        },
    )
    window = data.get("target_window_dbm")
    if window is not None and len(window) != 2:
        raise UsageError("target_window_dbm must be [low, high]")
    return ExperimentConfig(
        seed=int(data.get("seed", 0)),
        window_len=int(data.get("window_len", 10)),
        target_window_dbm=(
            DEFAULT_TARGET_WINDOW_DBM
            if window is None
            else (float(window[0]), float(window[1]))
        ),
        gain_table=_build_gain_table(data.get("gain_table", {})),
        link_budget=_build_link_budget(data.get("link_budget", {})),
        sweep=_build_sweep(data.get("sweep", {})),
        pattern=_build_pattern(data.get("pattern", {})),
        signal=_simple_section(
            SignalConfig,
            "signal",
            data.get("signal", {}),
            {
                "reference_wanted_dbm": float,
                "length": int,
                "after_freeze_prob": float,
                "jitter_sigma_db": float,
            },
        ),
        split=_simple_section(
            SplitConfig,
            "split",
            data.get("split", {}),
            {"folds": int, "test_frac": float, "repeats": int},
        ),
        train=_build_train(data.get("train", {})),
        runtime=_simple_section(
            RuntimeConfig,
            "runtime",
            data.get("runtime", {}),
            {"countermeasure_threshold": lambda v: None if v is None or int(v) == 0 else int(v)},
        ),
        report=_simple_section(
            ReportConfig,
            "report",
            data.get("report", {}),
            {
                "blocker_levels_dbm": lambda v: tuple(float(b) for b in v),
                "offset_mhz": float,
                "packets": int,
                "repetitions": int,
                "model_run": int,
            },
        ),
    )


def load_config(path: Optional[Path | str]) -> ExperimentConfig:
    """Read a TOML config; None means all defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
