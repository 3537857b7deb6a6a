"""Functional-mode replay: per-packet metric capture, last-N buffer,
prediction at packet end, gain application policy and PER measurement.

Two modes: the reference replay runs the native gain loop untouched and
never consults a model; the assisted mode applies the class predicted at
the previous packet's end, both as the warm-up upper limit and as the
frozen index for the payload. A no-good-gain prediction falls back to the
native loop and feeds the channel-blacklist countermeasure counter.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agc import DEFAULT_TARGET_WINDOW_DBM
from .errors import UsageError
from .labeling import (
    DEFAULT_JITTER_SIGMA_DB,
    MetricsVector,
    PacketConfig,
    ReceptionStatus,
    label_config,
    receive_packet,
)
from .mlengine import TrainedModel, predict
from .rxsim import GainTable, LinkBudget
from .signalgen import (
    DEFAULT_AFTER_FREEZE_PROB,
    SyntheticSignal,
    constant_signal,
)
from .util import derive_seed

log = logging.getLogger(__name__)


class RuntimeMode(enum.Enum):
    REFERENCE = "reference"
    SCENARIO4 = "scenario4"


class CountermeasureAction(enum.Enum):
    NONE = "none"
    BLACKLIST_CHANNEL = "blacklist_channel"


def countermeasure_hook(consecutive_x: int, threshold: int) -> CountermeasureAction:
    """Blacklist once the no-good-gain streak reaches the threshold; the
    action is recorded in the report only, there is no hopping model."""
    if threshold < 1:
        raise UsageError(f"countermeasure threshold must be >= 1, got {threshold}")
    if consecutive_x >= threshold:
        return CountermeasureAction.BLACKLIST_CHANNEL
    return CountermeasureAction.NONE


_T1_TAG = "preamble_end_freeze"
_T2_TAG = "payload_mid"
_T3_TAG = "packet_end"


@dataclass(frozen=True)
class MetricsSchedule:
    """Capture points as phase tags referenced to sync, not wall-clock."""

    t1: str = _T1_TAG
    t2: str = _T2_TAG
    t3: str = _T3_TAG

    def __post_init__(self) -> None:
        if (self.t1, self.t2, self.t3) != (_T1_TAG, _T2_TAG, _T3_TAG):
            raise UsageError(
                "capture points are fixed to "
                f"({_T1_TAG!r}, {_T2_TAG!r}, {_T3_TAG!r}) in packet order"
            )


DEFAULT_SCHEDULE = MetricsSchedule()


@dataclass(frozen=True)
class RuntimeScenario:
    mode: RuntimeMode
    window_len: int = 10
    # None disables the blacklist countermeasure.
    countermeasure_threshold: Optional[int] = 3

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise UsageError(f"window_len must be >= 1, got {self.window_len}")
        if self.countermeasure_threshold is not None and self.countermeasure_threshold < 1:
            raise UsageError("countermeasure threshold must be >= 1")


@dataclass(frozen=True)
class T1Snapshot:
    frozen_index: int
    wideband_rssi_dbm: float


@dataclass(frozen=True)
class T2Snapshot:
    payload_snr_db: float
    payload_overdrive_db: float
    wideband_rssi_dbm: float


@dataclass(frozen=True)
class T3Snapshot:
    metrics: MetricsVector
    status: ReceptionStatus


@dataclass(frozen=True)
class PacketTrace:
    index: int
    native_index: int
    applied_index: int
    predicted_class: Optional[int]
    prediction_applied: bool
    action: CountermeasureAction
    t1: T1Snapshot
    t2: T2Snapshot
    t3: T3Snapshot


@dataclass(frozen=True)
class RunResult:
    mode: RuntimeMode
    traces: tuple[PacketTrace, ...]
    packets_sent: int
    packets_good: int
    per_percent: float
    predictions_made: int
    blacklist_events: tuple[int, ...]
    buffer_resets: int

    def records(self):
        return [t.t3 for t in self.traces]


def run_signal(
    signal: SyntheticSignal,
    model: Optional[TrainedModel],
    scenario: RuntimeScenario,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB,
    schedule: MetricsSchedule = DEFAULT_SCHEDULE,
) -> RunResult:
    """Replay a signal packet by packet under one mode.

    The prediction applied to packet k was computed at packet k-1's end
    from the buffer of the last window_len packets, so the first
    window_len packets always run natively. Deterministic: reception
    reuses each packet's stored scenario seed.
    """
    assisted = scenario.mode is RuntimeMode.SCENARIO4
    if assisted:
        if model is None:
            raise UsageError("assisted mode requires a trained model")
        if model.window_len != scenario.window_len:
            raise UsageError(
                f"model window_len {model.window_len} != scenario {scenario.window_len}"
            )
        if model.gain_count != table.size:
            raise UsageError(
                f"model gain_count {model.gain_count} != gain table size {table.size}"
            )

    buffer: deque[MetricsVector] = deque(maxlen=scenario.window_len)
    pending_prediction: Optional[int] = None
    consecutive_x = 0
    traces: list[PacketTrace] = []
    blacklist_events: list[int] = []
    predictions_made = 0
    buffer_resets = 0
    good = 0

    for pkt in signal.packets:
        predicted = pending_prediction
        use_gain: Optional[int] = None
        action = CountermeasureAction.NONE
        if assisted and predicted is not None:
            if predicted < table.size:
                use_gain = predicted
                consecutive_x = 0
            else:
                # No-good-gain call: nothing to apply, run native and count
                # the streak toward the blacklist countermeasure.
                consecutive_x += 1
                if scenario.countermeasure_threshold is not None:
                    action = countermeasure_hook(
                        consecutive_x, scenario.countermeasure_threshold
                    )
                    if (
                        action is CountermeasureAction.BLACKLIST_CHANNEL
                        and consecutive_x == scenario.countermeasure_threshold
                    ):
                        blacklist_events.append(pkt.index)

        reception = receive_packet(
            pkt.record.scenario,
            table,
            budget,
            target_window_dbm,
            upper_limit=use_gain,
            replace_index=use_gain,
            jitter_sigma_db=jitter_sigma_db,
        )

        # T1: sync/freeze. The per-packet metric scratch state starts here.
        buffer_resets += 1
        t1 = T1Snapshot(
            frozen_index=reception.native_index,
            wideband_rssi_dbm=reception.preamble_rssi_wb_dbm,
        )
        t2 = T2Snapshot(
            payload_snr_db=reception.payload.snr_db,
            payload_overdrive_db=reception.payload.overdrive_db,
            wideband_rssi_dbm=reception.payload.wideband_dbm,
        )
        t3 = T3Snapshot(metrics=reception.record.metrics, status=reception.record.status)

        if reception.record.status is ReceptionStatus.GOOD_RECEPTION:
            good += 1

        # T3: completed-packet metrics enter the history buffer, then the
        # next packet's gain class is predicted (assisted mode only).
        buffer.append(reception.record.metrics)
        pending_prediction = None
        if assisted and len(buffer) == scenario.window_len:
            feats: list[float] = []
            for metrics in buffer:
                feats.extend(metrics.as_features())
            pending_prediction, _ = predict(model, feats)
            predictions_made += 1

        traces.append(
            PacketTrace(
                index=pkt.index,
                native_index=reception.native_index,
                applied_index=reception.applied_index,
                predicted_class=predicted,
                prediction_applied=use_gain is not None,
                action=action,
                t1=t1,
                t2=t2,
                t3=t3,
            )
        )

    sent = len(signal.packets)
    per = 100.0 * (1.0 - good / sent) if sent else 0.0
    return RunResult(
        mode=scenario.mode,
        traces=tuple(traces),
        packets_sent=sent,
        packets_good=good,
        per_percent=per,
        predictions_made=predictions_made,
        blacklist_events=tuple(blacklist_events),
        buffer_resets=buffer_resets,
    )


# -------- PER sweep --------

DEFAULT_SWEEP_LEVELS_DBM = tuple(float(b) for b in range(-41, -10, 6))


@dataclass(frozen=True)
class PerSweepSpec:
    wanted_dbm: float = -60.0
    blocker_levels_dbm: tuple[float, ...] = DEFAULT_SWEEP_LEVELS_DBM
    offset_mhz: float = 37.0
    packets: int = 50
    repetitions: int = 3
    after_freeze_prob: float = DEFAULT_AFTER_FREEZE_PROB
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise UsageError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.packets < 1:
            raise UsageError(f"packets must be >= 1, got {self.packets}")
        if not self.blocker_levels_dbm:
            raise UsageError("sweep needs at least one blocker level")


@dataclass(frozen=True)
class PerRow:
    blocker_dbm: float
    mode: RuntimeMode
    packets_sent: int
    packets_good: int
    per_percent: float
    repetitions: int
    per_std: float


@dataclass(frozen=True)
class PerReport:
    spec: PerSweepSpec
    rows: tuple[PerRow, ...]

    def row(self, blocker_dbm: float, mode: RuntimeMode) -> Optional[PerRow]:
        for r in self.rows:
            if r.blocker_dbm == blocker_dbm and r.mode == mode:
                return r
        return None


def per_sweep(
    spec: PerSweepSpec,
    model: Optional[TrainedModel],
    modes: Sequence[RuntimeMode],
    table: GainTable,
    budget: LinkBudget,
    window_len: int = 10,
    countermeasure_threshold: Optional[int] = 3,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> PerReport:
    """PER vs blocker level under a continuous interferer.

    Each (level, repetition) cell synthesizes one constant-config signal
    from a derived seed and replays the SAME signal in every requested
    mode, so mode comparisons are paired packet for packet.
    """
    if not modes:
        raise UsageError("per sweep needs at least one mode")
    rows: list[PerRow] = []
    for level in spec.blocker_levels_dbm:
        labeled = label_config(
            PacketConfig(spec.wanted_dbm, level, spec.offset_mhz),
            table,
            budget,
            target_window_dbm,
        )
        per_mode: dict[RuntimeMode, list[RunResult]] = {m: [] for m in modes}
        for rep in range(spec.repetitions):
            rep_seed = derive_seed(spec.seed, "per", repr(float(level)), rep)
            sig = constant_signal(
                labeled,
                spec.packets,
                rep_seed,
                table,
                budget,
                after_freeze_prob=spec.after_freeze_prob,
                jitter_sigma_db=spec.jitter_sigma_db,
                target_window_dbm=target_window_dbm,
            )
            for mode in modes:
                scenario = RuntimeScenario(
                    mode=mode,
                    window_len=window_len,
                    countermeasure_threshold=countermeasure_threshold,
                )
                per_mode[mode].append(
                    run_signal(
                        sig,
                        model if mode is RuntimeMode.SCENARIO4 else None,
                        scenario,
                        table,
                        budget,
                        target_window_dbm,
                        spec.jitter_sigma_db,
                    )
                )
        for mode in modes:
            results = per_mode[mode]
            pers = [r.per_percent for r in results]
            rows.append(
                PerRow(
                    blocker_dbm=float(level),
                    mode=mode,
                    packets_sent=sum(r.packets_sent for r in results),
                    packets_good=sum(r.packets_good for r in results),
                    per_percent=float(np.mean(pers)),
                    repetitions=spec.repetitions,
                    per_std=float(np.std(pers)),
                )
            )
            log.info(
                "per sweep: blocker %.1f dBm %s -> %.1f%% (std %.2f)",
                level, mode.value, rows[-1].per_percent, rows[-1].per_std,
            )
    return PerReport(spec=spec, rows=tuple(rows))


def write_per_csv(report: PerReport, path: Path | str) -> None:
    """Pivoted per-level table; a mode's columns stay blank when it was
    not part of the run."""
    lines = ["blocker_dbm,per_ref,per_s4,per_std_ref,per_std_s4"]
    for level in report.spec.blocker_levels_dbm:
        ref = report.row(level, RuntimeMode.REFERENCE)
        s4 = report.row(level, RuntimeMode.SCENARIO4)

        def cell(row: Optional[PerRow], attr: str) -> str:
            return repr(float(getattr(row, attr))) if row is not None else ""

        lines.append(
            ",".join(
                [
                    repr(float(level)),
                    cell(ref, "per_percent"),
                    cell(s4, "per_percent"),
                    cell(ref, "per_std"),
                    cell(s4, "per_std"),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_gnuplot_dat(report: PerReport, mode: RuntimeMode, path: Path | str) -> None:
    lines = [f"# blocker_dbm per_percent ({mode.value})"]
    for level in report.spec.blocker_levels_dbm:
        row = report.row(level, mode)
        if row is not None:
            lines.append(f"{repr(float(level))} {repr(float(row.per_percent))}")
    Path(path).write_text("\n".join(lines) + "\n")


def per_report_rows_json(report: PerReport) -> list[dict]:
    return [
        {
            "blocker_dbm": r.blocker_dbm,
            "mode": r.mode.value,
            "packets_sent": r.packets_sent,
            "packets_good": r.packets_good,
            "per_percent": r.per_percent,
            "repetitions": r.repetitions,
            "per_std": r.per_std,
        }
        for r in report.rows
    ]
