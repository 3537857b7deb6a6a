"""Synthetic interferer-pattern signals, blocked splitting and windowing.

A signal is a sequence of received packets whose blocker powers follow a
cyclic band pattern (burst-like activity at per-packet granularity). Splits
are blocked in time: contiguous folds, one contiguous test stretch per
fold, and sliding windows that never cross a piece boundary, so no feature
window ever mixes train and test packets.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agc import DEFAULT_TARGET_WINDOW_DBM
from .errors import CoverageError, DataError, SizingError, UsageError
from .labeling import (
    DEFAULT_JITTER_SIGMA_DB,
    LabeledConfig,
    MetricsVector,
    PacketConfig,
    ReceptionRecord,
    ReceptionStatus,
    _optim_str,
    _parse_optim,
    optim_class_id,
    receive_packet,
)
from .rxsim import Arrival, GainTable, LinkBudget, PacketScenario
from .util import derive_seed

log = logging.getLogger(__name__)


class Band(enum.Enum):
    """Interferer activity bands by blocker power."""

    ABSENT = "absent"
    WEAK = "weak"
    MEAN = "mean"
    HIGH = "high"


# Nominal band ranges in dBm. Edges are resolved half-open upward so the
# mapping is total: a power on a boundary belongs to the stronger band,
# and the -71/-70 and -47/-46 gaps fall to the weaker side's upper bin.
BAND_RANGES_DBM = {
    Band.HIGH: (-23.0, 0.0),
    Band.MEAN: (-46.0, -23.0),
    Band.WEAK: (-70.0, -47.0),
}


def classify_band(blocker_dbm: Optional[float]) -> Band:
    if blocker_dbm is None or blocker_dbm < -71.0:
        return Band.ABSENT
    if blocker_dbm < -46.0:
        return Band.WEAK
    if blocker_dbm < -23.0:
        return Band.MEAN
    return Band.HIGH


# Default activity mix: long strong bursts and idle gaps with shorter
# mid/weak stretches, so most packets sit inside a run rather than on a
# band transition.
DEFAULT_PATTERN_BANDS = (
    (Band.HIGH, 16),
    (Band.ABSENT, 16),
    (Band.MEAN, 6),
    (Band.WEAK, 8),
    (Band.HIGH, 12),
    (Band.ABSENT, 14),
)

DEFAULT_AFTER_FREEZE_PROB = 0.5


@dataclass(frozen=True)
class WiFiPattern:
    band_sequence: tuple[tuple[Band, int], ...] = DEFAULT_PATTERN_BANDS

    def __post_init__(self) -> None:
        if not self.band_sequence:
            raise UsageError("pattern needs at least one band run")
        for band, run_len in self.band_sequence:
            if not isinstance(band, Band):
                raise UsageError(f"not a band: {band!r}")
            if run_len < 1:
                raise UsageError(f"run length must be >= 1, got {run_len}")

    @property
    def cycle_length(self) -> int:
        return sum(run for _, run in self.band_sequence)

    def band_at(self, index: int) -> Band:
        """Band of the index-th packet under cyclic repetition."""
        pos = index % self.cycle_length
        for band, run_len in self.band_sequence:
            if pos < run_len:
                return band
            pos -= run_len
        raise AssertionError("unreachable: cycle_length mismatch")

    def bands_used(self) -> tuple[Band, ...]:
        seen: list[Band] = []
        for band, _ in self.band_sequence:
            if band not in seen:
                seen.append(band)
        return tuple(seen)


@dataclass(frozen=True)
class SignalPacket:
    index: int
    config: LabeledConfig
    arrival: Arrival
    band: Band
    record: ReceptionRecord


@dataclass(frozen=True)
class SyntheticSignal:
    reference_wanted_dbm: float
    packets: tuple[SignalPacket, ...]
    seed: int
    pattern: Optional[WiFiPattern] = None

    def __len__(self) -> int:
        return len(self.packets)


def _receive_as_packet(
    index: int,
    labeled: LabeledConfig,
    arrival: Arrival,
    band: Band,
    packet_seed: int,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float],
    jitter_sigma_db: float,
) -> SignalPacket:
    reception = receive_packet(
        labeled.config.scenario(arrival, packet_seed),
        table,
        budget,
        target_window_dbm,
        jitter_sigma_db=jitter_sigma_db,
    )
    return SignalPacket(
        index=index, config=labeled, arrival=arrival, band=band, record=reception.record
    )


def synthesize_signal(
    pattern: WiFiPattern,
    pool: Sequence[LabeledConfig],
    length: int,
    seed: int,
    table: GainTable,
    budget: LinkBudget,
    reference_wanted_dbm: float,
    after_freeze_prob: float = DEFAULT_AFTER_FREEZE_PROB,
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> SyntheticSignal:
    """Emit `length` packets following the pattern's band runs cyclically.

    One config is drawn uniformly (seeded) among matching pool configs per
    band-run instance: a burst is a single emitter, so its power and offset
    hold for the whole run. Blocked packets each toss a seeded coin for
    whether the interferer was already on during AGC convergence or landed
    only after the freeze. Reception happens under the native AGC policy;
    gain replacement is the runtime's job.
    """
    if length < 1:
        raise UsageError(f"signal length must be >= 1, got {length}")
    if not 0.0 <= after_freeze_prob <= 1.0:
        raise UsageError(f"after_freeze_prob must be in [0,1], got {after_freeze_prob}")

    at_reference = [row for row in pool if row.config.wanted_dbm == reference_wanted_dbm]
    by_band: dict[Band, list[LabeledConfig]] = {band: [] for band in Band}
    for row in at_reference:
        by_band[classify_band(row.config.blocker_dbm)].append(row)

    for band in pattern.bands_used():
        if not by_band[band]:
            raise CoverageError(
                f"pool has no configs in band {band.value!r} "
                f"at wanted {reference_wanted_dbm} dBm"
            )

    rng = np.random.default_rng(derive_seed(seed, "draw"))
    packets: list[SignalPacket] = []
    labeled: Optional[LabeledConfig] = None
    run_left = 0
    run_pos = 0
    for i in range(length):
        if run_left == 0:
            band, run_left = pattern.band_sequence[run_pos % len(pattern.band_sequence)]
            run_pos += 1
            subset = by_band[band]
            labeled = subset[int(rng.integers(len(subset)))]
        run_left -= 1
        if labeled.config.blocker_dbm is None:
            arrival = Arrival.ABSENT
        else:
            after = bool(rng.random() < after_freeze_prob)
            arrival = Arrival.AFTER_FREEZE if after else Arrival.BEFORE_FREEZE
        packets.append(
            _receive_as_packet(
                i, labeled, arrival, band,
                derive_seed(seed, "packet", i),
                table, budget, target_window_dbm, jitter_sigma_db,
            )
        )
    log.info(
        "synthesized %d packets (cycle %d, %d pool configs at reference)",
        length, pattern.cycle_length, len(at_reference),
    )
    return SyntheticSignal(
        reference_wanted_dbm=reference_wanted_dbm,
        packets=tuple(packets),
        seed=seed,
        pattern=pattern,
    )


def constant_signal(
    labeled: LabeledConfig,
    length: int,
    seed: int,
    table: GainTable,
    budget: LinkBudget,
    after_freeze_prob: float = DEFAULT_AFTER_FREEZE_PROB,
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> SyntheticSignal:
    """Continuous (non-patterned) interferer: every packet the same config.

    Models steady emission rather than bursts; per-packet arrival is still
    a seeded coin, standing in for where the interferer edge lands relative
    to each packet's AGC freeze.
    """
    if length < 1:
        raise UsageError(f"signal length must be >= 1, got {length}")
    band = classify_band(labeled.config.blocker_dbm)
    rng = np.random.default_rng(derive_seed(seed, "draw"))
    packets = []
    for i in range(length):
        if labeled.config.blocker_dbm is None:
            arrival = Arrival.ABSENT
        else:
            after = bool(rng.random() < after_freeze_prob)
            arrival = Arrival.AFTER_FREEZE if after else Arrival.BEFORE_FREEZE
        packets.append(
            _receive_as_packet(
                i, labeled, arrival, band,
                derive_seed(seed, "packet", i),
                table, budget, target_window_dbm, jitter_sigma_db,
            )
        )
    return SyntheticSignal(
        reference_wanted_dbm=labeled.config.wanted_dbm,
        packets=tuple(packets),
        seed=seed,
    )


# -------- blocked splitting --------


@dataclass(frozen=True)
class FoldSplit:
    """Index geometry of one fold: [fold_start, fold_end) with the test
    stretch [test_start, test_end) inside it."""

    fold_start: int
    fold_end: int
    test_start: int
    test_end: int


def blocked_ranges(
    n: int,
    folds: int,
    test_frac: float,
    seed: int,
    window_len: Optional[int] = None,
) -> list[FoldSplit]:
    """Pure index-level splitter; packet content never matters here."""
    if folds < 1:
        raise UsageError(f"folds must be >= 1, got {folds}")
    if not 0.0 < test_frac < 1.0:
        raise UsageError(f"test_frac must be in (0,1), got {test_frac}")
    if n < folds:
        raise SizingError(f"{n} packets cannot form {folds} folds")

    base, extra = divmod(n, folds)
    rng = np.random.default_rng(derive_seed(seed, "split"))
    splits: list[FoldSplit] = []
    start = 0
    for k in range(folds):
        fold_len = base + (1 if k < extra else 0)
        if fold_len < 2:
            raise SizingError(f"fold {k} has {fold_len} packets; need at least 2")
        if window_len is not None and fold_len <= window_len + 1:
            raise SizingError(
                f"fold {k} has {fold_len} packets; "
                f"window of {window_len} needs more than {window_len + 1}"
            )
        test_len = int(round(test_frac * fold_len))
        test_len = min(max(test_len, 1), fold_len - 1)
        test_off = int(rng.integers(fold_len - test_len + 1))
        splits.append(
            FoldSplit(
                fold_start=start,
                fold_end=start + fold_len,
                test_start=start + test_off,
                test_end=start + test_off + test_len,
            )
        )
        start += fold_len
    return splits


Piece = tuple[SignalPacket, ...]


def blocked_split(
    signal: SyntheticSignal,
    folds: int,
    test_frac: float = 0.30,
    seed: int = 0,
    window_len: Optional[int] = None,
) -> tuple[list[Piece], list[Piece]]:
    """Cut the signal into folds and carve one contiguous test stretch per
    fold; returns (train_pieces, test_pieces), each piece contiguous in the
    original signal so windows can be formed without leakage."""
    splits = blocked_ranges(len(signal), folds, test_frac, seed, window_len)
    train_pieces: list[Piece] = []
    test_pieces: list[Piece] = []
    pkts = signal.packets
    for fold in splits:
        left = pkts[fold.fold_start : fold.test_start]
        mid = pkts[fold.test_start : fold.test_end]
        right = pkts[fold.test_end : fold.fold_end]
        if left:
            train_pieces.append(left)
        test_pieces.append(mid)
        if right:
            train_pieces.append(right)
    return train_pieces, test_pieces


# -------- windowing --------


@dataclass(frozen=True)
class WindowSample:
    """Flattened metrics of window_len consecutive packets plus the class
    of the packet right after the window (its best-gain label)."""

    features: tuple[float, ...]
    label: int
    window_len: int
    feature_indices: tuple[int, ...]
    label_index: int


def make_windows(
    pieces: Sequence[Piece],
    window_len: int,
    gain_count: int,
) -> list[WindowSample]:
    """Stride-1 windows inside each piece; pieces shorter than
    window_len + 1 contribute nothing."""
    if window_len < 1:
        raise UsageError(f"window_len must be >= 1, got {window_len}")
    samples: list[WindowSample] = []
    skipped = 0
    for piece in pieces:
        if len(piece) < window_len + 1:
            skipped += 1
            continue
        for ofs in range(len(piece) - window_len):
            window = piece[ofs : ofs + window_len]
            target = piece[ofs + window_len]
            feats: list[float] = []
            for pkt in window:
                feats.extend(pkt.record.metrics.as_features())
            samples.append(
                WindowSample(
                    features=tuple(feats),
                    label=optim_class_id(target.config.agc_optim, gain_count),
                    window_len=window_len,
                    feature_indices=tuple(p.index for p in window),
                    label_index=target.index,
                )
            )
    if skipped:
        log.info("windowing skipped %d pieces shorter than %d packets", skipped, window_len + 1)
    return samples


# -------- cross-validation --------


@dataclass(frozen=True)
class SplitRun:
    run_index: int
    seed: int
    train_pieces: tuple[Piece, ...]
    test_pieces: tuple[Piece, ...]
    train_class_counts: dict[int, int]
    test_class_counts: dict[int, int]


def _class_counts(pieces: Sequence[Piece], gain_count: int) -> dict[int, int]:
    counts: dict[int, int] = {}
    for piece in pieces:
        for pkt in piece:
            cid = optim_class_id(pkt.config.agc_optim, gain_count)
            counts[cid] = counts.get(cid, 0) + 1
    return dict(sorted(counts.items()))


def crossval_runs(
    signal: SyntheticSignal,
    folds: int,
    k_repeats: int,
    seed: int,
    gain_count: int,
    test_frac: float = 0.30,
    window_len: Optional[int] = None,
) -> list[SplitRun]:
    """k independent blocked splits of the same signal, seeds derived per
    run, with per-run packet-label class balance for the logs."""
    if k_repeats < 1:
        raise UsageError(f"k_repeats must be >= 1, got {k_repeats}")
    runs: list[SplitRun] = []
    for r in range(k_repeats):
        run_seed = derive_seed(seed, "crossval", r)
        train_pieces, test_pieces = blocked_split(
            signal, folds, test_frac, run_seed, window_len
        )
        run = SplitRun(
            run_index=r,
            seed=run_seed,
            train_pieces=tuple(train_pieces),
            test_pieces=tuple(test_pieces),
            train_class_counts=_class_counts(train_pieces, gain_count),
            test_class_counts=_class_counts(test_pieces, gain_count),
        )
        log.info(
            "split run %d: train classes %s, test classes %s",
            r, run.train_class_counts, run.test_class_counts,
        )
        runs.append(run)
    return runs


# -------- serialization --------

SIGNAL_SCHEMA = "agcml.signal.v1"
WINDOWS_SCHEMA = "agcml.windows.v1"

_SIGNAL_COLUMNS = (
    "index", "band", "arrival", "seed",
    "wanted_dbm", "blocker_dbm", "offset_mhz",
    "agc_before", "agc_after", "status_before", "status_after", "agc_optim",
    "frozen_index", "status",
    "rssi_wb_dbm", "rssi_nb_dbm", "snr_db", "lqi", "crc_flag", "aa_flag",
)


def write_signal_csv(signal: SyntheticSignal, path: Path | str) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {SIGNAL_SCHEMA}\n")
        fh.write(
            f"# reference_wanted_dbm={repr(float(signal.reference_wanted_dbm))}"
            f" seed={signal.seed}\n"
        )
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SIGNAL_COLUMNS)
        for pkt in signal.packets:
            cfg = pkt.config
            m = pkt.record.metrics
            writer.writerow(
                [
                    pkt.index,
                    pkt.band.value,
                    pkt.arrival.value,
                    pkt.record.scenario.seed,
                    repr(cfg.config.wanted_dbm),
                    "" if cfg.config.blocker_dbm is None else repr(cfg.config.blocker_dbm),
                    repr(cfg.config.offset_mhz),
                    cfg.agc_before,
                    cfg.agc_after,
                    cfg.status_before.value,
                    cfg.status_after.value,
                    _optim_str(cfg.agc_optim),
                    pkt.record.frozen_index,
                    pkt.record.status.value,
                    repr(m.rssi_wb_dbm),
                    repr(m.rssi_nb_dbm),
                    repr(m.snr_db),
                    m.lqi,
                    m.crc_flag,
                    m.aa_flag,
                ]
            )


def read_signal_csv(path: Path | str) -> SyntheticSignal:
    path = Path(path)
    if not path.exists():
        raise DataError(f"signal file not found: {path}")
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {SIGNAL_SCHEMA}":
            raise DataError(f"unrecognized signal schema in {path}: {header!r}")
        meta = fh.readline().strip()
        try:
            fields = dict(part.split("=", 1) for part in meta.lstrip("# ").split(" "))
            reference = float(fields["reference_wanted_dbm"])
            seed = int(fields["seed"])
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad signal metadata line in {path}: {meta!r}") from exc
        reader = csv.DictReader(fh, lineterminator="\n")
        packets = []
        for rec in reader:
            blocker = float(rec["blocker_dbm"]) if rec["blocker_dbm"] else None
            config = PacketConfig(
                wanted_dbm=float(rec["wanted_dbm"]),
                blocker_dbm=blocker,
                offset_mhz=float(rec["offset_mhz"]),
            )
            labeled = LabeledConfig(
                config=config,
                agc_before=int(rec["agc_before"]),
                agc_after=int(rec["agc_after"]),
                status_before=ReceptionStatus(rec["status_before"]),
                status_after=ReceptionStatus(rec["status_after"]),
                agc_optim=_parse_optim(rec["agc_optim"]),
            )
            arrival = Arrival(rec["arrival"])
            scenario = PacketScenario(
                wanted_dbm=config.wanted_dbm,
                blocker_dbm=blocker,
                offset_mhz=config.offset_mhz,
                arrival=arrival,
                seed=int(rec["seed"]),
            )
            metrics = MetricsVector(
                rssi_wb_dbm=float(rec["rssi_wb_dbm"]),
                rssi_nb_dbm=float(rec["rssi_nb_dbm"]),
                snr_db=float(rec["snr_db"]),
                lqi=int(rec["lqi"]),
                crc_flag=int(rec["crc_flag"]),
                aa_flag=int(rec["aa_flag"]),
                frozen_index=int(rec["frozen_index"]),
            )
            packets.append(
                SignalPacket(
                    index=int(rec["index"]),
                    config=labeled,
                    arrival=arrival,
                    band=Band(rec["band"]),
                    record=ReceptionRecord(
                        scenario=scenario,
                        frozen_index=metrics.frozen_index,
                        status=ReceptionStatus(rec["status"]),
                        metrics=metrics,
                    ),
                )
            )
    return SyntheticSignal(
        reference_wanted_dbm=reference, packets=tuple(packets), seed=seed
    )


def write_windows_csv(samples: Sequence[WindowSample], path: Path | str) -> None:
    path = Path(path)
    dim = len(samples[0].features) if samples else 0
    with path.open("w", newline="") as fh:
        fh.write(f"# {WINDOWS_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["label", "label_index", "window_len", "feature_indices"]
            + [f"f{i}" for i in range(dim)]
        )
        for s in samples:
            writer.writerow(
                [
                    s.label,
                    s.label_index,
                    s.window_len,
                    ";".join(str(i) for i in s.feature_indices),
                ]
                + [repr(v) for v in s.features]
            )


def read_windows_csv(path: Path | str) -> list[WindowSample]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"window file not found: {path}")
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {WINDOWS_SCHEMA}":
            raise DataError(f"unrecognized window schema in {path}: {header!r}")
        reader = csv.reader(fh, lineterminator="\n")
        try:
            columns = next(reader)
        except StopIteration as exc:
            raise DataError(f"window file {path} has no column header") from exc
        dim = len(columns) - 4
        samples = []
        for row in reader:
            samples.append(
                WindowSample(
                    features=tuple(float(v) for v in row[4 : 4 + dim]),
                    label=int(row[0]),
                    window_len=int(row[2]),
                    feature_indices=tuple(
                        int(i) for i in row[3].split(";") if i != ""
                    ),
                    label_index=int(row[1]),
                )
            )
    return samples
