"""Reception records, status classification and best-gain labeling.

A config (wanted power, blocker power, offset) is labeled by replaying it
twice, once with the interferer already present while the AGC converges and
once with it arriving only after the index froze. The label is the gain
index that would have survived the late arrival, or the explicit marker
NO_GOOD_GAIN when no index saves the packet.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agc import DEFAULT_TARGET_WINDOW_DBM, run_preamble_agc
from .errors import DataError, UsageError
from .rxsim import (
    Arrival,
    GainTable,
    LinkBudget,
    PacketScenario,
    Phase,
    PhaseState,
    combine_dbm,
    detect_outcomes,
    effective_snr,
)

log = logging.getLogger(__name__)

# Marker for "no gain index yields a good reception"; encoded as its own
# class (id == table size) on the ML side.
NO_GOOD_GAIN = None

# Sentinels written into metrics when sync was never found: the demodulator
# produced nothing, so the narrowband estimate collapses to the noise floor.
NO_RX_SNR_DB = -30.0
NO_RX_LQI = 0

METRICS_PER_PACKET = 7
DEFAULT_JITTER_SIGMA_DB = 0.5

CSV_SCHEMA = "agcml.dataset.v1"


class ReceptionStatus(enum.Enum):
    NO_RECEPTION = "no_reception"
    RADIO_ERROR = "radio_error"
    BAD_RECEPTION = "bad_reception"
    GOOD_RECEPTION = "good_reception"


def status_of(aa_found: bool, crc_passed: bool) -> ReceptionStatus:
    """Classify a reception from its two hardware flags.

    crc_passed means the CRC unit saw no error. Without sync the unit is
    never exercised, so its flag stays in the passed state; a failed CRC
    without sync can only come from a malfunctioning radio.
    """
    if aa_found:
        return ReceptionStatus.GOOD_RECEPTION if crc_passed else ReceptionStatus.BAD_RECEPTION
    return ReceptionStatus.NO_RECEPTION if crc_passed else ReceptionStatus.RADIO_ERROR


def lqi_of_snr(snr_db: float) -> int:
    """Map SNR onto the 0..255 link quality scale, saturating linearly."""
    scaled = (snr_db + 10.0) / 50.0
    return int(round(255.0 * min(1.0, max(0.0, scaled))))


@dataclass(frozen=True)
class MetricsVector:
    """Per-packet metrics in feature order."""

    rssi_wb_dbm: float
    rssi_nb_dbm: float
    snr_db: float
    lqi: int
    crc_flag: int
    aa_flag: int
    frozen_index: int

    def as_features(self) -> tuple[float, ...]:
        return (
            float(self.rssi_wb_dbm),
            float(self.rssi_nb_dbm),
            float(self.snr_db),
            float(self.lqi),
            float(self.crc_flag),
            float(self.aa_flag),
            float(self.frozen_index),
        )


@dataclass(frozen=True)
class ReceptionRecord:
    scenario: PacketScenario
    frozen_index: int
    status: ReceptionStatus
    metrics: MetricsVector


@dataclass(frozen=True)
class PacketReception:
    """A record plus the internals runtime instrumentation wants to see."""

    record: ReceptionRecord
    native_index: int
    applied_index: int
    preamble: PhaseState
    payload: PhaseState
    preamble_rssi_wb_dbm: float


def receive_packet(
    scenario: PacketScenario,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
    upper_limit: Optional[int] = None,
    replace_index: Optional[int] = None,
    jitter_sigma_db: float = DEFAULT_JITTER_SIGMA_DB,
) -> PacketReception:
    """Simulate one packet reception.

    The native AGC converges on the preamble under upper_limit (full range
    by default) and freezes. replace_index, when given, overrides the frozen
    index for the payload, which is how predictions and oracle sweeps are
    applied; sync detection still reflects the gain the preamble actually
    ran at. Reported power metrics get Gaussian jitter seeded from the
    scenario; outcomes never do.
    """
    upper = table.size - 1 if upper_limit is None else table.check_index(upper_limit)
    native = run_preamble_agc(scenario, upper, table, budget, target_window_dbm)
    applied = native if replace_index is None else table.check_index(replace_index)

    preamble = effective_snr(scenario, native, Phase.PREAMBLE, table, budget)
    payload = effective_snr(scenario, applied, Phase.PAYLOAD, table, budget)
    aa_found, crc_ok = detect_outcomes(preamble, payload, budget)
    crc_flag = crc_ok if aa_found else True
    status = status_of(aa_found, crc_flag)

    if jitter_sigma_db > 0.0:
        rng = np.random.default_rng(scenario.seed)
        noise = rng.normal(0.0, jitter_sigma_db, size=3)
    else:
        noise = np.zeros(3)

    rssi_wb = payload.wideband_dbm + noise[0]
    if aa_found:
        rssi_nb = combine_dbm([scenario.wanted_dbm, payload.in_band_dbm]) + noise[1]
        snr = payload.snr_db + noise[2]
        lqi = lqi_of_snr(snr)
    else:
        rssi_nb = table.noise_floors_dbm[applied]
        snr = NO_RX_SNR_DB
        lqi = NO_RX_LQI

    record = ReceptionRecord(
        scenario=scenario,
        frozen_index=applied,
        status=status,
        metrics=MetricsVector(
            rssi_wb_dbm=float(rssi_wb),
            rssi_nb_dbm=float(rssi_nb),
            snr_db=float(snr),
            lqi=lqi,
            crc_flag=int(crc_flag),
            aa_flag=int(aa_found),
            frozen_index=applied,
        ),
    )
    return PacketReception(
        record=record,
        native_index=native,
        applied_index=applied,
        preamble=preamble,
        payload=payload,
        preamble_rssi_wb_dbm=preamble.wideband_dbm,
    )


@dataclass(frozen=True)
class PacketConfig:
    """The swept condition a packet is received under."""

    wanted_dbm: float
    blocker_dbm: Optional[float]
    offset_mhz: float

    def scenario(self, arrival: Arrival, seed: int = 0) -> PacketScenario:
        return PacketScenario(
            wanted_dbm=self.wanted_dbm,
            blocker_dbm=self.blocker_dbm,
            offset_mhz=self.offset_mhz,
            arrival=arrival,
            seed=seed,
        )


@dataclass(frozen=True)
class LabeledConfig:
    config: PacketConfig
    agc_before: int
    agc_after: int
    status_before: ReceptionStatus
    status_after: ReceptionStatus
    agc_optim: Optional[int]


def label_config(
    config: PacketConfig,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> LabeledConfig:
    """Replay a config around the freeze and pick the surviving gain index.

    If the late arrival already ends well, the natively frozen index is the
    label. Otherwise the early-arrival index is forced into the late replay;
    if even that fails there is no good gain for this config.
    """
    blocked = config.blocker_dbm is not None
    arrival_early = Arrival.BEFORE_FREEZE if blocked else Arrival.ABSENT
    arrival_late = Arrival.AFTER_FREEZE if blocked else Arrival.ABSENT

    before = receive_packet(
        config.scenario(arrival_early), table, budget, target_window_dbm,
        jitter_sigma_db=0.0,
    )
    after = receive_packet(
        config.scenario(arrival_late), table, budget, target_window_dbm,
        jitter_sigma_db=0.0,
    )

    if after.record.status is ReceptionStatus.GOOD_RECEPTION:
        optim: Optional[int] = after.applied_index
    else:
        forced = receive_packet(
            config.scenario(arrival_late), table, budget, target_window_dbm,
            replace_index=before.applied_index, jitter_sigma_db=0.0,
        )
        if forced.record.status is ReceptionStatus.GOOD_RECEPTION:
            optim = before.applied_index
        else:
            optim = NO_GOOD_GAIN

    return LabeledConfig(
        config=config,
        agc_before=before.applied_index,
        agc_after=after.applied_index,
        status_before=before.record.status,
        status_after=after.record.status,
        agc_optim=optim,
    )


def optim_class_id(agc_optim: Optional[int], gain_count: int) -> int:
    """Encode a label for the classifier; the no-good-gain marker is class G."""
    if agc_optim is None:
        return gain_count
    if not 0 <= agc_optim < gain_count:
        raise UsageError(f"label {agc_optim} outside gain table of size {gain_count}")
    return agc_optim


def class_id_to_optim(class_id: int, gain_count: int) -> Optional[int]:
    if class_id == gain_count:
        return NO_GOOD_GAIN
    if not 0 <= class_id < gain_count:
        raise UsageError(f"class id {class_id} outside 0..{gain_count}")
    return class_id


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep axes; rows come out in (wanted, blocker, offset) order
    with one blocker-absent row per wanted level up front when requested."""

    wanted_dbm: tuple[float, ...] = (-70.0, -60.0, -50.0)
    blocker_dbm: tuple[float, ...] = tuple(float(b) for b in range(-71, 1, 3))
    offsets_mhz: tuple[float, ...] = (12.0, 18.0, 20.0, 22.0, 37.0, 47.0)
    include_absent: bool = True

    def __post_init__(self) -> None:
        if not self.wanted_dbm:
            raise UsageError("sweep needs at least one wanted power")
        if not self.blocker_dbm and not self.include_absent:
            raise UsageError("sweep needs blocker levels or absent rows")
        if self.blocker_dbm and not self.offsets_mhz:
            raise UsageError("sweep with blockers needs at least one offset")

    def configs(self) -> list[PacketConfig]:
        rows: list[PacketConfig] = []
        for wanted in self.wanted_dbm:
            if self.include_absent:
                rows.append(PacketConfig(wanted, None, 0.0))
            for blocker in self.blocker_dbm:
                for offset in self.offsets_mhz:
                    rows.append(PacketConfig(wanted, blocker, offset))
        return rows


def sweep_dataset(
    spec: SweepSpec,
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> list[LabeledConfig]:
    """Label every config in the sweep, in deterministic row order."""
    rows = [label_config(cfg, table, budget, target_window_dbm) for cfg in spec.configs()]
    counts: dict[float, int] = {}
    for labeled in rows:
        if labeled.config.blocker_dbm is not None:
            counts[labeled.config.offset_mhz] = counts.get(labeled.config.offset_mhz, 0) + 1
    log.info("labeled %d configs (per-offset counts: %s)", len(rows), counts)
    return rows


@dataclass(frozen=True)
class FlipReport:
    """Outcome of re-emitting vulnerable configs with the early-arrival gain.

    hardware_fraction is the fraction measured on real silicon for the same
    procedure, kept for comparison; this simulator is deterministic and is
    expected to flip every qualifying config.
    """

    qualifying_count: int
    flipped_count: int
    fraction: Optional[float]
    hardware_fraction: float = 0.61


def flip_experiment(
    labeled: Sequence[LabeledConfig],
    table: GainTable,
    budget: LinkBudget,
    target_window_dbm: tuple[float, float] = DEFAULT_TARGET_WINDOW_DBM,
) -> FlipReport:
    """Force the early-arrival index into every Good-early/Bad-late config.

    Inputs are filtered to the qualifying condition here, so callers may
    pass a whole dataset. An empty qualifying set yields a report with no
    fraction rather than an error.
    """
    qualifying = [
        row
        for row in labeled
        if row.status_before is ReceptionStatus.GOOD_RECEPTION
        and row.status_after is ReceptionStatus.BAD_RECEPTION
    ]
    flipped = 0
    for row in qualifying:
        forced = receive_packet(
            row.config.scenario(Arrival.AFTER_FREEZE),
            table,
            budget,
            target_window_dbm,
            replace_index=row.agc_before,
            jitter_sigma_db=0.0,
        )
        if forced.record.status is ReceptionStatus.GOOD_RECEPTION:
            flipped += 1
    fraction = (flipped / len(qualifying)) if qualifying else None
    if not qualifying:
        log.info("flip experiment found no qualifying configs")
    return FlipReport(
        qualifying_count=len(qualifying), flipped_count=flipped, fraction=fraction
    )


# -------- dataset serialization --------

_CSV_COLUMNS = (
    "wanted_dbm", "blocker_dbm", "offset_mhz",
    "agc_before", "agc_after", "status_before", "status_after", "agc_optim",
)


def _optim_str(optim: Optional[int]) -> str:
    return "X" if optim is None else str(optim)


def _parse_optim(text: str) -> Optional[int]:
    return NO_GOOD_GAIN if text == "X" else int(text)


def write_dataset_csv(rows: Sequence[LabeledConfig], path: Path | str) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    repr(row.config.wanted_dbm),
                    "" if row.config.blocker_dbm is None else repr(row.config.blocker_dbm),
                    repr(row.config.offset_mhz),
                    row.agc_before,
                    row.agc_after,
                    row.status_before.value,
                    row.status_after.value,
                    _optim_str(row.agc_optim),
                ]
            )


def read_dataset_csv(path: Path | str) -> list[LabeledConfig]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {CSV_SCHEMA}":
            raise DataError(f"unrecognized dataset schema in {path}: {header!r}")
        reader = csv.DictReader(fh, lineterminator="\n")
        rows = []
        for rec in reader:
            rows.append(
                LabeledConfig(
                    config=PacketConfig(
                        wanted_dbm=float(rec["wanted_dbm"]),
                        blocker_dbm=float(rec["blocker_dbm"]) if rec["blocker_dbm"] else None,
                        offset_mhz=float(rec["offset_mhz"]),
                    ),
                    agc_before=int(rec["agc_before"]),
                    agc_after=int(rec["agc_after"]),
                    status_before=ReceptionStatus(rec["status_before"]),
                    status_after=ReceptionStatus(rec["status_after"]),
                    agc_optim=_parse_optim(rec["agc_optim"]),
                )
            )
    return rows


def dataset_to_json(rows: Sequence[LabeledConfig]) -> dict:
    return {
        "schema": CSV_SCHEMA,
        "rows": [
            {
                "wanted_dbm": row.config.wanted_dbm,
                "blocker_dbm": row.config.blocker_dbm,
                "offset_mhz": row.config.offset_mhz,
                "agc_before": row.agc_before,
                "agc_after": row.agc_after,
                "status_before": row.status_before.value,
                "status_after": row.status_after.value,
                "agc_optim": _optim_str(row.agc_optim),
            }
            for row in rows
        ],
    }


def write_dataset_json(rows: Sequence[LabeledConfig], path: Path | str) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(rows), indent=1, sort_keys=True) + "\n")


def read_dataset_json(path: Path | str) -> list[LabeledConfig]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt dataset JSON in {path}: {exc}") from exc
    if payload.get("schema") != CSV_SCHEMA:
        raise DataError(f"unrecognized dataset schema in {path}")
    rows = []
    for rec in payload["rows"]:
        rows.append(
            LabeledConfig(
                config=PacketConfig(
                    wanted_dbm=float(rec["wanted_dbm"]),
                    blocker_dbm=None if rec["blocker_dbm"] is None else float(rec["blocker_dbm"]),
                    offset_mhz=float(rec["offset_mhz"]),
                ),
                agc_before=int(rec["agc_before"]),
                agc_after=int(rec["agc_after"]),
                status_before=ReceptionStatus(rec["status_before"]),
                status_after=ReceptionStatus(rec["status_after"]),
                agc_optim=_parse_optim(rec["agc_optim"]),
            )
        )
    return rows
