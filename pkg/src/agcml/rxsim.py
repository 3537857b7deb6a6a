"""Deterministic two-phase receiver model.

A packet reception is reduced to two scalar snapshots, one for the preamble
and one for the payload. Each snapshot combines the wanted signal, an
optional co-channel interferer seen through the channel filter, and the
gain-dependent noise floor, then charges a distortion penalty for any
front-end overdrive. Everything here is pure and seed-free; randomness only
enters later when reported metrics are jittered.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import UsageError

# Power levels are dBm at the antenna unless stated otherwise.
POWER_MIN_DBM = -130.0
POWER_MAX_DBM = 10.0


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x_lin: float) -> float:
    if x_lin <= 0.0:
        return -math.inf
    return 10.0 * math.log10(x_lin)


def combine_dbm(levels_dbm: Sequence[Optional[float]]) -> float:
    """Total power of independent contributors.

    combine = 10*log10(sum_i 10^(L_i/10)). None entries mark absent
    contributors and add zero linear power; a list of only-absent entries
    therefore combines to -inf. fsum makes the sum independent of ordering
    down to the last bit.
    """
    if len(levels_dbm) == 0:
        raise UsageError("combine_dbm needs at least one level")
    return lin_to_db(math.fsum(db_to_lin(x) for x in levels_dbm if x is not None))


class Arrival(enum.Enum):
    """When the interferer shows up relative to the AGC index freeze."""

    BEFORE_FREEZE = "before_freeze"
    AFTER_FREEZE = "after_freeze"
    ABSENT = "absent"


class Phase(enum.Enum):
    PREAMBLE = "preamble"
    PAYLOAD = "payload"


@dataclass(frozen=True)
class GainTable:
    """Discrete front-end gain steps with their equivalent input noise.

    noise_floors_dbm is the input-referred noise for each index; more analog
    gain buys a lower floor. sat_threshold_dbm is the clip level referred to
    input power plus gain.
    """

    gains_db: tuple[float, ...] = (0.0, 6.0, 12.0, 18.0, 24.0, 30.0, 36.0, 42.0)
    noise_floors_dbm: tuple[float, ...] = (
        -85.0, -87.0, -89.0, -91.0, -93.0, -95.0, -97.0, -99.0,
    )
    sat_threshold_dbm: float = -8.0

    def __post_init__(self) -> None:
        if len(self.gains_db) < 2:
            raise UsageError("gain table needs at least two indices")
        if len(self.noise_floors_dbm) != len(self.gains_db):
            raise UsageError("gain table and noise floor lengths differ")
        if any(b <= a for a, b in zip(self.gains_db, self.gains_db[1:])):
            raise UsageError("gain entries must be strictly increasing")
        if any(b > a for a, b in zip(self.noise_floors_dbm, self.noise_floors_dbm[1:])):
            raise UsageError("noise floors must be non-increasing with gain index")

    @property
    def size(self) -> int:
        return len(self.gains_db)

    @property
    def max_step_db(self) -> float:
        return max(b - a for a, b in zip(self.gains_db, self.gains_db[1:]))

    def check_index(self, index: int) -> int:
        if not 0 <= index < self.size:
            raise UsageError(f"gain index {index} outside 0..{self.size - 1}")
        return index


@dataclass(frozen=True)
class LinkBudget:
    """Channel filter and demodulator thresholds.

    rejection_curve_db maps interferer frequency offset (MHz) to filter
    rejection (dB), linearly interpolated and clamped past the last point.
    The AA threshold gates sync detection on the preamble snapshot, the CRC
    threshold gates payload integrity, and overdrive_margin_db is the clip
    overdrive beyond which a phase fails outright.
    """

    rejection_curve_db: tuple[tuple[float, float], ...] = (
        (0.0, 0.0), (12.0, 30.0), (22.0, 45.0), (47.0, 55.0),
    )
    snr_aa_threshold_db: float = 6.0
    snr_crc_threshold_db: float = 6.0
    overdrive_margin_db: float = 10.0
    distortion_db_per_db: float = 3.0

    def __post_init__(self) -> None:
        curve = self.rejection_curve_db
        if len(curve) < 2:
            raise UsageError("rejection curve needs at least two points")
        if curve[0] != (0.0, 0.0):
            raise UsageError("rejection curve must start at (0 MHz, 0 dB)")
        offsets = [p[0] for p in curve]
        rejections = [p[1] for p in curve]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise UsageError("rejection curve offsets must be strictly increasing")
        if any(b < a for a, b in zip(rejections, rejections[1:])):
            raise UsageError("rejection must be non-decreasing with offset")
        if self.snr_crc_threshold_db < self.snr_aa_threshold_db - 6.0:
            # The payload demodulator cannot be arbitrarily easier to satisfy
            # than sync detection.
            raise UsageError("CRC threshold must be >= AA threshold - 6 dB")
        if self.overdrive_margin_db < 0.0:
            raise UsageError("overdrive margin must be non-negative")
        if self.distortion_db_per_db < 0.0:
            raise UsageError("distortion slope must be non-negative")

    def rejection_db(self, offset_mhz: float) -> float:
        """Filter rejection at a given offset, interpolated on the curve."""
        if offset_mhz < 0.0:
            raise UsageError("offset must be non-negative")
        curve = self.rejection_curve_db
        if offset_mhz >= curve[-1][0]:
            return curve[-1][1]
        for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
            if offset_mhz <= x1:
                return y0 + (y1 - y0) * (offset_mhz - x0) / (x1 - x0)
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class PacketScenario:
    """One wanted packet plus an optional interferer, with its noise seed."""

    wanted_dbm: float
    blocker_dbm: Optional[float]
    offset_mhz: float
    arrival: Arrival
    seed: int = 0

    def __post_init__(self) -> None:
        for name, level in (("wanted", self.wanted_dbm), ("blocker", self.blocker_dbm)):
            if level is not None and not POWER_MIN_DBM <= level <= POWER_MAX_DBM:
                raise UsageError(f"{name} power {level} dBm outside physical bounds")
        if self.offset_mhz < 0.0:
            raise UsageError("offset must be non-negative")
        if (self.blocker_dbm is None) != (self.arrival is Arrival.ABSENT):
            raise UsageError("arrival is ABSENT exactly when the blocker is absent")


@dataclass(frozen=True)
class PhaseState:
    """Receiver-side view of one phase at one gain index."""

    phase: Phase
    wideband_dbm: float
    in_band_dbm: float
    snr_db: float
    overdrive_db: float


def blocker_in_phase(scenario: PacketScenario, phase: Phase) -> bool:
    if scenario.arrival is Arrival.BEFORE_FREEZE:
        return True
    if scenario.arrival is Arrival.AFTER_FREEZE:
        return phase is Phase.PAYLOAD
    return False


def effective_snr(
    scenario: PacketScenario,
    gain_index: int,
    phase: Phase,
    table: GainTable,
    budget: LinkBudget,
) -> PhaseState:
    """Evaluate one phase at one gain index.

    wideband   = combine(wanted, blocker?, noise_floor)   (pre-filter)
    overdrive  = max(0, wideband + gain - sat_threshold)
    in_band    = combine(noise_floor, blocker - rejection)
    snr        = wanted - in_band - slope * overdrive
    """
    table.check_index(gain_index)
    gain = table.gains_db[gain_index]
    floor = table.noise_floors_dbm[gain_index]
    blocker = scenario.blocker_dbm if blocker_in_phase(scenario, phase) else None
    leak = None if blocker is None else blocker - budget.rejection_db(scenario.offset_mhz)

    wideband = combine_dbm([scenario.wanted_dbm, blocker, floor])
    overdrive = max(0.0, wideband + gain - table.sat_threshold_dbm)
    in_band = combine_dbm([floor, leak])
    snr = scenario.wanted_dbm - in_band - budget.distortion_db_per_db * overdrive
    return PhaseState(
        phase=phase,
        wideband_dbm=wideband,
        in_band_dbm=in_band,
        snr_db=snr,
        overdrive_db=overdrive,
    )


def detect_outcomes(
    preamble: PhaseState, payload: PhaseState, budget: LinkBudget
) -> tuple[bool, bool]:
    """Sync detection and CRC outcome for one packet.

    Returns (aa_found, crc_ok). crc_ok is only meaningful when aa_found is
    True; without sync the payload is never processed and callers must treat
    the CRC unit as untouched (no error flagged).
    """
    if preamble.phase is not Phase.PREAMBLE or payload.phase is not Phase.PAYLOAD:
        raise UsageError("detect_outcomes wants a preamble state and a payload state")
    aa_found = (
        preamble.snr_db >= budget.snr_aa_threshold_db
        and preamble.overdrive_db <= budget.overdrive_margin_db
    )
    crc_ok = (
        payload.snr_db >= budget.snr_crc_threshold_db
        and payload.overdrive_db <= budget.overdrive_margin_db
    )
    return aa_found, crc_ok
