import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agcml.errors import UsageError
from agcml.rxsim import (
    Arrival,
    GainTable,
    LinkBudget,
    PacketScenario,
    Phase,
    blocker_in_phase,
    combine_dbm,
    detect_outcomes,
    effective_snr,
)

finite_levels = st.floats(min_value=-120.0, max_value=0.0, allow_nan=False)


class TestCombine:
    def test_two_equal_levels(self):
        # 10*log10(2e-6) computed independently
        assert combine_dbm([-60.0, -60.0]) == -56.98970004336019

    def test_three_levels(self):
        assert combine_dbm([-40.0, -50.0, -60.0]) == -39.546770212133424

    def test_weak_contributor_barely_moves_total(self):
        assert combine_dbm([-60.0, -95.0]) == -59.99862685736342

    def test_singleton_identity(self):
        assert combine_dbm([-95.0]) == -95.0
        assert combine_dbm([-60.0]) == -60.0

    def test_none_entries_are_absent(self):
        assert combine_dbm([None, -70.0]) == combine_dbm([-70.0])
        assert combine_dbm([None, None]) == -math.inf

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            combine_dbm([])

    @given(st.lists(finite_levels, min_size=1, max_size=6), st.randoms())
    def test_permutation_invariant_bit_for_bit(self, levels, rnd):
        shuffled = list(levels)
        rnd.shuffle(shuffled)
        assert combine_dbm(shuffled) == combine_dbm(levels)

    @given(st.lists(finite_levels, min_size=1, max_size=5), finite_levels)
    def test_adding_a_contributor_never_drops_power(self, levels, extra):
        assert combine_dbm(levels + [extra]) >= combine_dbm(levels)
        # Strict when the new contributor is non-negligible
        if extra >= max(levels) - 30.0:
            assert combine_dbm(levels + [extra]) > combine_dbm(levels)

    @given(st.lists(finite_levels, min_size=1, max_size=6))
    def test_total_at_least_max_contributor(self, levels):
        # 1e-9 covers the final log round-trip ulp
        assert combine_dbm(levels) >= max(levels) - 1e-9


class TestGainTable:
    def test_defaults(self, table):
        assert table.size == 8
        assert table.max_step_db == 6.0
        assert table.gains_db[0] == 0.0 and table.gains_db[7] == 42.0
        assert table.noise_floors_dbm == (-85.0, -87.0, -89.0, -91.0, -93.0, -95.0, -97.0, -99.0)

    def test_check_index(self, table):
        assert table.check_index(0) == 0
        assert table.check_index(7) == 7
        with pytest.raises(UsageError):
            table.check_index(8)
        with pytest.raises(UsageError):
            table.check_index(-1)

    def test_validation(self):
        with pytest.raises(UsageError):
            GainTable(gains_db=(0.0,), noise_floors_dbm=(-85.0,))
        with pytest.raises(UsageError):
            GainTable(gains_db=(0.0, 6.0), noise_floors_dbm=(-85.0,))
        with pytest.raises(UsageError):
            GainTable(gains_db=(6.0, 0.0), noise_floors_dbm=(-85.0, -87.0))
        with pytest.raises(UsageError):
            GainTable(gains_db=(0.0, 6.0), noise_floors_dbm=(-87.0, -85.0))


class TestRejection:
    @pytest.mark.parametrize(
        "offset,expected",
        [
            (0.0, 0.0),
            (6.0, 15.0),
            (12.0, 30.0),
            (18.0, 39.0),
            (20.0, 42.0),
            (22.0, 45.0),
            (37.0, 51.0),
            (47.0, 55.0),
            (60.0, 55.0),  # clamped past the last point
        ],
    )
    def test_interpolation_oracle(self, budget, offset, expected):
        assert budget.rejection_db(offset) == pytest.approx(expected, abs=1e-12)

    def test_negative_offset_rejected(self, budget):
        with pytest.raises(UsageError):
            budget.rejection_db(-1.0)

    @given(st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=0.0, max_value=100.0))
    def test_monotone_in_offset(self, budget, a, b):
        lo, hi = sorted((a, b))
        assert budget.rejection_db(lo) <= budget.rejection_db(hi)

    def test_curve_validation(self):
        with pytest.raises(UsageError):
            LinkBudget(rejection_curve_db=((0.0, 0.0),))
        with pytest.raises(UsageError):
            LinkBudget(rejection_curve_db=((1.0, 0.0), (12.0, 30.0)))
        with pytest.raises(UsageError):
            LinkBudget(rejection_curve_db=((0.0, 0.0), (12.0, 30.0), (12.0, 40.0)))
        with pytest.raises(UsageError):
            LinkBudget(rejection_curve_db=((0.0, 0.0), (12.0, 30.0), (22.0, 20.0)))


class TestScenario:
    def test_arrival_must_match_blocker_presence(self):
        with pytest.raises(UsageError):
            PacketScenario(-60.0, None, 0.0, Arrival.BEFORE_FREEZE)
        with pytest.raises(UsageError):
            PacketScenario(-60.0, -40.0, 12.0, Arrival.ABSENT)

    def test_power_bounds(self):
        with pytest.raises(UsageError):
            PacketScenario(-140.0, None, 0.0, Arrival.ABSENT)
        with pytest.raises(UsageError):
            PacketScenario(-60.0, 20.0, 12.0, Arrival.BEFORE_FREEZE)

    def test_blocker_in_phase(self):
        before = PacketScenario(-60.0, -40.0, 12.0, Arrival.BEFORE_FREEZE)
        after = PacketScenario(-60.0, -40.0, 12.0, Arrival.AFTER_FREEZE)
        absent = PacketScenario(-60.0, None, 0.0, Arrival.ABSENT)
        assert blocker_in_phase(before, Phase.PREAMBLE)
        assert blocker_in_phase(before, Phase.PAYLOAD)
        assert not blocker_in_phase(after, Phase.PREAMBLE)
        assert blocker_in_phase(after, Phase.PAYLOAD)
        assert not blocker_in_phase(absent, Phase.PREAMBLE)
        assert not blocker_in_phase(absent, Phase.PAYLOAD)


class TestEffectiveSnr:
    def test_clean_reception_exact(self, table, budget):
        # wanted -60 at index 5: floor -95, no overdrive, snr is exactly
        # wanted minus floor.
        sc = PacketScenario(-60.0, None, 0.0, Arrival.ABSENT)
        state = effective_snr(sc, 5, Phase.PAYLOAD, table, budget)
        assert state.wideband_dbm == -59.99862685736342
        assert state.in_band_dbm == -95.0
        assert state.overdrive_db == 0.0
        assert state.snr_db == 35.0

    def test_overdrive_charges_snr(self, table, budget):
        # Strong blocker at full gain: wideband ~-19.9, overdrive ~30.1,
        # snr dominated by the distortion charge.
        sc = PacketScenario(-60.0, -20.0, 37.0, Arrival.BEFORE_FREEZE)
        state = effective_snr(sc, 7, Phase.PREAMBLE, table, budget)
        assert state.overdrive_db == pytest.approx(
            state.wideband_dbm + 42.0 - (-8.0), abs=1e-12
        )
        assert state.overdrive_db > 0.0
        assert state.snr_db == pytest.approx(
            -60.0 - state.in_band_dbm - 3.0 * state.overdrive_db, abs=1e-12
        )

    def test_after_freeze_blocker_skips_preamble(self, table, budget):
        sc_after = PacketScenario(-60.0, -20.0, 37.0, Arrival.AFTER_FREEZE)
        sc_absent = PacketScenario(-60.0, None, 37.0, Arrival.ABSENT)
        pre_after = effective_snr(sc_after, 4, Phase.PREAMBLE, table, budget)
        pre_absent = effective_snr(sc_absent, 4, Phase.PREAMBLE, table, budget)
        assert pre_after.wideband_dbm == pre_absent.wideband_dbm
        assert pre_after.snr_db == pre_absent.snr_db
        pay_after = effective_snr(sc_after, 4, Phase.PAYLOAD, table, budget)
        assert pay_after.wideband_dbm > pre_after.wideband_dbm

    @given(
        st.floats(min_value=-100.0, max_value=-20.0),
        st.floats(min_value=-90.0, max_value=-10.0),
        st.floats(min_value=0.0, max_value=60.0),
        st.integers(min_value=0, max_value=7),
    )
    def test_more_offset_never_hurts_snr(self, table, budget, wanted, blocker, offset, idx):
        # Payload snr is non-decreasing in frequency offset: rejection only
        # grows, overdrive is offset-independent.
        near = PacketScenario(wanted, blocker, offset, Arrival.BEFORE_FREEZE)
        far = PacketScenario(wanted, blocker, offset + 5.0, Arrival.BEFORE_FREEZE)
        snr_near = effective_snr(near, idx, Phase.PAYLOAD, table, budget).snr_db
        snr_far = effective_snr(far, idx, Phase.PAYLOAD, table, budget).snr_db
        assert snr_far >= snr_near

    def test_bad_index_rejected(self, table, budget):
        sc = PacketScenario(-60.0, None, 0.0, Arrival.ABSENT)
        with pytest.raises(UsageError):
            effective_snr(sc, 8, Phase.PREAMBLE, table, budget)


class TestDetectOutcomes:
    def test_thresholds(self, table, budget):
        sc = PacketScenario(-60.0, None, 0.0, Arrival.ABSENT)
        pre = effective_snr(sc, 5, Phase.PREAMBLE, table, budget)
        pay = effective_snr(sc, 5, Phase.PAYLOAD, table, budget)
        assert detect_outcomes(pre, pay, budget) == (True, True)

        weak = PacketScenario(-95.0, None, 0.0, Arrival.ABSENT)
        pre_w = effective_snr(weak, 5, Phase.PREAMBLE, table, budget)
        pay_w = effective_snr(weak, 5, Phase.PAYLOAD, table, budget)
        # snr 0 dB at the -95 floor: below both 6 dB thresholds
        assert detect_outcomes(pre_w, pay_w, budget) == (False, False)

    def test_phase_order_enforced(self, table, budget):
        sc = PacketScenario(-60.0, None, 0.0, Arrival.ABSENT)
        pre = effective_snr(sc, 5, Phase.PREAMBLE, table, budget)
        pay = effective_snr(sc, 5, Phase.PAYLOAD, table, budget)
        with pytest.raises(UsageError):
            detect_outcomes(pay, pre, budget)

    @given(
        st.floats(min_value=-110.0, max_value=-20.0),
        st.integers(min_value=0, max_value=7),
    )
    def test_crc_band_contiguous_in_blocker_power(self, table, budget, wanted, idx):
        # Payload crc outcome flips at most twice as blocker power rises:
        # pass region is an interval (snr falls monotonically, overdrive
        # rises monotonically).
        outcomes = []
        for blk in range(-90, 0, 2):
            sc = PacketScenario(wanted, float(blk), 20.0, Arrival.AFTER_FREEZE)
            pay = effective_snr(sc, idx, Phase.PAYLOAD, table, budget)
            ok = (
                pay.snr_db >= budget.snr_crc_threshold_db
                and pay.overdrive_db <= budget.overdrive_margin_db
            )
            outcomes.append(ok)
        flips = sum(1 for a, b in zip(outcomes, outcomes[1:]) if a != b)
        assert flips <= 1
