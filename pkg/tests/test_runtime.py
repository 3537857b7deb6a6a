import pytest

from agcml.errors import UsageError
from agcml.labeling import (
    PacketConfig,
    ReceptionStatus,
    SweepSpec,
    label_config,
    sweep_dataset,
)
from agcml.mlengine import FeatureScaler, TrainedModel
from agcml.runtime import (
    CountermeasureAction,
    MetricsSchedule,
    PerSweepSpec,
    RuntimeMode,
    RuntimeScenario,
    countermeasure_hook,
    per_report_rows_json,
    per_sweep,
    run_signal,
    write_gnuplot_dat,
    write_per_csv,
)
from agcml.signalgen import WiFiPattern, constant_signal, synthesize_signal

WINDOW = 4
DIM = WINDOW * 7


def constant_model(winner: int, class_count: int = 9, window_len: int = WINDOW) -> TrainedModel:
    """Zero-weight model whose bias makes one class always win."""
    bias = [0.0] * class_count
    bias[winner] = 5.0
    return TrainedModel(
        scaler=FeatureScaler.identity(window_len * 7),
        weights=tuple((0.0,) * (window_len * 7) for _ in range(class_count)),
        bias=tuple(bias),
        class_count=class_count,
        gain_count=class_count - 1,
        window_len=window_len,
    )


@pytest.fixture(scope="module")
def pool(table, budget):
    spec = SweepSpec(
        wanted_dbm=(-60.0,),
        blocker_dbm=(-70.0, -50.0, -41.0, -29.0, -23.0),
        offsets_mhz=(37.0,),
    )
    return sweep_dataset(spec, table, budget)


@pytest.fixture(scope="module")
def burst_signal(pool, table, budget):
    return synthesize_signal(WiFiPattern(), pool, 90, 21, table, budget, -60.0)


def scenario(mode, threshold=3):
    return RuntimeScenario(mode=mode, window_len=WINDOW, countermeasure_threshold=threshold)


class TestCountermeasure:
    def test_threshold_logic(self):
        assert countermeasure_hook(2, 3) is CountermeasureAction.NONE
        assert countermeasure_hook(3, 3) is CountermeasureAction.BLACKLIST_CHANNEL
        assert countermeasure_hook(7, 3) is CountermeasureAction.BLACKLIST_CHANNEL
        with pytest.raises(UsageError):
            countermeasure_hook(1, 0)


class TestSchedule:
    def test_fixed_capture_points(self):
        sched = MetricsSchedule()
        assert (sched.t1, sched.t2, sched.t3) == (
            "preamble_end_freeze", "payload_mid", "packet_end"
        )
        with pytest.raises(UsageError):
            MetricsSchedule(t1="wall_clock_start")


class TestScenarioValidation:
    def test_bounds(self):
        with pytest.raises(UsageError):
            RuntimeScenario(mode=RuntimeMode.REFERENCE, window_len=0)
        with pytest.raises(UsageError):
            RuntimeScenario(mode=RuntimeMode.REFERENCE, countermeasure_threshold=0)
        assert RuntimeScenario(
            mode=RuntimeMode.REFERENCE, countermeasure_threshold=None
        ).countermeasure_threshold is None


class TestReferenceMode:
    def test_replays_stored_records_bit_for_bit(self, burst_signal, table, budget):
        result = run_signal(
            burst_signal, None, scenario(RuntimeMode.REFERENCE), table, budget
        )
        assert result.packets_sent == len(burst_signal)
        for trace, pkt in zip(result.traces, burst_signal.packets):
            assert trace.t3.metrics == pkt.record.metrics
            assert trace.t3.status == pkt.record.status
            assert trace.applied_index == pkt.record.frozen_index
            assert trace.native_index == pkt.record.frozen_index
            assert trace.predicted_class is None
            assert not trace.prediction_applied
        good = sum(
            1 for p in burst_signal.packets
            if p.record.status is ReceptionStatus.GOOD_RECEPTION
        )
        assert result.packets_good == good
        assert result.per_percent == 100.0 * (1.0 - good / len(burst_signal))

    def test_model_is_ignored(self, burst_signal, table, budget):
        bare = run_signal(
            burst_signal, None, scenario(RuntimeMode.REFERENCE), table, budget
        )
        with_model = run_signal(
            burst_signal, constant_model(0), scenario(RuntimeMode.REFERENCE), table, budget
        )
        assert bare == with_model
        assert bare.predictions_made == 0
        assert bare.blacklist_events == ()

    def test_buffer_reset_per_packet(self, burst_signal, table, budget):
        result = run_signal(
            burst_signal, None, scenario(RuntimeMode.REFERENCE), table, budget
        )
        assert result.buffer_resets == result.packets_sent


class TestAssistedMode:
    def test_model_required(self, burst_signal, table, budget):
        with pytest.raises(UsageError):
            run_signal(burst_signal, None, scenario(RuntimeMode.SCENARIO4), table, budget)

    def test_window_len_mismatch(self, burst_signal, table, budget):
        model = constant_model(0, window_len=WINDOW + 1)
        with pytest.raises(UsageError):
            run_signal(burst_signal, model, scenario(RuntimeMode.SCENARIO4), table, budget)

    def test_gain_count_mismatch(self, burst_signal, table, budget):
        model = constant_model(0, class_count=7)
        with pytest.raises(UsageError):
            run_signal(burst_signal, model, scenario(RuntimeMode.SCENARIO4), table, budget)

    def test_cold_start_runs_native(self, burst_signal, table, budget):
        result = run_signal(
            burst_signal, constant_model(2), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        n = len(burst_signal)
        for trace in result.traces[:WINDOW]:
            assert trace.predicted_class is None
            assert not trace.prediction_applied
        for trace in result.traces[WINDOW:]:
            assert trace.predicted_class == 2
            assert trace.prediction_applied
            assert trace.applied_index == 2
        # One prediction at each packet end once the buffer is full; the
        # last one is computed but never applied.
        assert result.predictions_made == n - WINDOW + 1

    def test_no_good_gain_falls_back_and_blacklists(self, burst_signal, table, budget):
        result = run_signal(
            burst_signal, constant_model(8), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        reference = run_signal(
            burst_signal, None, scenario(RuntimeMode.REFERENCE), table, budget
        )
        # Prediction X applies nothing: every packet runs the native loop
        for trace, ref in zip(result.traces, reference.traces):
            assert not trace.prediction_applied
            assert trace.applied_index == ref.applied_index
            assert trace.t3 == ref.t3
        # First X at packet WINDOW starts the streak; threshold 3 trips at
        # packet WINDOW+2 and only fires the event once.
        assert result.blacklist_events == (WINDOW + 2,)
        for trace in result.traces[WINDOW + 2:]:
            assert trace.action is CountermeasureAction.BLACKLIST_CHANNEL

    def test_countermeasure_disabled(self, burst_signal, table, budget):
        result = run_signal(
            burst_signal, constant_model(8),
            scenario(RuntimeMode.SCENARIO4, threshold=None), table, budget,
        )
        assert result.blacklist_events == ()
        assert all(t.action is CountermeasureAction.NONE for t in result.traces)

    def test_good_prediction_resets_streak(self, burst_signal, table, budget):
        # Constant gain prediction: streak never grows, no blacklist
        result = run_signal(
            burst_signal, constant_model(4), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        assert result.blacklist_events == ()

    def test_causal_prefix_invariance(self, burst_signal, table, budget):
        # Predictions may use only past packets: truncating the future
        # cannot change earlier traces.
        full = run_signal(
            burst_signal, constant_model(3), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        import dataclasses

        prefix_signal = dataclasses.replace(
            burst_signal, packets=burst_signal.packets[:40]
        )
        prefix = run_signal(
            prefix_signal, constant_model(3), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        assert prefix.traces == full.traces[:40]

    def test_ideal_prediction_beats_native_on_vulnerable_signal(self, table, budget):
        # Continuous -41 dBm blocker at 37 MHz: late arrivals die at the
        # native cap but survive at index 4, which an ideal model predicts.
        labeled = label_config(PacketConfig(-60.0, -41.0, 37.0), table, budget)
        assert labeled.agc_optim == 4
        signal = constant_signal(labeled, 60, 33, table, budget)
        ref = run_signal(signal, None, scenario(RuntimeMode.REFERENCE), table, budget)
        s4 = run_signal(
            signal, constant_model(4), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        assert ref.per_percent > 20.0
        assert s4.per_percent < ref.per_percent
        # After warm-up every packet is good at the predicted index
        for trace in s4.traces[WINDOW:]:
            assert trace.t3.status is ReceptionStatus.GOOD_RECEPTION

    def test_interferer_free_channel_perfect_in_both_modes(self, table, budget):
        labeled = label_config(PacketConfig(-60.0, None, 0.0), table, budget)
        signal = constant_signal(labeled, 40, 3, table, budget)
        ref = run_signal(signal, None, scenario(RuntimeMode.REFERENCE), table, budget)
        s4 = run_signal(
            signal, constant_model(7), scenario(RuntimeMode.SCENARIO4), table, budget
        )
        assert ref.per_percent == 0.0
        assert s4.per_percent == 0.0


SWEEP_SPEC = PerSweepSpec(
    blocker_levels_dbm=(-41.0, -17.0), packets=20, repetitions=2, seed=5
)


class TestPerSweep:
    @pytest.fixture()
    def spec(self):
        return SWEEP_SPEC

    def test_rows_and_determinism(self, spec, table, budget):
        model = constant_model(4, window_len=10)
        a = per_sweep(spec, model, [RuntimeMode.REFERENCE, RuntimeMode.SCENARIO4], table, budget)
        b = per_sweep(spec, model, [RuntimeMode.REFERENCE, RuntimeMode.SCENARIO4], table, budget)
        assert a == b
        assert len(a.rows) == 4
        for row in a.rows:
            assert row.packets_sent == spec.packets * spec.repetitions
            assert row.repetitions == spec.repetitions

    def test_reference_rows_paired_across_mode_lists(self, spec, table, budget):
        # The same derived-seed signals are replayed whatever modes are
        # requested, so reference numbers match between runs.
        solo = per_sweep(spec, None, [RuntimeMode.REFERENCE], table, budget)
        both = per_sweep(
            spec, constant_model(4, window_len=10),
            [RuntimeMode.REFERENCE, RuntimeMode.SCENARIO4], table, budget,
        )
        for level in spec.blocker_levels_dbm:
            assert solo.row(level, RuntimeMode.REFERENCE) == both.row(
                level, RuntimeMode.REFERENCE
            )
        assert solo.row(spec.blocker_levels_dbm[0], RuntimeMode.SCENARIO4) is None

    def test_validation(self, table, budget):
        with pytest.raises(UsageError):
            per_sweep(
                PerSweepSpec(blocker_levels_dbm=(-41.0,)), None, [], table, budget
            )
        with pytest.raises(UsageError):
            PerSweepSpec(repetitions=0)
        with pytest.raises(UsageError):
            PerSweepSpec(packets=0)
        with pytest.raises(UsageError):
            PerSweepSpec(blocker_levels_dbm=())

    def test_output_files(self, spec, table, budget, tmp_path):
        report = per_sweep(spec, None, [RuntimeMode.REFERENCE], table, budget)
        csv_path = tmp_path / "per.csv"
        write_per_csv(report, csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "blocker_dbm,per_ref,per_s4,per_std_ref,per_std_s4"
        assert len(lines) == 3
        # scenario4 columns stay blank when the mode was not swept
        first = lines[1].split(",")
        assert first[0] == "-41.0"
        assert first[2] == "" and first[4] == ""

        dat_path = tmp_path / "ref.dat"
        write_gnuplot_dat(report, RuntimeMode.REFERENCE, dat_path)
        dat_lines = dat_path.read_text().splitlines()
        assert dat_lines[0] == "# blocker_dbm per_percent (reference)"
        assert len(dat_lines) == 3
        assert all(len(line.split()) == 2 for line in dat_lines[1:])

        rows = per_report_rows_json(report)
        assert len(rows) == 2
        assert set(rows[0]) == {
            "blocker_dbm", "mode", "packets_sent", "packets_good",
            "per_percent", "repetitions", "per_std",
        }
