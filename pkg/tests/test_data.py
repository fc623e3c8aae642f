import numpy as np
import pytest

from wavenilm.data import (Scenario, build_scenario, ingest_csv,
                           next_power_of_two, normalize, window, write_csv)
from wavenilm.synth import synthesize_household, two_state_appliance


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


BASE = 1700000000


class TestIngest:
    def test_three_line_fixture(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_I,agg_P,agg_Q,agg_S",
            f"{BASE},1.0,120.0,10.0,120.4",
            f"{BASE + 60},2.0,240.0,20.0,240.8",
            f"{BASE + 120},0.5,60.0,5.0,60.2",
        ])
        series = ingest_csv(path)
        assert len(series) == 3
        np.testing.assert_array_equal(series.signal("agg", "P"), [120.0, 240.0, 60.0])

    def test_iso_timestamps(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_P",
            "2024-01-01T00:00:00+00:00,100.0",
            "2024-01-01T00:01:00+00:00,200.0",
        ])
        assert len(ingest_csv(path)) == 2

    def test_shuffled_rows_rejected(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_P",
            f"{BASE + 60},1.0",
            f"{BASE},2.0",
            f"{BASE + 120},3.0",
        ])
        with pytest.raises(ValueError, match="non-monotone"):
            ingest_csv(path)

    def test_single_gap_filled_with_warning(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_P",
            f"{BASE},100.0",
            f"{BASE + 60},110.0",
            f"{BASE + 180},130.0",  # one missing minute
            f"{BASE + 240},140.0",
        ])
        with pytest.warns(UserWarning, match="filled 1 missing"):
            series = ingest_csv(path)
        assert len(series) == 5
        # previous-value hold
        np.testing.assert_array_equal(
            series.signal("agg", "P"), [100.0, 110.0, 110.0, 130.0, 140.0])

    def test_long_gap_rejected(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_P",
            f"{BASE},100.0",
            f"{BASE + 60 * 7},130.0",  # six missing minutes
        ] + [f"{BASE + 60 * (8 + i)},1.0" for i in range(200)])
        with pytest.raises(ValueError, match="gap of 6"):
            ingest_csv(path)

    def test_many_small_gaps_rejected_by_fraction(self, tmp_path):
        rows = ["timestamp,agg_P"]
        t = BASE
        for i in range(40):
            rows.append(f"{t},1.0")
            t += 60 * 4  # 3 of every 4 samples missing
        path = write_lines(tmp_path / "m.csv", rows)
        with pytest.raises(ValueError, match="missing"):
            ingest_csv(path)

    def test_unknown_signal_suffix_rejected(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,agg_X",
            f"{BASE},1.0",
        ])
        with pytest.raises(ValueError, match="agg_X"):
            ingest_csv(path)

    def test_channel_map_override(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,WHE,HPE",
            f"{BASE},600.0,400.0",
            f"{BASE + 60},650.0,450.0",
        ])
        series = ingest_csv(path, channel_map={
            "WHE": ("agg", "P"), "HPE": ("heat_pump", "P")})
        assert series.signal("heat_pump", "P")[1] == 450.0

    def test_channel_map_missing_column_rejected(self, tmp_path):
        path = write_lines(tmp_path / "m.csv", [
            "timestamp,WHE,HPE",
            f"{BASE},600.0,400.0",
        ])
        with pytest.raises(ValueError, match="HPE"):
            ingest_csv(path, channel_map={"WHE": ("agg", "P")})

    def test_write_round_trip_is_exact(self, tmp_path):
        apps = [two_state_appliance("heater", 1500.0, 0.3)]
        series = synthesize_household(apps, days=1, seed=3,
                                      noise_p_sigma=5.0, noise_q_sigma=2.0)
        path = tmp_path / "synth.csv"
        write_csv(series, path)
        back = ingest_csv(path)
        for entity, signals in series.channels.items():
            for kind, values in signals.items():
                np.testing.assert_array_equal(back.signal(entity, kind), values)


class TestScenario:
    @pytest.fixture
    def series(self):
        apps = [
            two_state_appliance("heater", 1000.0, 0.2, on_prob=0.1, off_prob=0.1),
            two_state_appliance("fridge", 150.0, 0.4, on_prob=0.5, off_prob=0.5),
            two_state_appliance("lamp", 60.0, 0.0, on_prob=0.2, off_prob=0.2),
        ]
        return synthesize_household(apps, days=1, seed=9, noise_p_sigma=4.0)

    def test_denoised_input_is_sum_of_targets(self, series):
        scen = Scenario("denoised", ("heater", "fridge"), ("P",), "P")
        tensors = build_scenario(series, scen)
        expected = series.signal("heater", "P") + series.signal("fridge", "P")
        np.testing.assert_array_equal(tensors.inputs[:, 0], expected)
        residual = tensors.inputs[:, 0] - tensors.targets.sum(axis=1)
        np.testing.assert_array_equal(residual, 0.0)

    def test_denoised_constant_loads_sum(self):
        always_on = [
            two_state_appliance("a", 100.0, 0.0, on_prob=1.0, off_prob=0.0,
                                start_state=1),
            two_state_appliance("b", 100.0, 0.0, on_prob=1.0, off_prob=0.0,
                                start_state=1),
        ]
        series = synthesize_household(always_on, days=1, seed=0)
        scen = Scenario("denoised", ("a", "b"), ("P",), "P")
        tensors = build_scenario(series, scen)
        np.testing.assert_array_equal(tensors.inputs[:, 0], 200.0)

    def test_noisy_input_is_the_aggregate(self, series):
        scen = Scenario("noisy", ("heater",), ("P", "Q"), "P")
        tensors = build_scenario(series, scen)
        np.testing.assert_array_equal(tensors.inputs[:, 0], series.signal("agg", "P"))
        np.testing.assert_array_equal(tensors.inputs[:, 1], series.signal("agg", "Q"))

    def test_single_signal_scenario_has_one_channel(self, series):
        scen = Scenario("noisy", ("heater",), ("P",), "P")
        assert build_scenario(series, scen).inputs.shape[1] == 1

    def test_missing_target_rejected(self, series):
        scen = Scenario("noisy", ("sauna",), ("P",), "P")
        with pytest.raises(ValueError, match="sauna"):
            build_scenario(series, scen)

    def test_output_signal_must_be_an_input(self):
        with pytest.raises(ValueError, match="output signal"):
            Scenario("noisy", ("heater",), ("P",), "I")

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            Scenario("cleanish", ("heater",), ("P",), "P")

    def test_mask_channel_points_at_output_signal(self):
        scen = Scenario("noisy", ("heater",), ("I", "P", "Q", "S"), "P")
        assert scen.mask_channel == 1


class TestNormalize:
    def build(self, peak):
        apps = [two_state_appliance("a", peak, 0.0, on_prob=1.0, off_prob=0.0,
                                    start_state=1)]
        series = synthesize_household(apps, days=1, seed=0)
        return build_scenario(series, Scenario("denoised", ("a",), ("P",), "P"))

    def test_next_power_of_two_values(self):
        assert next_power_of_two(4800.0) == 8192.0
        assert next_power_of_two(1024.0) == 1024.0
        assert next_power_of_two(0.7) == 1.0

    def test_scales_are_powers_of_two_above_peak(self):
        norm, scales = normalize(self.build(4800.0))
        assert scales.input_scales[0] == 8192.0
        assert scales.target_scale == 8192.0
        assert norm.inputs.max() <= 1.0

    def test_power_of_two_peak_maps_to_itself(self):
        _, scales = normalize(self.build(1024.0))
        assert scales.input_scales[0] == 1024.0

    def test_round_trip_is_exact(self, rng):
        tensors = self.build(4800.0)
        norm, scales = normalize(tensors)
        np.testing.assert_array_equal(
            norm.inputs * scales.input_scales, tensors.inputs)
        np.testing.assert_array_equal(
            norm.targets * scales.target_scale, tensors.targets)

    def test_reusing_scales_skips_refitting(self):
        tensors = self.build(4800.0)
        _, scales = normalize(tensors)
        half = self.build(2400.0)
        norm_half, scales2 = normalize(half, scales)
        assert scales2 is scales
        np.testing.assert_array_equal(
            norm_half.inputs * scales.input_scales, half.inputs)

    def test_all_zero_channel_warns_and_uses_scale_one(self):
        apps = [two_state_appliance("a", 500.0, 0.0)]  # never turns on: seed below
        series = synthesize_household(apps, days=1, seed=1)
        series.channels["a"]["P"][:] = 0.0
        series.channels["agg"]["P"][:] = 0.0
        tensors = build_scenario(series, Scenario("noisy", ("a",), ("P",), "P"))
        with pytest.warns(UserWarning, match="all zero"):
            _, scales = normalize(tensors)
        assert scales.input_scales[0] == 1.0


class TestWindow:
    def test_exactly_one_window(self):
        values = np.arange(1440.0).reshape(-1, 1)
        windows, starts = window(values, 1440, 511)
        assert windows.shape == (1, 1440, 1)
        np.testing.assert_array_equal(starts, [0])

    def test_two_windows_with_511_overlap(self):
        values = np.arange(2369.0).reshape(-1, 1)
        windows, starts = window(values, 1440, 511)
        assert windows.shape == (2, 1440, 1)
        np.testing.assert_array_equal(starts, [0, 929])
        # overlap region is shared
        np.testing.assert_array_equal(windows[0, 929:, 0], windows[1, :511, 0])

    def test_loss_region_covers_every_post_warmup_index(self):
        warmup = 15
        length = 64
        values = np.arange(500.0).reshape(-1, 1)
        windows, starts = window(values, length, warmup)
        covered = np.zeros(500, dtype=bool)
        for s in starts:
            covered[s + warmup : s + length] = True
        assert covered[warmup:].all()
        assert not covered[:warmup].any()

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="shorter"):
            window(np.zeros((100, 1)), 1440, 511)

    def test_bad_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            window(np.zeros((10, 1)), 5, 5)
