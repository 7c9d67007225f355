import math

import numpy as np
import pytest

from smartseat import ppg
from smartseat.errors import (
    InsufficientDataError,
    InvalidConfigError,
    InvalidInputError,
    UndefinedCorrelationError,
)
from smartseat.ppg import (
    ChainConfig,
    NoiseSpec,
    PipelineConfig,
    PpgTrace,
    bland_altman,
    detect_peaks,
    heart_rate,
    measure_tone_gain,
    paired_hr,
    pearson,
    process_chain,
    synth_ppg,
    white_sd_for_snr,
)


class TestSynthPpg:
    def test_constant_60_bpm_peak_schedule(self):
        tr = synth_ppg(60, 10, 100, NoiseSpec())
        assert len(tr.ground_truth_peaks) == 10
        assert set(np.diff(tr.ground_truth_peaks).tolist()) == {100}

    def test_constant_80_bpm_spacing(self):
        tr = synth_ppg(80, 60, 100)
        assert len(tr.ground_truth_peaks) == 80
        assert set(np.diff(tr.ground_truth_peaks).tolist()) == {75}

    def test_mean_tracks_dc_offset_under_drift(self):
        tr = synth_ppg(60, 10, 100, NoiseSpec(dc_offset=1.65, drift_hz=0.2, drift_amp=0.05))
        assert abs(tr.samples.mean() - 1.65) <= 0.02 * 1.65

    def test_out_of_range_rate_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_ppg(25, 10, 100)
        with pytest.raises(InvalidInputError):
            synth_ppg(lambda t: 100 + 150 * t, 10, 100)

    def test_low_fs_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_ppg(60, 10, 30)

    def test_deterministic_per_seed(self):
        a = synth_ppg(70, 5, 100, NoiseSpec(white_sd=0.01), seed=3)
        b = synth_ppg(70, 5, 100, NoiseSpec(white_sd=0.01), seed=3)
        assert np.array_equal(a.samples, b.samples)


class TestChain:
    def test_dc_input_suppressed(self):
        const = PpgTrace(fs_hz=100, samples=np.full(1000, 1.0))
        st = process_chain(const)
        settle = 200
        assert np.max(np.abs(st.stage_b.samples[settle:])) < 1e-3
        assert abs(np.mean(st.stage_b.samples[settle:])) < 0.01 * 1.0

    def test_2hz_sine_amplitude_matches_gains(self):
        cfg = ChainConfig(amp=3.0, pga=2.0)
        gain = measure_tone_gain(cfg, "d", 2.0)
        db_err = 20 * math.log10(gain / (3.0 * 2.0))
        assert abs(db_err) <= 1.0

    def test_30hz_attenuated_at_least_10db_vs_2hz(self):
        cfg = ChainConfig(amp=2.0, pga=1.0)
        g2 = measure_tone_gain(cfg, "d", 2.0)
        g30 = measure_tone_gain(cfg, "d", 30.0)
        assert 20 * math.log10(g30 / g2) <= -10.0

    @pytest.mark.parametrize(
        "stage,freq", [("b", 0.3), ("c", 0.5), ("c", 5.0), ("d", 15.0)]
    )
    def test_corner_frequencies_minus_3db(self, stage, freq):
        cfg = ChainConfig(amp=1.0, pga=1.0)
        g = measure_tone_gain(cfg, stage, freq, relative_to_input=True)
        mid = measure_tone_gain(cfg, stage, 2.0, relative_to_input=True)
        assert abs(20 * math.log10(g / mid) + 3.0) <= 0.5

    def test_linearity_per_stage(self):
        cfg = ChainConfig(amp=2.0, pga=2.0)
        tr = synth_ppg(70, 8, 100, NoiseSpec(drift_amp=0.03, white_sd=0.005), seed=1)
        base = process_chain(tr, cfg)
        for alpha in (0.5, 2.0):
            scaled = process_chain(PpgTrace(100, tr.samples * alpha), cfg)
            for s in "abcd":
                want = getattr(base, f"stage_{s}").samples * alpha
                got = getattr(scaled, f"stage_{s}").samples
                rel = np.max(np.abs(want - got)) / np.max(np.abs(want))
                assert rel < 1e-6

    def test_stage_d_at_least_stage_c_with_unit_pga(self):
        tr = synth_ppg(70, 12, 100, NoiseSpec(), seed=2)
        st = process_chain(tr, ChainConfig(amp=2.0, pga=1.0))
        settle = 200
        assert np.ptp(st.stage_d.samples[settle:]) >= np.ptp(st.stage_c.samples[settle:])

    def test_band_ordering_validated(self):
        with pytest.raises(InvalidConfigError):
            process_chain(synth_ppg(60, 5, 100), ChainConfig(hp_hz=0.6, bp_low_hz=0.5))
        with pytest.raises(InvalidConfigError):
            process_chain(synth_ppg(60, 5, 100), ChainConfig(lp_hz=60.0))

    def test_auto_pga_targets_full_scale(self):
        tr = synth_ppg(70, 12, 100, NoiseSpec(), seed=4)
        st = process_chain(tr, ChainConfig(amp=2.0, pga=None))
        assert st.pga_gain in ppg.PGA_GAINS
        peak = np.max(np.abs(st.stage_d.samples[200:]))
        assert peak <= 0.8 * 3.3

    def test_streaming_matches_batch(self):
        tr = synth_ppg(75, 10, 100, NoiseSpec(white_sd=0.005), seed=6)
        cfg = ChainConfig(amp=2.0, pga=2.0)
        batch = process_chain(tr, cfg)
        stream = ppg.StreamingChain(100, cfg)
        outs = [stream.push(chunk) for chunk in np.array_split(tr.samples, 7)]
        d = np.concatenate([o["d"] for o in outs])
        assert np.allclose(d, batch.stage_d.samples, atol=1e-12)


class TestDetectPeaks:
    def test_clean_60bpm(self):
        tr = synth_ppg(60, 10, 100)
        peaks = detect_peaks(tr)
        assert len(peaks) == 10
        assert np.all(np.abs(peaks - tr.ground_truth_peaks) <= 3)

    def test_refractory_keeps_larger(self):
        t = np.arange(600)
        x = 0.8 * np.exp(-0.5 * ((t - 200) / 5.0) ** 2)
        x += 1.0 * np.exp(-0.5 * ((t - 220) / 5.0) ** 2)
        peaks = detect_peaks(PpgTrace(fs_hz=100, samples=x))
        assert peaks.tolist() == [220]

    def test_short_trace_rejected(self):
        with pytest.raises(InsufficientDataError):
            detect_peaks(PpgTrace(fs_hz=100, samples=np.zeros(150)))

    def test_min_spacing_and_monotonic(self):
        tr = synth_ppg(120, 30, 100, NoiseSpec(white_sd=0.01), seed=8)
        st = process_chain(tr)
        peaks = detect_peaks(st.stage_d, refractory_s=0.3)
        assert np.all(np.diff(peaks) >= int(0.3 * 100))

    def test_noisy_match_rate(self):
        clean = synth_ppg(80, 60, 100)
        sd = white_sd_for_snr(clean, 10.0)
        tr = synth_ppg(80, 60, 100, NoiseSpec(white_sd=sd), seed=5)
        peaks = detect_peaks(process_chain(tr).stage_d)
        gt = tr.ground_truth_peaks
        matched = sum(1 for g in gt if np.min(np.abs(peaks - g)) <= 0.05 * 100)
        assert matched / len(gt) >= 0.95


class TestHeartRate:
    def test_even_spacing_60(self):
        hr = heart_rate(np.arange(0, 1000, 100), 100)
        assert np.allclose(hr.bpm, 60.0)

    def test_spacing_75_gives_80(self):
        hr = heart_rate(np.arange(0, 1500, 75), 100)
        assert np.allclose(hr.bpm, 80.0)

    def test_alternating_ibis_average_out(self):
        ibis = np.tile([0.9, 1.1], 10)
        peaks = np.round(np.concatenate([[0.0], np.cumsum(ibis)]) * 100).astype(int)
        hr = heart_rate(peaks, 100, window_s=peaks[-1] / 100)
        assert hr.bpm[0] == pytest.approx(60.0, abs=1e-9)

    def test_too_few_peaks(self):
        with pytest.raises(InsufficientDataError):
            heart_rate(np.array([100]), 100)

    def test_out_of_range_clamped_and_flagged(self):
        # 20 bpm spacing: 3 s apart
        hr = heart_rate(np.arange(0, 3000, 300), 100, window_s=40)
        assert np.all(hr.bpm >= 30.0)
        assert not hr.quality.any()

    def test_rate_consistency_through_pipeline(self):
        for h in (50, 60, 80, 100, 120):
            clean = synth_ppg(h, 60, 100)
            sd = white_sd_for_snr(clean, 10.0)
            tr = synth_ppg(h, 60, 100, NoiseSpec(white_sd=sd), seed=h)
            peaks = detect_peaks(process_chain(tr).stage_d)
            hr = heart_rate(peaks, 100)
            assert np.max(np.abs(hr.bpm - h)) <= 2.0, h


class TestPearson:
    def test_identity(self):
        a = np.array([1.0, 2.0, 5.0, 3.0])
        assert pearson(a, a) == pytest.approx(1.0)

    def test_negation(self):
        a = np.array([1.0, 2.0, 5.0, 3.0])
        assert pearson(a, -a) == pytest.approx(-1.0)

    def test_known_value(self):
        r = pearson(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0]))
        assert r == pytest.approx(0.9819805060619659, abs=1e-12)

    def test_symmetric(self):
        a = np.array([1.0, 4.0, 2.0, 8.0])
        b = np.array([2.0, 3.0, 7.0, 1.0])
        assert pearson(a, b) == pearson(b, a)

    def test_affine_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=50)
        assert abs(pearson(a, 2 * a + 5) - 1.0) < 1e-12

    def test_constant_series_rejected(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson(np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0]))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            pearson(np.arange(4.0), np.arange(5.0))


class TestBlandAltman:
    def test_identical_series(self):
        a = np.array([60.0, 70.0, 80.0])
        rep = bland_altman(a, a)
        assert rep.bias_bpm == 0.0
        assert rep.loa_low_bpm == 0.0 and rep.loa_high_bpm == 0.0

    def test_hand_computed_limits(self):
        b = np.array([10.0, 20.0, 30.0])
        a = b + np.array([1.0, 2.0, 3.0])
        rep = bland_altman(a, b)
        assert rep.bias_bpm == pytest.approx(2.0)
        assert rep.loa_low_bpm == pytest.approx(2.0 - 1.96, abs=1e-12)
        assert rep.loa_high_bpm == pytest.approx(2.0 + 1.96, abs=1e-12)

    def test_antisymmetric_bias(self):
        rng = np.random.default_rng(1)
        a = 70 + rng.normal(size=30)
        b = 70 + rng.normal(size=30)
        assert bland_altman(a, b).bias_bpm == -bland_altman(b, a).bias_bpm

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            bland_altman(np.arange(4.0), np.arange(5.0))


class TestDualPipeline:
    def test_agreement_with_noise(self):
        profile = lambda t: 80 + 15 * np.sin(2 * np.pi * t / 60)
        clean = synth_ppg(profile, 240, 100)
        sd = white_sd_for_snr(clean, 12.0)
        raw = synth_ppg(profile, 240, 100, NoiseSpec(drift_amp=0.03, white_sd=sd), seed=9)
        _, main, ref, _ = paired_hr(raw)
        rep = bland_altman(main, ref)
        assert rep.pearson_r >= 0.96
        assert abs(rep.bias_bpm) <= 3.0

    def test_zero_noise_agreement(self):
        profile = lambda t: 80 + 15 * np.sin(2 * np.pi * t / 60)
        raw = synth_ppg(profile, 240, 100)
        _, main, ref, _ = paired_hr(raw)
        assert pearson(main, ref) >= 0.999


class TestTraceIO:
    def test_trace_roundtrip(self, tmp_path):
        tr = synth_ppg(70, 3, 100, NoiseSpec(white_sd=0.01), seed=1)
        p = tmp_path / "trace.csv"
        ppg.save_trace(tr, p)
        back = ppg.load_trace(p)
        assert back.fs_hz == pytest.approx(100.0)
        assert np.allclose(back.samples, tr.samples)

    def test_stage_dump_four_columns(self, tmp_path):
        st = process_chain(synth_ppg(70, 3, 100))
        p = tmp_path / "stages.csv"
        ppg.save_stage_dump(st, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "stage_a,stage_b,stage_c,stage_d"
        assert all(len(ln.split(",")) == 4 for ln in lines[1:])
        assert len(lines) - 1 == st.stage_a.samples.size

    def test_report_csv_header(self, tmp_path):
        rep = bland_altman(np.array([60.0, 62.0, 61.0]), np.array([59.0, 63.0, 60.0]))
        p = tmp_path / "agreement.csv"
        ppg.save_agreement_report(rep, p)
        assert p.read_text().splitlines()[0] == "r,bias_bpm,loa_low,loa_high,n"
