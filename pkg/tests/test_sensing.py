import numpy as np
import pytest

from smartseat import sensing
from smartseat.errors import InvalidInputError, InvalidLabelError, ParseError
from smartseat.postures import EMPTY, NON_EMPTY_POSTURES, POSTURES
from smartseat.sensing import (
    DEFAULT_SIGNATURES,
    CushionLayout,
    FsrDividerConfig,
    fsr_adc,
    forces_to_counts,
    gen_posture_pressure,
    load_layout,
    load_signatures,
    save_layout,
    save_signatures,
    synth_session,
    with_tilt,
)


class TestLayout:
    def test_default_layout_valid(self):
        layout = CushionLayout()
        assert len(layout.sensor_positions) == 10
        assert layout.width_cm == 35.0 and layout.depth_cm == 45.0

    def test_mirror_symmetry(self):
        layout = CushionLayout()
        for i in range(5):
            xl, yl = layout.sensor_positions[i]
            xr, yr = layout.sensor_positions[9 - i]
            assert abs((layout.width_cm - xl) - xr) < 1e-9
            assert abs(yl - yr) < 1e-9

    def test_rejects_offboard_sensor(self):
        pos = list(CushionLayout().sensor_positions)
        pos[0] = (40.0, 8.0)
        pos[9] = (-5.0, 8.0)
        with pytest.raises(InvalidInputError):
            CushionLayout(sensor_positions=tuple(pos))

    def test_rejects_asymmetry(self):
        pos = list(CushionLayout().sensor_positions)
        pos[9] = (pos[9][0] + 0.5, pos[9][1])
        with pytest.raises(InvalidInputError):
            CushionLayout(sensor_positions=tuple(pos))

    def test_roundtrip_file(self, tmp_path):
        layout = CushionLayout()
        p = tmp_path / "layout.csv"
        save_layout(layout, p)
        back = load_layout(p)
        assert back.sensor_positions == layout.sensor_positions

    def test_load_bad_header(self, tmp_path):
        p = tmp_path / "layout.csv"
        p.write_text("id,x,y\nS1,1,1\n")
        with pytest.raises(ParseError):
            load_layout(p)


class TestFsrAdc:
    def test_zero_force_zero_counts(self):
        assert fsr_adc(0.0) == 0

    def test_equal_divider_halves(self):
        # 3 kg -> R_fsr = 30000/3 = 10 kOhm = R_fixed -> mid-scale
        assert fsr_adc(3.0) == 2048

    def test_full_range(self):
        # 10 kg -> R_fsr = 3 kOhm -> 3.3 * 10/13 V -> 0.76923 * 4095
        assert fsr_adc(10.0) == 3150

    def test_negative_force_rejected(self):
        with pytest.raises(InvalidInputError):
            fsr_adc(-0.1)

    def test_above_range_rejected(self):
        with pytest.raises(InvalidInputError):
            fsr_adc(10.5)

    def test_monotone_over_grid(self):
        grid = np.linspace(0.0, 10.0, 1000)
        counts = forces_to_counts(grid)
        assert np.all(np.diff(counts) >= 0)

    def test_scalar_matches_vectorized(self):
        grid = np.linspace(0.0, 10.0, 257)
        counts = forces_to_counts(grid)
        for f, c in zip(grid, counts):
            assert fsr_adc(float(f)) == c

    def test_counts_stay_in_adc_range(self):
        cfg = FsrDividerConfig(adc_bits=8)
        counts = forces_to_counts(np.linspace(0, 10, 100), cfg)
        assert counts.min() >= 0 and counts.max() <= 255

    def test_bad_config(self):
        with pytest.raises(InvalidInputError):
            FsrDividerConfig(adc_bits=4)
        with pytest.raises(InvalidInputError):
            FsrDividerConfig(supply_v=0.0)


class TestPostureSignatures:
    def test_empty_is_all_zero(self):
        for seed in range(5):
            forces = gen_posture_pressure(EMPTY, 65, seed)
            assert np.all(forces == 0.0)

    def test_left_leg_crossed_lifts_s1(self):
        forces = gen_posture_pressure("LeftLegCrossed", 65, 42)
        upright = gen_posture_pressure("Upright", 65, 42)
        assert forces[0] == 0.0
        assert forces[1] < upright[1]

    def test_upright_pelvic_profile(self):
        forces = gen_posture_pressure("Upright", 65, 7)
        pelvic = forces[list(sensing.PELVIC)]
        outer = forces[list(sensing.OUTER)]
        assert pelvic.max() / pelvic.min() <= 1.3
        assert pelvic.min() > outer.max()

    def test_lean_back_unloads_rear_sensors(self):
        up = np.asarray(DEFAULT_SIGNATURES["Upright"].mean_force_kg)
        back = np.asarray(DEFAULT_SIGNATURES["LeanBack"].mean_force_kg)
        rear = [2, 3, 4, 5, 6, 7]  # S3..S8
        assert np.all(back[rear] < up[rear])

    def test_signature_masses_bounded(self):
        for sig in DEFAULT_SIGNATURES.values():
            assert sum(sig.mean_force_kg) <= sensing.REFERENCE_MASS_KG

    def test_mass_out_of_range(self):
        with pytest.raises(InvalidInputError):
            gen_posture_pressure("Upright", 25, 1)
        with pytest.raises(InvalidInputError):
            gen_posture_pressure("Upright", 120, 1)

    def test_unknown_posture(self):
        with pytest.raises(InvalidLabelError):
            gen_posture_pressure("Standing", 65, 1)

    def test_deterministic_per_seed(self):
        a = gen_posture_pressure("Slouching", 70, 99)
        b = gen_posture_pressure("Slouching", 70, 99)
        assert np.array_equal(a, b)

    def test_mirror_symmetry_with_zero_tilt(self):
        table = with_tilt(DEFAULT_SIGNATURES, 0.0)
        for seed in range(20):
            f = gen_posture_pressure("Upright", 65, seed, signatures=table)
            assert np.allclose(f[:5], f[5:][::-1], atol=1e-9)

    def test_class_separability(self):
        # Centroids of distinct non-empty postures at the reference mass must
        # be at least 1 kg apart so the classification task is well-posed.
        centroids = {}
        for posture in NON_EMPTY_POSTURES:
            samples = np.stack(
                [gen_posture_pressure(posture, 65, s) for s in range(50)]
            )
            centroids[posture] = samples.mean(axis=0)
        names = list(centroids)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                dist = np.linalg.norm(centroids[a] - centroids[b])
                assert dist >= 1.0, (a, b, dist)

    def test_forces_clip_to_sensor_range(self):
        for seed in range(10):
            f = gen_posture_pressure("LeanLeft", 100, seed)
            assert f.min() >= 0.0 and f.max() <= sensing.MAX_FORCE_KG


class TestSynthSession:
    def test_paper_scale_sample_count(self):
        schedule = [(p, 60.0) for p in POSTURES]
        total = 0
        for subject in range(5):
            frames = synth_session(schedule, 65, 3, seed=subject)
            total += len(frames)
        assert abs(total - 7205) <= 0.05 * 7205

    def test_single_segment_with_trailing_empty(self):
        frames = synth_session([("Upright", 10.0)], 65, 1, seed=0)
        upright = [f for f in frames if f.label == "Upright"]
        empty = [f for f in frames if f.label == EMPTY]
        assert len(upright) == 10
        assert len(empty) > 0
        assert all(f.label == EMPTY for f in frames[10:])

    def test_determinism(self):
        schedule = [("Upright", 5.0), ("Slouching", 5.0)]
        a = synth_session(schedule, 65, 3, seed=7)
        b = synth_session(schedule, 65, 3, seed=7)
        assert a == b

    def test_timestamps_follow_rate(self):
        frames = synth_session([("Upright", 5.0)], 65, 3, seed=0)
        deltas = {
            frames[i + 1].timestamp_ms - frames[i].timestamp_ms
            for i in range(len(frames) - 1)
        }
        assert deltas == {round(1000 / 3)}

    def test_empty_gap_inserted_between_postures(self):
        frames = synth_session([("Upright", 4.0), ("Slouching", 4.0)], 65, 2, seed=0)
        labels = [f.label for f in frames]
        first_slouch = labels.index("Slouching")
        assert EMPTY in labels[: first_slouch]

    def test_label_conservation(self):
        schedule = [("LeanLeft", 3.0), ("LeanRight", 3.0)]
        frames = synth_session(schedule, 65, 5, seed=3)
        allowed = {"LeanLeft", "LeanRight", EMPTY}
        assert {f.label for f in frames} <= allowed

    def test_counts_within_adc_range(self):
        frames = synth_session([("LeanLeft", 5.0)], 100, 3, seed=0)
        for f in frames:
            assert all(0 <= c <= 4095 for c in f.counts)
            assert all(0.0 <= kg <= 10.0 for kg in f.forces_kg)

    def test_empty_schedule_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_session([], 65, 3, seed=0)

    def test_bad_rate_rejected(self):
        with pytest.raises(InvalidInputError):
            synth_session([("Upright", 5.0)], 65, 0.5, seed=0)
        with pytest.raises(InvalidInputError):
            synth_session([("Upright", 5.0)], 65, 250, seed=0)


class TestSignatureTableIO:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "signatures.csv"
        save_signatures(DEFAULT_SIGNATURES, p)
        back = load_signatures(p)
        assert set(back) == set(DEFAULT_SIGNATURES)
        for posture, sig in DEFAULT_SIGNATURES.items():
            assert back[posture].mean_force_kg == sig.mean_force_kg
            assert back[posture].spread_kg == sig.spread_kg

    def test_bad_column_count(self, tmp_path):
        p = tmp_path / "signatures.csv"
        save_signatures(DEFAULT_SIGNATURES, p)
        lines = p.read_text().splitlines()
        lines[1] = lines[1].rsplit(",", 1)[0]
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError):
            load_signatures(p)
