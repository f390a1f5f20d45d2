"""Synthetic sonar generator: two-way Doppler physics, acquisition-shift
semantics, session structure, determinism, and the clip file format."""

from __future__ import annotations

import numpy as np
import pytest

from sonarfit.sim import (
    DEFAULT_UNCONTROLLED_SHIFT,
    DomainShiftConfig,
    KinematicProfile,
    NONE_CLASS,
    build_domain_corpus,
    derive_subject_shifts,
    load_clip,
    load_profiles,
    save_clip,
    synthesize_clip,
    synthesize_constant_velocity_clip,
    synthesize_session,
)
from sonarfit.sim.profiles import CARRIER_HZ, SAMPLE_RATE_HZ, SOUND_SPEED_MPS
from sonarfit.sim.synth import doppler_shift_hz

QUIET = DomainShiftConfig()


def peak_offset_hz(samples: np.ndarray, exclude_hz: float = 4.0) -> float:
    """Frequency of the strongest line near the carrier, ignoring the
    carrier itself. Plain rFFT of the whole clip; independent of the
    package's spectrogram code."""
    n = len(samples)
    spec = np.abs(np.fft.rfft(samples * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE_HZ)
    near = np.abs(freqs - CARRIER_HZ) <= 600.0
    carrier = np.abs(freqs - CARRIER_HZ) <= exclude_hz
    spec = np.where(near & ~carrier, spec, 0.0)
    return float(freqs[np.argmax(spec)] - CARRIER_HZ)


def test_two_way_doppler_formula():
    assert doppler_shift_hz(1.0) == pytest.approx(2.0 * CARRIER_HZ / SOUND_SPEED_MPS)
    assert doppler_shift_hz(0.0) == 0.0
    assert doppler_shift_hz(-2.0) == -doppler_shift_hz(2.0)


@pytest.mark.parametrize("velocity", [0.5, 1.0, 3.0])
def test_constant_velocity_clip_shows_expected_doppler_line(velocity):
    clip = synthesize_constant_velocity_clip(velocity, duration_s=2.0, seed=3)
    measured = peak_offset_hz(clip.samples)
    expected = doppler_shift_hz(velocity)
    assert measured == pytest.approx(expected, abs=1.0)  # 0.5 Hz grid


def test_speed_scale_multiplies_the_doppler_shift():
    shift = DomainShiftConfig(speed_scale=1.25)
    clip = synthesize_constant_velocity_clip(2.0, duration_s=2.0, seed=3, shift=shift)
    assert peak_offset_hz(clip.samples) == pytest.approx(1.25 * doppler_shift_hz(2.0), abs=1.0)


def test_gain_scales_the_whole_clip_linearly():
    base = synthesize_constant_velocity_clip(1.0, seed=9, shift=DomainShiftConfig(gain_db=0.0))
    quieter = synthesize_constant_velocity_clip(1.0, seed=9, shift=DomainShiftConfig(gain_db=-6.0))
    np.testing.assert_allclose(
        quieter.samples, base.samples * 10.0 ** (-6.0 / 20.0), rtol=0, atol=1e-7
    )


def test_noise_floor_raises_out_of_band_energy():
    def oob_power(noise_db):
        clip = synthesize_constant_velocity_clip(
            1.0, seed=4, shift=DomainShiftConfig(noise_floor_db=noise_db)
        )
        spec = np.abs(np.fft.rfft(clip.samples)) ** 2
        freqs = np.fft.rfftfreq(len(clip.samples), d=1.0 / SAMPLE_RATE_HZ)
        return spec[(freqs > 2000) & (freqs < 10000)].mean()

    assert oob_power(-30.0) > 100.0 * oob_power(-80.0)


def test_same_seed_reproduces_samples_exactly():
    a = synthesize_constant_velocity_clip(1.0, seed=11)
    b = synthesize_constant_velocity_clip(1.0, seed=11)
    assert np.array_equal(a.samples, b.samples)
    c = synthesize_constant_velocity_clip(1.0, seed=12)
    assert not np.array_equal(a.samples, c.samples)


def test_velocity_above_physical_limit_is_rejected():
    with pytest.raises(ValueError):
        synthesize_constant_velocity_clip(25.0)
    # speed scaling can push an otherwise legal velocity over the limit
    with pytest.raises(ValueError):
        synthesize_constant_velocity_clip(17.0, shift=DomainShiftConfig(speed_scale=1.1))


def test_shift_config_validation_bounds():
    for bad in (
        dict(gain_db=5.0),
        dict(gain_db=-60.0),
        dict(noise_floor_db=-10.0),
        dict(speed_scale=0.2),
        dict(attenuation_tilt=9.0),
    ):
        with pytest.raises(ValueError):
            DomainShiftConfig(**bad).validate()
    DEFAULT_UNCONTROLLED_SHIFT.validate()
    assert DEFAULT_UNCONTROLLED_SHIFT != QUIET


def test_profile_validation_bounds():
    with pytest.raises(ValueError):
        KinematicProfile(class_id=0, period_s=0.2, torso_velocity_mps=1.0).validate()
    with pytest.raises(ValueError):
        KinematicProfile(class_id=42, period_s=2.0, torso_velocity_mps=1.0).validate()


def test_default_profile_set_is_complete():
    profiles = load_profiles()
    assert [p.class_id for p in profiles] == list(range(9))
    assert all(p.name for p in profiles)
    none = profiles[NONE_CLASS]
    moving = [p for p in profiles if p.class_id != NONE_CLASS]
    assert all(p.torso_velocity_mps > 0 for p in moving)
    # idle drift must sit well below every actual exercise speed
    assert none.torso_velocity_mps < 0.5 * min(p.torso_velocity_mps for p in moving)
    # at least some profiles carry limb echoes at harmonic rates
    assert any(p.limb_components for p in moving)


def test_session_annotations_tile_the_clip(profiles):
    clip = synthesize_session(
        profiles, QUIET, reps_per_class=10, seed=5, target_duration_s=8.0
    )
    segs = clip.annotations
    assert segs[0].start_s == 0.0
    assert segs[-1].end_s == pytest.approx(clip.duration_s, abs=1e-6)
    for prev, cur in zip(segs, segs[1:]):
        assert cur.start_s == pytest.approx(prev.end_s, abs=1e-9)
    exercise_ids = [s.class_id for s in segs if s.class_id != NONE_CLASS]
    assert sorted(exercise_ids) == list(range(8))  # every exercise exactly once
    assert sum(s.class_id == NONE_CLASS for s in segs) >= 9  # gaps between and around
    clip.validate()


def test_session_order_depends_on_seed(profiles):
    def order(seed):
        clip = synthesize_session(profiles, QUIET, 10, seed=seed, target_duration_s=8.0)
        return [s.class_id for s in clip.annotations if s.class_id != NONE_CLASS]

    assert order(1) != order(2) or order(1) != order(3)


def test_single_exercise_clip_has_padded_body(profiles):
    prof = profiles[2]
    clip = synthesize_clip(prof, n_reps=4, seed=6)
    ids = [s.class_id for s in clip.annotations]
    assert ids == [NONE_CLASS, prof.class_id, NONE_CLASS]
    body = clip.annotations[1]
    assert body.end_s - body.start_s == pytest.approx(4 * prof.period_s, rel=0.01)


def test_corpus_builder_is_deterministic_per_session(profiles):
    clips = build_domain_corpus(
        profiles, QUIET, sessions=2, reps_per_session=10, seed=50,
        subject="S7", domain="lab", target_duration_s=8.0,
    )
    assert [c.session for c in clips] == [0, 1]
    assert all(c.subject == "S7" and c.domain == "lab" for c in clips)
    again = build_domain_corpus(
        profiles, QUIET, sessions=2, reps_per_session=10, seed=50,
        subject="S7", domain="lab", target_duration_s=8.0,
    )
    for a, b in zip(clips, again):
        assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(clips[0].samples, clips[1].samples)


def test_derive_subject_shifts_is_deterministic_and_valid():
    shifts = derive_subject_shifts(DEFAULT_UNCONTROLLED_SHIFT, n_subjects=4, seed=3)
    again = derive_subject_shifts(DEFAULT_UNCONTROLLED_SHIFT, n_subjects=4, seed=3)
    assert shifts == again
    assert len({s.speed_scale for s in shifts}) > 1
    for s in shifts:
        s.validate()


def test_clip_io_roundtrip_preserves_everything(tmp_path, profiles):
    clip = synthesize_clip(profiles[1], n_reps=2, seed=8)
    path = tmp_path / "clips" / "a.sfit"
    save_clip(clip, path)
    loaded = load_clip(path)
    assert np.array_equal(loaded.samples, clip.samples.astype(np.float32))
    assert loaded.subject == clip.subject
    assert loaded.domain == clip.domain
    assert loaded.session == clip.session
    assert len(loaded.annotations) == len(clip.annotations)
    for a, b in zip(loaded.annotations, clip.annotations):
        assert (a.start_s, a.end_s, a.class_id) == pytest.approx((b.start_s, b.end_s, b.class_id))


def test_clip_io_rejects_corrupt_blob(tmp_path):
    path = tmp_path / "bad.sfit"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_clip(path)
