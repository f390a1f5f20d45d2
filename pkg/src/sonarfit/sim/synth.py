"""Synthetic continuous-wave sonar returns for periodic exercise motion.

A clip is the sum of a carrier leak, one echo per moving scatterer, and
white noise. Each scatterer contributes ``amp * cos(phase(t))`` where

    phase(t) = 2*pi*f0*t + (4*pi*f0/c) * integral_0^t v(tau) dtau

so a scatterer moving at velocity ``v`` produces the two-way Doppler
shift ``2*f0*v/c``. Exercise motion is a per-rep sine burst: one full
sine cycle of the torso velocity over ``duty_cycle * period`` seconds
followed by rest, plus limb echoes running at integer multiples of the
burst rate. Each burst integrates to zero displacement, so scatterers
never drift away.

Domain shift enters in four places: a broadband gain, a white noise
floor relative to the carrier, a spectral tilt (dB/kHz) applied to each
echo as amplitude modulation against its instantaneous offset from the
carrier, and a speed scale multiplying every velocity.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .clip_io import AudioClip, Segment
from .profiles import (
    CARRIER_HZ,
    MAX_SPEED_MPS,
    N_CLASSES,
    NONE_CLASS,
    SAMPLE_RATE_HZ,
    SOUND_SPEED_MPS,
    DomainShiftConfig,
    KinematicProfile,
)

CARRIER_AMP = 0.30
ECHO_AMP = 0.20
_RAMP_S = 0.05
_NONE_CTRL_HZ = 12.0  # control-point rate of the smooth random drift velocity

_QUIET = DomainShiftConfig(gain_db=0.0, noise_floor_db=-80.0)


def doppler_shift_hz(
    velocity_mps,
    carrier_hz: float = CARRIER_HZ,
    sound_speed_mps: float = SOUND_SPEED_MPS,
):
    """Two-way Doppler shift for a reflector moving at ``velocity_mps``."""
    v = np.asarray(velocity_mps, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity must be finite")
    if not (math.isfinite(carrier_hz) and carrier_hz > 0):
        raise ValueError(f"carrier_hz must be positive, got {carrier_hz}")
    if not (math.isfinite(sound_speed_mps) and sound_speed_mps > 0):
        raise ValueError(f"sound_speed_mps must be positive, got {sound_speed_mps}")
    shift = 2.0 * carrier_hz * v / sound_speed_mps
    return float(shift) if np.isscalar(velocity_mps) else shift


def _envelope(n: int, sample_rate: int) -> np.ndarray:
    """Raised-cosine edge ramps so segments splice without clicks."""
    env = np.ones(n)
    ramp = min(int(_RAMP_S * sample_rate), n // 4)
    if ramp > 0:
        edge = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
        env[:ramp] = edge
        env[-ramp:] = edge[::-1]
    return env


def _exercise_velocities(
    profile: KinematicProfile, n: int, sample_rate: int
) -> list[tuple[float, np.ndarray]]:
    """Unscaled (echo_amplitude, velocity) pairs for one exercise segment.

    The torso is a unit-amplitude scatterer; each limb echoes at
    ``relative_amplitude`` of the torso and swings at the same fraction
    of the torso velocity, ``harmonic_multiple`` cycles per burst.
    """
    tau = (np.arange(n) / sample_rate) % profile.period_s
    burst_len = profile.duty_cycle * profile.period_s
    active = tau < burst_len
    base_arg = 2.0 * np.pi * tau / burst_len

    pairs = [(1.0, profile.torso_velocity_mps * np.sin(base_arg) * active)]
    for limb in profile.limb_components:
        v = (
            limb.relative_amplitude
            * profile.torso_velocity_mps
            * np.sin(limb.harmonic_multiple * base_arg + limb.phase_rad)
            * active
        )
        pairs.append((limb.relative_amplitude, v))
    return pairs


def _none_velocity(n: int, sample_rate: int, amp: float, rng) -> np.ndarray:
    """Smooth low-amplitude random drift used for the none class."""
    dur = n / sample_rate
    n_ctrl = max(int(dur * _NONE_CTRL_HZ) + 2, 2)
    ctrl = np.clip(rng.normal(0.0, 0.5 * amp, n_ctrl), -amp, amp)
    t_ctrl = np.linspace(0.0, dur, n_ctrl)
    return np.interp(np.arange(n) / sample_rate, t_ctrl, ctrl)


def _render_echoes(
    out: np.ndarray,
    start_idx: int,
    pairs: list[tuple[float, np.ndarray]],
    shift: DomainShiftConfig,
    sample_rate: int,
) -> None:
    """Accumulate the echo waveforms for one segment into ``out``."""
    n = len(pairs[0][1])
    env = _envelope(n, sample_rate)
    t = (start_idx + np.arange(n)) / sample_rate
    for rel_amp, v_base in pairs:
        v = v_base * shift.speed_scale
        peak = float(np.max(np.abs(v))) if n else 0.0
        if peak > MAX_SPEED_MPS:
            raise ValueError(
                f"scaled scatterer speed {peak:.2f} m/s exceeds {MAX_SPEED_MPS} m/s"
            )
        disp = np.cumsum(v) / sample_rate
        phase = 2.0 * np.pi * CARRIER_HZ * t + (
            4.0 * np.pi * CARRIER_HZ / SOUND_SPEED_MPS
        ) * disp
        # Spectral tilt as slow AM against the echo's instantaneous offset.
        offset_khz = doppler_shift_hz(v) / 1000.0
        tilt = 10.0 ** (shift.attenuation_tilt * offset_khz / 20.0)
        out[start_idx : start_idx + n] += rel_amp * ECHO_AMP * env * tilt * np.cos(phase)


def _finalize(
    out: np.ndarray,
    annotations: list[Segment],
    shift: DomainShiftConfig,
    rng,
    subject: str,
    domain: str,
    session: int,
) -> AudioClip:
    n = len(out)
    t = np.arange(n) / SAMPLE_RATE_HZ
    out += CARRIER_AMP * np.cos(2.0 * np.pi * CARRIER_HZ * t)
    noise_std = 10.0 ** (shift.noise_floor_db / 20.0) * CARRIER_AMP
    out += noise_std * rng.standard_normal(n)
    out *= 10.0 ** (shift.gain_db / 20.0)
    peak = float(np.max(np.abs(out))) if n else 0.0
    if peak > 1.0:
        raise ValueError(f"synthesis overflow: peak {peak:.3f} > 1; lower amplitudes")
    clip = AudioClip(
        samples=out.astype(np.float32),
        sample_rate=SAMPLE_RATE_HZ,
        annotations=annotations,
        subject=subject,
        domain=domain,
        session=session,
    )
    clip.validate()
    return clip


def synthesize_constant_velocity_clip(
    velocity_mps: float,
    duration_s: float = 2.0,
    seed: int = 0,
    shift: DomainShiftConfig | None = None,
) -> AudioClip:
    """Carrier plus a single reflector at constant velocity (test signal)."""
    shift = _QUIET if shift is None else shift
    shift.validate()
    if abs(velocity_mps) * shift.speed_scale > MAX_SPEED_MPS:
        raise ValueError(f"velocity {velocity_mps} exceeds {MAX_SPEED_MPS} m/s")
    rng = np.random.default_rng([seed, shift.seed])
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    out = np.zeros(n)
    v = np.full(n, float(velocity_mps))
    _render_echoes(out, 0, [(1.0, v)], shift, SAMPLE_RATE_HZ)
    return _finalize(out, [], shift, rng, subject="cal", domain="cal", session=0)


def _plan_session(
    exercise_profiles: list[KinematicProfile],
    none_profile: KinematicProfile,
    reps_per_class: int,
    gap_s: tuple[float, float],
    target_duration_s: float | None,
    rng,
) -> tuple[np.ndarray, list[Segment], list[tuple[int, int, KinematicProfile | None]]]:
    """Lay out [gap, ex, gap, ex, ..., gap] and return (out, annotations, plan)."""
    order = rng.permutation(len(exercise_profiles))
    pieces: list[tuple[KinematicProfile | None, int]] = []

    def gap_samples() -> int:
        return int(round(rng.uniform(*gap_s) * SAMPLE_RATE_HZ))

    pieces.append((None, gap_samples()))
    for idx in order:
        prof = exercise_profiles[idx]
        if target_duration_s is not None:
            reps = max(1, int(round(target_duration_s / prof.period_s)))
        else:
            reps = reps_per_class
        pieces.append((prof, int(round(reps * prof.period_s * SAMPLE_RATE_HZ))))
        pieces.append((None, gap_samples()))

    total = sum(n for _, n in pieces)
    out = np.zeros(total)
    annotations: list[Segment] = []
    plan: list[tuple[int, int, KinematicProfile | None]] = []
    cursor = 0
    for prof, n in pieces:
        cid = none_profile.class_id if prof is None else prof.class_id
        annotations.append(
            Segment(cursor / SAMPLE_RATE_HZ, (cursor + n) / SAMPLE_RATE_HZ, cid)
        )
        plan.append((cursor, n, prof))
        cursor += n
    return out, annotations, plan


def synthesize_session(
    profiles: list[KinematicProfile],
    shift: DomainShiftConfig,
    reps_per_class: int,
    seed: int,
    gap_s: tuple[float, float] = (3.0, 6.0),
    subject: str = "S0",
    domain: str = "lab",
    session: int = 0,
    target_duration_s: float | None = None,
) -> AudioClip:
    """One recording session: every exercise once, in random order, with
    none-class gaps before, between, and after."""
    for p in profiles:
        p.validate()
    shift.validate()
    ids = sorted(p.class_id for p in profiles)
    if ids != list(range(N_CLASSES)):
        raise ValueError(f"session needs profiles for classes 0..{NONE_CLASS}, got {ids}")
    none_profile = next(p for p in profiles if p.class_id == NONE_CLASS)
    exercises = [p for p in profiles if p.class_id != NONE_CLASS]

    rng = np.random.default_rng([seed, shift.seed])
    out, annotations, plan = _plan_session(
        exercises, none_profile, reps_per_class, gap_s, target_duration_s, rng
    )
    for start, n, prof in plan:
        if prof is None:
            v = _none_velocity(n, SAMPLE_RATE_HZ, none_profile.torso_velocity_mps, rng)
            pairs = [(1.0, v)]
        else:
            pairs = _exercise_velocities(prof, n, SAMPLE_RATE_HZ)
        _render_echoes(out, start, pairs, shift, SAMPLE_RATE_HZ)
    return _finalize(out, annotations, shift, rng, subject, domain, session)


def synthesize_clip(
    profile: KinematicProfile,
    shift: DomainShiftConfig | None = None,
    n_reps: int = 10,
    seed: int = 0,
    gap_s: tuple[float, float] = (1.0, 3.0),
) -> AudioClip:
    """A single-exercise clip with 1-3 s of none-class drift on each end."""
    profile.validate()
    shift = _QUIET if shift is None else shift
    shift.validate()
    rng = np.random.default_rng([seed, shift.seed])

    lead = int(round(rng.uniform(*gap_s) * SAMPLE_RATE_HZ))
    body = int(round(n_reps * profile.period_s * SAMPLE_RATE_HZ))
    tail = int(round(rng.uniform(*gap_s) * SAMPLE_RATE_HZ))
    out = np.zeros(lead + body + tail)

    drift_amp = 0.2
    _render_echoes(
        out, 0, [(1.0, _none_velocity(lead, SAMPLE_RATE_HZ, drift_amp, rng))], shift, SAMPLE_RATE_HZ
    )
    _render_echoes(out, lead, _exercise_velocities(profile, body, SAMPLE_RATE_HZ), shift, SAMPLE_RATE_HZ)
    _render_echoes(
        out,
        lead + body,
        [(1.0, _none_velocity(tail, SAMPLE_RATE_HZ, drift_amp, rng))],
        shift,
        SAMPLE_RATE_HZ,
    )
    annotations = [
        Segment(0.0, lead / SAMPLE_RATE_HZ, NONE_CLASS),
        Segment(lead / SAMPLE_RATE_HZ, (lead + body) / SAMPLE_RATE_HZ, profile.class_id),
        Segment((lead + body) / SAMPLE_RATE_HZ, len(out) / SAMPLE_RATE_HZ, NONE_CLASS),
    ]
    return _finalize(out, annotations, shift, rng, "S0", "lab", 0)


def build_domain_corpus(
    profiles: list[KinematicProfile],
    shift: DomainShiftConfig,
    sessions: int,
    reps_per_session: int,
    seed: int,
    subject: str = "S0",
    domain: str = "lab",
    gap_s: tuple[float, float] = (3.0, 6.0),
    target_duration_s: float | None = None,
) -> list[AudioClip]:
    """Session clips for one subject under one acquisition condition.

    Deterministic in ``seed``: session ``i`` is synthesized with seed
    ``seed + i`` so corpora can be regenerated clip-by-clip.
    """
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    clips = []
    for i in range(sessions):
        clips.append(
            synthesize_session(
                profiles,
                shift,
                reps_per_session,
                seed=seed + i,
                gap_s=gap_s,
                subject=subject,
                domain=domain,
                session=i,
                target_duration_s=target_duration_s,
            )
        )
    return clips


def derive_subject_shifts(
    base: DomainShiftConfig,
    n_subjects: int,
    seed: int,
    gain_jitter_db: float = 3.0,
    noise_jitter_db: float = 4.0,
    tilt_jitter: float = 0.8,
    speed_jitter: float = 0.06,
) -> list[DomainShiftConfig]:
    """Per-subject variations of a base acquisition condition.

    Draws are uniform around the base values and clipped back into the
    valid ranges, so the returned configs always validate.
    """
    base.validate()
    rng = np.random.default_rng(seed)
    shifts = []
    for i in range(n_subjects):
        cfg = replace(
            base,
            gain_db=float(np.clip(base.gain_db + rng.uniform(-gain_jitter_db, gain_jitter_db), -40.0, 0.0)),
            noise_floor_db=float(
                np.clip(base.noise_floor_db + rng.uniform(-noise_jitter_db, noise_jitter_db), -80.0, -20.0)
            ),
            attenuation_tilt=float(
                np.clip(base.attenuation_tilt + rng.uniform(-tilt_jitter, tilt_jitter), -6.0, 6.0)
            ),
            speed_scale=float(np.clip(base.speed_scale + rng.uniform(-speed_jitter, speed_jitter), 0.7, 1.3)),
            seed=base.seed + 7919 * (i + 1),
        )
        cfg.validate()
        shifts.append(cfg)
    return shifts
