"""Kinematic motion profiles and domain-shift configuration.

The eight exercise profiles plus the none profile ship as an editable
YAML file next to this module; nothing about their shapes is hard-coded
beyond the validation ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

SAMPLE_RATE_HZ = 44100
CARRIER_HZ = 20000.0
SOUND_SPEED_MPS = 340.0
MAX_SPEED_MPS = 17.4
NONE_CLASS = 8
N_CLASSES = 9

DEFAULT_PROFILE_FILE = "default_profiles.yaml"


@dataclass(frozen=True)
class LimbComponent:
    relative_amplitude: float
    harmonic_multiple: int
    phase_rad: float


@dataclass(frozen=True)
class KinematicProfile:
    """Periodic whole-body motion: a torso oscillation plus limb harmonics."""

    class_id: int
    period_s: float
    torso_velocity_mps: float
    limb_components: tuple[LimbComponent, ...] = ()
    duty_cycle: float = 1.0
    name: str = ""

    def validate(self) -> None:
        if not 0 <= self.class_id <= NONE_CLASS:
            raise ValueError(f"class_id {self.class_id} outside 0..{NONE_CLASS}")
        if not (0.0 <= self.torso_velocity_mps <= MAX_SPEED_MPS):
            raise ValueError(
                f"torso_velocity_mps {self.torso_velocity_mps} outside [0, {MAX_SPEED_MPS}]"
            )
        if not (1.0 <= self.period_s <= 6.0):
            raise ValueError(f"period_s {self.period_s} outside [1, 6]")
        if not (0.0 < self.duty_cycle <= 1.0):
            raise ValueError(f"duty_cycle {self.duty_cycle} outside (0, 1]")
        for limb in self.limb_components:
            if not (0.0 <= limb.relative_amplitude <= 1.0):
                raise ValueError(f"limb relative_amplitude {limb.relative_amplitude} outside [0, 1]")
            if limb.harmonic_multiple < 1 or limb.harmonic_multiple != int(limb.harmonic_multiple):
                raise ValueError(f"harmonic_multiple {limb.harmonic_multiple} must be a positive integer")
            if not math.isfinite(limb.phase_rad):
                raise ValueError("limb phase must be finite")


@dataclass(frozen=True)
class DomainShiftConfig:
    """Per-domain/per-subject acquisition variation knobs."""

    gain_db: float = 0.0
    noise_floor_db: float = -80.0
    attenuation_tilt: float = 0.0  # dB/kHz across the band
    speed_scale: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if not (-40.0 <= self.gain_db <= 0.0):
            raise ValueError(f"gain_db {self.gain_db} outside [-40, 0]")
        if not (-80.0 <= self.noise_floor_db <= -20.0):
            raise ValueError(f"noise_floor_db {self.noise_floor_db} outside [-80, -20]")
        if not (0.7 <= self.speed_scale <= 1.3):
            raise ValueError(f"speed_scale {self.speed_scale} outside [0.7, 1.3]")
        if not (-6.0 <= self.attenuation_tilt <= 6.0):
            raise ValueError(f"attenuation_tilt {self.attenuation_tilt} outside [-6, 6]")


#: Stock acquisition profile for the uncontrolled domain: quieter front-end,
#: a higher noise floor, a tilted band response, and faster subject motion.
DEFAULT_UNCONTROLLED_SHIFT = DomainShiftConfig(
    gain_db=-18.0,
    noise_floor_db=-42.0,
    attenuation_tilt=3.5,
    speed_scale=1.22,
    seed=1,
)


def _profile_from_dict(entry: dict) -> KinematicProfile:
    limbs = tuple(
        LimbComponent(
            relative_amplitude=float(limb["relative_amplitude"]),
            harmonic_multiple=int(limb["harmonic_multiple"]),
            phase_rad=float(limb["phase_rad"]),
        )
        for limb in entry.get("limb_components", [])
    )
    profile = KinematicProfile(
        class_id=int(entry["class_id"]),
        period_s=float(entry["period_s"]),
        torso_velocity_mps=float(entry["torso_velocity_mps"]),
        limb_components=limbs,
        duty_cycle=float(entry.get("duty_cycle", 1.0)),
        name=str(entry.get("name", "")),
    )
    profile.validate()
    return profile


def load_profiles(path: str | Path | None = None) -> list[KinematicProfile]:
    """Load the 9-profile set from YAML; defaults to the packaged file."""
    if path is None:
        text = resources.files(__package__).joinpath(DEFAULT_PROFILE_FILE).read_text()
    else:
        text = Path(path).read_text()
    doc = yaml.safe_load(text)
    profiles = [_profile_from_dict(entry) for entry in doc["profiles"]]
    ids = [p.class_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate class_ids in profile file: {sorted(ids)}")
    if sorted(ids) != list(range(N_CLASSES)):
        raise ValueError(f"profile file must define classes 0..{NONE_CLASS}, got {sorted(ids)}")
    return sorted(profiles, key=lambda p: p.class_id)
