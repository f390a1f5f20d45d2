from .clip_io import AudioClip, Segment, load_clip, save_clip
from .profiles import (
    CARRIER_HZ,
    MAX_SPEED_MPS,
    N_CLASSES,
    NONE_CLASS,
    SAMPLE_RATE_HZ,
    SOUND_SPEED_MPS,
    DEFAULT_UNCONTROLLED_SHIFT,
    DomainShiftConfig,
    KinematicProfile,
    LimbComponent,
    load_profiles,
)
from .synth import (
    CARRIER_AMP,
    ECHO_AMP,
    build_domain_corpus,
    derive_subject_shifts,
    doppler_shift_hz,
    synthesize_clip,
    synthesize_constant_velocity_clip,
    synthesize_session,
)

__all__ = [
    "AudioClip",
    "Segment",
    "load_clip",
    "save_clip",
    "CARRIER_HZ",
    "MAX_SPEED_MPS",
    "N_CLASSES",
    "NONE_CLASS",
    "SAMPLE_RATE_HZ",
    "SOUND_SPEED_MPS",
    "DEFAULT_UNCONTROLLED_SHIFT",
    "DomainShiftConfig",
    "KinematicProfile",
    "LimbComponent",
    "load_profiles",
    "CARRIER_AMP",
    "ECHO_AMP",
    "build_domain_corpus",
    "derive_subject_shifts",
    "doppler_shift_hz",
    "synthesize_clip",
    "synthesize_constant_velocity_clip",
    "synthesize_session",
]
