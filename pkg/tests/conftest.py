"""Shared fixtures: small synthetic corpora reused across test modules.

Audio synthesis and spectrogram extraction dominate the cost of this
suite, so corpora are session-scoped and sized to the smallest pools
that still exercise the sampling and evaluation invariants (enough
sessions for a valid split, >= 10 support windows per class per subject
in the development half, and so on). Fixtures are lazy: running only
the unit-test modules never builds the larger acceptance corpora.
"""

from __future__ import annotations

import pytest

from sonarfit.data import make_split
from sonarfit.dsp import StftConfig, featurize_clips
from sonarfit.sim import (
    DEFAULT_UNCONTROLLED_SHIFT,
    DomainShiftConfig,
    build_domain_corpus,
    derive_subject_shifts,
    load_profiles,
)

# Cheaper feature grid for training-loop tests: same hop (so the frame
# period and window geometry are unchanged) but a 4096-sample window,
# giving 93 band bins instead of 372.
COARSE = StftConfig(window_len=4096, hop=2048, fft_len=4096)

LAB_QUIET = DomainShiftConfig()


@pytest.fixture(scope="session")
def profiles():
    return load_profiles()


@pytest.fixture(scope="session")
def coarse_corpus(profiles):
    """Small two-domain corpus at the coarse feature scale.

    Lab: one subject, two sessions. Uncontrolled: one subject, eight
    sessions (the minimum a split accepts). Exercises are shortened to
    ~12 s so each contributes 3-4 windows per session.
    """
    lab_clips = build_domain_corpus(
        profiles, LAB_QUIET, sessions=2, reps_per_session=10,
        seed=100, subject="L1", domain="lab", target_duration_s=12.0,
    )
    field_clips = build_domain_corpus(
        profiles, DEFAULT_UNCONTROLLED_SHIFT, sessions=8, reps_per_session=10,
        seed=200, subject="P1", domain="uncontrolled", target_duration_s=12.0,
    )
    lab = featurize_clips(lab_clips, COARSE)
    field = featurize_clips(field_clips, COARSE)
    return {"lab": lab, "field": field}


@pytest.fixture(scope="session")
def coarse_split(coarse_corpus):
    return make_split(coarse_corpus["lab"], coarse_corpus["field"], seed=0)


@pytest.fixture(scope="session")
def accept_coarse_corpus(profiles):
    """Corpus behind the adaptation and few-shot acceptance runs.

    Lab: one subject, six sessions. Uncontrolled: two subjects, eight
    sessions each, with per-subject variations drawn around the stock
    uncontrolled acquisition condition. ~14 s exercises give roughly
    four windows per class per session, so each subject's development
    half holds 14-16 windows per class -- enough for 10-shot support
    draws with spare queries.
    """
    lab_clips = build_domain_corpus(
        profiles, LAB_QUIET, sessions=6, reps_per_session=10,
        seed=1000, subject="L1", domain="lab", target_duration_s=14.0,
    )
    shifts = derive_subject_shifts(DEFAULT_UNCONTROLLED_SHIFT, n_subjects=2, seed=7)
    field_clips = []
    for i, (subject, shift) in enumerate(zip(("P1", "P2"), shifts)):
        field_clips += build_domain_corpus(
            profiles, shift, sessions=8, reps_per_session=10,
            seed=2000 + 100 * i, subject=subject, domain="uncontrolled",
            target_duration_s=14.0,
        )
    lab = featurize_clips(lab_clips, COARSE)
    field = featurize_clips(field_clips, COARSE)
    return {"lab": lab, "field": field}


@pytest.fixture(scope="session")
def accept_coarse_split(accept_coarse_corpus):
    return make_split(accept_coarse_corpus["lab"], accept_coarse_corpus["field"], seed=0)
