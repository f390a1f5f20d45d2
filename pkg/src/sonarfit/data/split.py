"""Three-way split: basic training vs per-subject development and testing.

Basic training takes every lab-domain window. Each uncontrolled-domain
subject contributes 8+ sessions; a seeded shuffle sends 4 to the
development half and the rest to testing, and the session assignment is
persisted as JSON so a split can be reproduced or audited later.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dsp.windows import SampleWindow
from .pool import WindowPool

DEV_SESSIONS = 4
MIN_SESSIONS = 8


@dataclass(frozen=True)
class DatasetSplit:
    basic_training: WindowPool
    subject_development: WindowPool
    testing: WindowPool
    assignment: dict  # subject -> {"dev": [...], "test": [...]}
    seed: int

    def validate(self) -> None:
        for subject, sess in self.assignment.items():
            overlap = set(sess["dev"]) & set(sess["test"])
            if overlap:
                raise ValueError(f"subject {subject}: sessions {overlap} in both halves")
        lab_domains = set(self.basic_training.domains)
        other = set(self.subject_development.domains) | set(self.testing.domains)
        if lab_domains & other:
            raise ValueError(f"domains {lab_domains & other} appear on both sides of the split")


def _session_table(windows: list[SampleWindow]) -> dict[str, list[int]]:
    table: dict[str, set[int]] = {}
    for w in windows:
        table.setdefault(w.subject, set()).add(w.session)
    return {s: sorted(v) for s, v in sorted(table.items())}


def make_split(
    lab_windows: list[SampleWindow],
    uncontrolled_windows: list[SampleWindow],
    seed: int,
    dev_sessions: int = DEV_SESSIONS,
) -> DatasetSplit:
    if not lab_windows or not uncontrolled_windows:
        raise ValueError("both corpora must be non-empty")
    table = _session_table(uncontrolled_windows)
    assignment: dict[str, dict[str, list[int]]] = {}
    rng = np.random.default_rng(seed)
    for subject, sessions in table.items():
        if len(sessions) < MIN_SESSIONS:
            raise ValueError(
                f"subject {subject} has {len(sessions)} sessions; need >= {MIN_SESSIONS}"
            )
        order = [sessions[i] for i in rng.permutation(len(sessions))]
        assignment[subject] = {
            "dev": sorted(order[:dev_sessions]),
            "test": sorted(order[dev_sessions:]),
        }
    return _apply_assignment(lab_windows, uncontrolled_windows, assignment, seed)


def _apply_assignment(
    lab_windows: list[SampleWindow],
    uncontrolled_windows: list[SampleWindow],
    assignment: dict,
    seed: int,
) -> DatasetSplit:
    dev, test = [], []
    for w in uncontrolled_windows:
        if w.subject not in assignment:
            raise ValueError(f"window subject {w.subject} missing from assignment")
        if w.session in assignment[w.subject]["dev"]:
            dev.append(w)
        elif w.session in assignment[w.subject]["test"]:
            test.append(w)
        else:
            raise ValueError(f"session {w.session} of {w.subject} not assigned")
    split = DatasetSplit(
        basic_training=WindowPool.from_windows(lab_windows),
        subject_development=WindowPool.from_windows(dev),
        testing=WindowPool.from_windows(test),
        assignment=assignment,
        seed=seed,
    )
    split.validate()
    return split


def save_split_assignment(split: DatasetSplit, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "seed": split.seed,
        "assignment": split.assignment,
        "counts": {
            "basic_training": len(split.basic_training),
            "subject_development": len(split.subject_development),
            "testing": len(split.testing),
        },
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_split_assignment(
    path: str | Path,
    lab_windows: list[SampleWindow],
    uncontrolled_windows: list[SampleWindow],
) -> DatasetSplit:
    doc = json.loads(Path(path).read_text())
    return _apply_assignment(lab_windows, uncontrolled_windows, doc["assignment"], doc["seed"])
