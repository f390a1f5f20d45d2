from .pool import WindowPool, merge_pools
from .sampler import Episode, sample_class_balanced_batch, sample_episode
from .split import (
    DEV_SESSIONS,
    MIN_SESSIONS,
    DatasetSplit,
    load_split_assignment,
    make_split,
    save_split_assignment,
)

__all__ = [
    "WindowPool",
    "merge_pools",
    "Episode",
    "sample_class_balanced_batch",
    "sample_episode",
    "DEV_SESSIONS",
    "MIN_SESSIONS",
    "DatasetSplit",
    "load_split_assignment",
    "make_split",
    "save_split_assignment",
]
