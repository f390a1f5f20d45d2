"""Experiment harness: configs, training loops, evaluation, reporting."""

from .config import (
    ALLOWED_EVAL_SUPPORTS,
    EPISODIC_METHODS,
    METHODS,
    ExperimentConfig,
    config_hash,
    make_config,
)
from .evaluate import (
    ResultRow,
    ResultTable,
    confusion_matrix,
    embed_pools,
    evaluate_closed,
    evaluate_fewshot,
    predict_episodic,
)
from .report import report, write_results_csv, write_summary
from .train import TrainResult, build_model, load_trained, train

__all__ = [
    "ALLOWED_EVAL_SUPPORTS",
    "EPISODIC_METHODS",
    "METHODS",
    "ExperimentConfig",
    "config_hash",
    "make_config",
    "ResultRow",
    "ResultTable",
    "confusion_matrix",
    "embed_pools",
    "evaluate_closed",
    "evaluate_fewshot",
    "predict_episodic",
    "report",
    "write_results_csv",
    "write_summary",
    "TrainResult",
    "build_model",
    "load_trained",
    "train",
]
