"""Minimal numerical core: tensors, layers, losses, Adam, checkpoints."""

from .tensor import (
    Tensor, no_grad, as_tensor, concat, stack, exp, log, sqrt, tanh, sigmoid,
    abs_, leaky_relu, mean, sum_, reshape, transpose, getitem,
)
from .layers import Dense, Conv2d, BatchNorm2d, conv2d, max_pool2d, he_normal, uniform_init
from .lstm import BiLstm
from .losses import softmax_np, log_softmax, softmax_cross_entropy
from .params import ParameterSet
from .optim import AdamState, adam_step
from .checkpoint import save_checkpoint, load_checkpoint
from .gradcheck import check_gradients, relative_error, FD_STEP, DEFAULT_TOL

__all__ = [
    "Tensor", "no_grad", "as_tensor", "concat", "stack", "exp", "log", "sqrt", "tanh",
    "sigmoid", "abs_", "leaky_relu", "mean", "sum_", "reshape", "transpose", "getitem",
    "Dense", "Conv2d", "BatchNorm2d", "conv2d", "max_pool2d", "he_normal", "uniform_init",
    "BiLstm", "softmax_np", "log_softmax", "softmax_cross_entropy",
    "ParameterSet", "AdamState", "adam_step",
    "save_checkpoint", "load_checkpoint",
    "check_gradients", "relative_error", "FD_STEP", "DEFAULT_TOL",
]
