"""Central finite-difference verification of analytic gradients.

The numeric side is the independent oracle: it re-evaluates the loss with
perturbed 64-bit inputs and never touches the backward pass. Coordinates
are subsampled per tensor so large parameter blocks stay checkable.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

FD_STEP = 1e-5
DEFAULT_TOL = 1e-4
# Central differences on a float64 loss of order 1-10 carry ~1e-10 of
# cancellation noise; the floor keeps that noise from dominating the
# ratio on coordinates whose true gradient is essentially zero.
REL_FLOOR = 1e-5
# When a coordinate sits within h of a piecewise-linear kink (leaky ReLU,
# max pooling), the centered difference straddles two linear pieces and
# disagrees with the one-sided analytic value no matter how correct the
# backward pass is. Retrying with smaller steps disambiguates: a kink
# converges to the analytic value as h shrinks, a real bug never does.
RETRY_STEPS = (1e-6, 1e-7)


def relative_error(analytic: float, numeric: float, floor: float = REL_FLOOR) -> float:
    denom = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / denom


def check_gradients(
    build_loss,
    tensors: dict[str, Tensor],
    rng: np.random.Generator,
    coords_per_tensor: int = 8,
    h: float = FD_STEP,
) -> float:
    """Compare backward() gradients of build_loss() against central differences.

    build_loss must be a pure function of the tensors' current data. Returns
    the maximum relative error over all sampled coordinates.
    """
    for t in tensors.values():
        t.grad = None
    loss = build_loss()
    loss.backward()
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for name, t in tensors.items()}

    def centered(flat, c, step):
        keep = flat[c]
        flat[c] = keep + step
        up = build_loss().item()
        flat[c] = keep - step
        down = build_loss().item()
        flat[c] = keep
        return (up - down) / (2.0 * step)

    worst = 0.0
    for name, t in tensors.items():
        flat = t.data.ravel()
        n = flat.size
        k = min(coords_per_tensor, n)
        coords = rng.choice(n, size=k, replace=False)
        for c in coords:
            ana = analytic[name].ravel()[c]
            err = relative_error(ana, centered(flat, c, h))
            for step in RETRY_STEPS:
                if err <= DEFAULT_TOL:
                    break
                err = min(err, relative_error(ana, centered(flat, c, step)))
            worst = max(worst, err)
    return worst
