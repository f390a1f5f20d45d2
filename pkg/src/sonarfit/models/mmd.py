"""Maximum mean discrepancy between two embedding sets.

Biased estimator with a Gaussian kernel mixture. Bandwidths default to
the median pairwise distance of the joint set scaled by {0.5, 1, 2};
the median is selected by index but read through a differentiable
gather, so gradients flow through the bandwidth except on the measure-
zero set where the sort order changes.
"""

from __future__ import annotations

import numpy as np

from ..nn import Tensor, abs_, as_tensor, concat, exp, sqrt, transpose

BANDWIDTH_SCALES = (0.5, 1.0, 2.0)
_MIN_BANDWIDTH = 1e-6


def pairwise_sq_dists(a: Tensor, b: Tensor) -> Tensor:
    """(n, d) x (m, d) -> (n, m) squared euclidean distances."""
    aa = (a * a).sum(axis=1, keepdims=True)  # (n, 1)
    bb = (b * b).sum(axis=1, keepdims=True)  # (m, 1)
    return aa + transpose(bb, (1, 0)) - 2.0 * (a @ transpose(b, (1, 0)))


def median_pairwise_distance(d2: Tensor) -> Tensor:
    """Median off-diagonal distance of a square squared-distance matrix."""
    p = d2.data.shape[0]
    if p < 2:
        return as_tensor(np.asarray(_MIN_BANDWIDTH))
    off = ~np.eye(p, dtype=bool)
    idx = np.nonzero(off.ravel())[0]
    dists = sqrt(abs_(d2.reshape((p * p,))[idx]) + 1e-12)
    order = np.argsort(dists.data, kind="stable")
    k = len(order)
    if k % 2 == 1:
        return dists[int(order[k // 2])]
    return (dists[int(order[k // 2 - 1])] + dists[int(order[k // 2])]) * 0.5


def mmd(a, b, bandwidths: list[float] | None = None) -> Tensor:
    """MMD^2 (biased) between sample sets a (n, d) and b (m, d).

    With ``bandwidths`` given they are used as fixed kernel sigmas;
    otherwise the median heuristic picks them from the data.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("mmd expects 2-D (samples, features) inputs")
    if a.data.shape[0] < 1 or b.data.shape[0] < 1:
        raise ValueError("mmd needs at least one sample per set")
    if a.data.shape[1] != b.data.shape[1]:
        raise ValueError(f"feature dims differ: {a.data.shape[1]} vs {b.data.shape[1]}")

    n, m = a.data.shape[0], b.data.shape[0]
    z = concat([a, b], axis=0)
    d2 = pairwise_sq_dists(z, z)

    if bandwidths is not None:
        sigmas = [as_tensor(np.asarray(float(s))) for s in bandwidths]
        if not sigmas:
            raise ValueError("bandwidth list is empty")
    else:
        med = median_pairwise_distance(d2)
        if med.data < _MIN_BANDWIDTH:
            med = as_tensor(np.asarray(_MIN_BANDWIDTH))
        sigmas = [med * s for s in BANDWIDTH_SCALES]

    kernel = None
    for sigma in sigmas:
        term = exp(d2 * (-1.0) / (2.0 * sigma * sigma))
        kernel = term if kernel is None else kernel + term

    k_aa = kernel[:n, :n].mean()
    k_bb = kernel[n:, n:].mean()
    k_ab = kernel[:n, n:].mean()
    return k_aa + k_bb - 2.0 * k_ab
