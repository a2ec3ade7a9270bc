"""Proximal operators of the l1 and sorted-l1 norms."""
import numpy as np

from .norms import _as_vector, _weights_of


def _pava_nonincreasing(z):
    """Project ``z`` onto non-increasing sequences, clipped below at zero.

    Stack-based pool adjacent violators: each block keeps its start
    index, its sum and its length; a new entry merges into the block
    before it while that block's mean does not exceed the new mean.
    """
    starts = []
    sums = []
    lens = []
    for i, zi in enumerate(z):
        start, total, length = i, zi, 1
        while sums and sums[-1] * length <= total * lens[-1]:
            start = starts.pop()
            total += sums.pop()
            length += lens.pop()
        starts.append(start)
        sums.append(total)
        lens.append(length)
    out = np.empty(len(z))
    for start, total, length in zip(starts, sums, lens):
        out[start:start + length] = max(total / length, 0.0)
    return out


def prox_sorted_l1(v, w):
    """argmin_x 0.5 ||x - v||^2 + sum_j lambda_j x_j^#.

    Sorts |v| in decreasing order, subtracts the weights, takes the
    non-increasing isotonic fit clipped at zero and undoes the sort and
    the sign flip. With equal weights this is soft-thresholding.
    """
    v = _as_vector(v)
    lam = _weights_of(w)
    if lam.size != v.size:
        raise ValueError(f"dimension mismatch: {v.size} entries, {lam.size} weights")
    return _prox_sorted(v, lam)


def _prox_sorted(v, lam):
    a = np.abs(v)
    order = np.argsort(-a, kind="stable")
    fitted = _pava_nonincreasing((a[order] - lam).tolist())
    out = np.empty_like(v)
    out[order] = fitted
    return np.sign(v) * out


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
