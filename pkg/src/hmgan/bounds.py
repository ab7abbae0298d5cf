"""Dataset-wide layer ratio matrices and the lower bounds of the ERE targets.

Entry ``[u, v]`` of the layer-``i`` matrix is the L1 distance between samples u and
v after layer ``i - 1`` divided by their distance after layer ``i`` (guarded by
``eps``). The diagonal is a self-pair with no expansion information and holds
``+inf`` so it never wins a minimum.
"""
from dataclasses import dataclass

import numpy as np

from .autodiff import EPS


@dataclass
class RatioMatrix:
    layer: int
    entries: np.ndarray

    @property
    def m(self):
        return self.entries.shape[0]

    def off_diagonal(self):
        mask = ~np.eye(self.m, dtype=bool)
        return self.entries[mask]


@dataclass
class BoundVector:
    layers: tuple
    values: tuple
    m: int
    cap: int = None

    def as_records(self):
        return [{"layer": i, "b": b, "m": self.m} for i, b in zip(self.layers, self.values)]

    def get(self, layer):
        return self.values[self.layers.index(layer)]


def _check(stack, inputs, i):
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 2:
        raise ValueError(f"need at least 2 inputs as rows, got shape {inputs.shape}")
    if not 2 <= i <= stack.n:
        raise IndexError(f"layer index {i} outside 2..{stack.n}")
    return inputs


def ratio_matrix_naive(stack, inputs, i, eps=EPS):
    """Double loop over pairs, one forward pass per sample."""
    inputs = _check(stack, inputs, i)
    m = len(inputs)
    before, after = [], []
    for x in inputs:
        taps = stack.forward(x, batch_invariant=True)
        before.append(taps[i - 2])
        after.append(taps[i - 1])
    entries = np.empty((m, m))
    for u in range(m):
        for v in range(m):
            if u == v:
                entries[u, v] = np.inf
                continue
            num = np.sum(np.abs(before[u] - before[v]))
            den = np.sum(np.abs(after[u] - after[v]))
            entries[u, v] = num / (den + eps)
    return RatioMatrix(i, entries)


def pairwise_l1(a, block=64):
    """All-pairs L1 distance matrix of the rows of ``a`` by broadcast-subtract, in row blocks."""
    m = len(a)
    out = np.empty((m, m))
    for start in range(0, m, block):
        stop = min(start + block, m)
        out[start:stop] = np.abs(a[start:stop, None, :] - a[None, :, :]).sum(axis=-1)
    return out


def ratio_matrix_batched(stack, inputs, i, eps=EPS, block=64):
    """Same values as :func:`ratio_matrix_naive` from one batched forward sweep."""
    inputs = _check(stack, inputs, i)
    taps = stack.forward(inputs, batch_invariant=True)
    num = pairwise_l1(taps[i - 2], block)
    den = pairwise_l1(taps[i - 1], block)
    entries = num / (den + eps)
    np.fill_diagonal(entries, np.inf)
    return RatioMatrix(i, entries)


def lower_bounds(stack, inputs, eps=EPS, cap=512, rng=None):
    """Minimum off-diagonal ratio for each layer 2..n.

    When there are more than ``cap`` inputs a uniform subsample of ``cap`` rows is
    used (``rng`` picks it; default is the first ``cap`` rows).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 2:
        raise ValueError(f"need at least 2 inputs as rows, got shape {inputs.shape}")
    used_cap = None
    if cap is not None and len(inputs) > cap:
        idx = np.sort(rng.choice(len(inputs), cap, replace=False)) if rng is not None else np.arange(cap)
        inputs = inputs[idx]
        used_cap = cap
    layers = tuple(range(2, stack.n + 1))
    values = tuple(float(ratio_matrix_batched(stack, inputs, i, eps).entries.min()) for i in layers)
    return BoundVector(layers, values, len(inputs), used_cap)
