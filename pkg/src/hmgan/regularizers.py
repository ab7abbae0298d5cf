"""Layer-ratio regularizers for the generator.

Layer indices are 1-based to match the usual notation: layer ``i`` produces
``trace.taps[i - 1]`` and ``layer_ratio(..., i)`` compares layer ``i - 1`` with
layer ``i`` for ``2 <= i <= n``.

Every function here works on one pair of samples (taps are vectors, the result
is a scalar node) or on a batch of pairs (taps are ``(B, f)`` matrices whose
rows are paired, the result is a ``(B,)`` node of per-pair values).
"""
import json
from dataclasses import dataclass

import numpy as np

from .autodiff import EPS, l1_distance
from .errors import ShapeError

VARIANTS = ("hierarchical", "msgan", "none")
PRESETS = {"HMGAN1": 0.0, "HMGAN2": 1.0, "HMGAN3": 0.5}
REDUCTIONS = ("batch", "pairs")


@dataclass(frozen=True)
class EREVector:
    """Per-layer expansion targets for layers 2..n, optionally with lower bounds."""
    values: tuple
    bounds: tuple = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("ERE vector must have at least one entry")
        for k, v in enumerate(vals):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"ERE value {v} for layer {k + 2} outside [0, 1]")
        if self.bounds is not None:
            bounds = tuple(float(b) for b in self.bounds)
            object.__setattr__(self, "bounds", bounds)
            if len(bounds) != len(vals):
                raise ValueError("bounds and values differ in length")
            for k, (v, b) in enumerate(zip(vals, bounds)):
                if not b <= v:
                    raise ValueError(f"ERE value {v} for layer {k + 2} below its bound {b}")

    def __len__(self):
        return len(self.values)

    def to_json(self):
        return json.dumps(list(self.values))

    @classmethod
    def from_json(cls, text):
        return cls(tuple(json.loads(text)))


def ere_preset(name, n):
    if name not in PRESETS:
        raise ValueError(f"unknown ERE preset {name!r}; expected one of {sorted(PRESETS)}")
    if n < 2:
        raise ValueError(f"need at least 2 layers, got {n}")
    return EREVector((PRESETS[name],) * (n - 1))


@dataclass(frozen=True)
class RegularizerConfig:
    beta: float = 1.0
    epsilon: float = EPS
    variant: str = "hierarchical"
    numerator: str = "first_layer"
    reduction: str = "pairs"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.numerator not in ("raw_input", "first_layer"):
            raise ValueError(f"unknown numerator {self.numerator!r}")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {self.reduction!r}")


def pair_distance(g, a, b):
    """L1 distance over the last axis: a scalar for vectors, one value per row for matrices."""
    va, vb = g.value(a), g.value(b)
    if va.shape != vb.shape:
        raise ShapeError("pair_distance", va.shape, vb.shape)
    return g.sum(g.abs(g.sub(a, b)), axis=-1)


def _check_traces(t1, t2):
    if t1.n != t2.n:
        raise ValueError(f"traces have different depths: {t1.n} vs {t2.n}")


def layer_ratio(g, t1, t2, i, eps=EPS, distance=pair_distance):
    _check_traces(t1, t2)
    if not 2 <= i <= t1.n:
        raise IndexError(f"layer index {i} outside 2..{t1.n}")
    num = distance(g, t1.taps[i - 2], t2.taps[i - 2])
    den = distance(g, t1.taps[i - 1], t2.taps[i - 1])
    return g.mul(num, g.reciprocal_eps(den, eps))


def hierarchical_loss(g, t1, t2, ere, eps=EPS, distance=pair_distance):
    """Sum over layers 2..n of |ratio_i - target_i|."""
    _check_traces(t1, t2)
    if len(ere) != t1.n - 1:
        raise ValueError(f"ERE has {len(ere)} entries, stack needs {t1.n - 1}")
    total = None
    for i, lam in zip(range(2, t1.n + 1), ere.values):
        r = layer_ratio(g, t1, t2, i, eps, distance)
        term = g.abs(g.sub(r, g.leaf(lam)))
        total = term if total is None else g.add(total, term)
    return total


def msgan_loss(g, t1, t2, numerator="first_layer", eps=EPS, distance=pair_distance):
    """Input-side distance over output distance.

    ``numerator="first_layer"`` measures the input side at layer 1's output, which
    makes the loss telescope into the product of the layer ratios;
    ``"raw_input"`` measures it on the generator input itself.
    """
    _check_traces(t1, t2)
    if numerator == "first_layer":
        num = distance(g, t1.taps[0], t2.taps[0])
    elif numerator == "raw_input":
        num = distance(g, t1.input, t2.input)
    else:
        raise ValueError(f"unknown numerator {numerator!r}")
    den = distance(g, t1.taps[-1], t2.taps[-1])
    return g.abs(g.mul(num, g.reciprocal_eps(den, eps)))


def combined_objective(g, adv_loss, reg, config):
    if config.variant == "none" or config.beta == 0.0:
        return adv_loss
    return g.add(adv_loss, g.scale(reg, config.beta))


def cyclic_partners(labels):
    """Index of each element's partner: the next batch element with the same label,
    wrapping around inside each label group. Singleton groups pair with themselves.
    """
    labels = np.asarray(labels)
    partner = np.arange(len(labels))
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        partner[idx] = np.roll(idx, -1)
    return partner


def partner_trace(g, trace, partner):
    """Trace whose rows are the rows of ``trace`` reordered by ``partner``."""
    perm = np.zeros((len(partner), len(partner)))
    perm[np.arange(len(partner)), partner] = 1.0
    pid = g.leaf(perm)
    return type(trace)(g.matmul(pid, trace.input), [g.matmul(pid, t) for t in trace.taps])


def batch_regularizer(g, trace, labels, config, ere=None):
    """Regularizer over cyclic same-label pairs of a batch trace.

    With ``config.reduction == "batch"`` the pairs are pooled: every distance is
    summed over the whole batch before any ratio is taken, so the batch acts as
    one big pair. With ``"pairs"`` each pair gets its own ratios and the per-pair
    losses are averaged. Returns None when the variant is ``none`` or the batch
    has no valid pair.
    """
    if config.variant == "none":
        return None
    partner = cyclic_partners(labels)
    valid = partner != np.arange(len(partner))
    if not valid.any():
        return None
    other = partner_trace(g, trace, partner)
    # self-paired rows contribute zero distance, so pooling needs no mask
    dist = l1_distance if config.reduction == "batch" else pair_distance
    if config.variant == "hierarchical":
        if ere is None:
            raise ValueError("hierarchical variant needs an ERE vector")
        loss = hierarchical_loss(g, trace, other, ere, config.epsilon, dist)
    else:
        loss = msgan_loss(g, trace, other, config.numerator, config.epsilon, dist)
    if config.reduction == "batch":
        return loss
    weights = valid / valid.sum()
    return g.sum(g.mul(loss, g.leaf(weights)))


def ratios_numpy(taps, partner, eps=EPS):
    """Per-pair layer ratios from plain arrays; shape ``(n - 1, B)``."""
    d = [np.abs(t - t[partner]).sum(axis=-1) for t in taps]
    return np.array([d[k - 1] / (d[k] + eps) for k in range(1, len(d))])
