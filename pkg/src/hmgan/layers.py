"""Fully-connected layer stacks whose every layer output can be tapped.

Weights are stored as ``(n_in, n_out)`` matrices and applied as ``x @ W + b``,
so a batch is simply a 2-D array with one sample per row.
"""
import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

ACTIVATIONS = ("relu", "tanh", "none")


@dataclass(frozen=True)
class LayerSpec:
    n_in: int
    n_out: int
    act: str = "relu"

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError(f"layer widths must be positive, got {self.n_in}->{self.n_out}")
        if self.act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.act!r}")


@dataclass
class ForwardTrace:
    """Node ids of one forward pass: the input and the output of each layer.

    ``taps[0]`` is the output of layer 1 and ``taps[-1]`` the generated sample.
    """
    input: int
    taps: list

    @property
    def n(self):
        return len(self.taps)


class LayerStack:
    def __init__(self, specs, weights=None, biases=None):
        specs = list(specs)
        if not specs:
            raise ValueError("a stack needs at least one layer")
        for a, b in zip(specs, specs[1:]):
            if a.n_out != b.n_in:
                raise ShapeError("stack", (a.n_in, a.n_out), (b.n_in, b.n_out),
                                 detail="adjacent widths must conform")
        self.specs = specs
        if weights is None:
            weights = [np.zeros((s.n_in, s.n_out)) for s in specs]
        if biases is None:
            biases = [np.zeros(s.n_out) for s in specs]
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for s, w, b in zip(specs, self.weights, self.biases):
            if w.shape != (s.n_in, s.n_out) or b.shape != (s.n_out,):
                raise ShapeError("stack", w.shape, b.shape,
                                 detail=f"expected {(s.n_in, s.n_out)} and {(s.n_out,)}")

    @property
    def n(self):
        return len(self.specs)

    @property
    def in_width(self):
        return self.specs[0].n_in

    @property
    def out_width(self):
        return self.specs[-1].n_out

    def parameters(self):
        """Flat list of parameter arrays, weights and biases interleaved by layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return LayerStack(self.specs, [w.copy() for w in self.weights],
                          [b.copy() for b in self.biases])

    def forward(self, x, batch_invariant=False):
        """Plain numpy forward pass; returns the list of layer outputs.

        BLAS rounds a row differently depending on how many rows share the call.
        ``batch_invariant=True`` uses einsum's fixed summation order instead, so
        each row's result is bitwise independent of the batch it is part of.
        """
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.in_width:
            raise ShapeError("forward", h.shape, (self.in_width,))
        taps = []
        for s, w, b in zip(self.specs, self.weights, self.biases):
            h = (np.einsum("...i,ij->...j", h, w) if batch_invariant else h @ w) + b
            if s.act == "relu":
                h = np.maximum(h, 0.0)
            elif s.act == "tanh":
                h = np.tanh(h)
            taps.append(h)
        return taps

    def __call__(self, x):
        return self.forward(x)[-1]

    def to_dict(self):
        return {"layers": [{"w": w.tolist(), "b": b.tolist(), "act": s.act}
                           for s, w, b in zip(self.specs, self.weights, self.biases)]}

    @classmethod
    def from_dict(cls, doc):
        specs, ws, bs = [], [], []
        for layer in doc["layers"]:
            w = np.array(layer["w"], dtype=np.float64)
            specs.append(LayerSpec(w.shape[0], w.shape[1], layer["act"]))
            ws.append(w)
            bs.append(layer["b"])
        return cls(specs, ws, bs)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def generator_stack(z_dim, cond_dim, hidden=(32, 32, 32), out_dim=2, act="relu"):
    widths = [z_dim + cond_dim, *hidden, out_dim]
    specs = [LayerSpec(a, b, act) for a, b in zip(widths[:-2], widths[1:-1])]
    specs.append(LayerSpec(widths[-2], widths[-1], "tanh"))
    if len(specs) < 2:
        raise ValueError("a generator needs at least 2 layers")
    return LayerStack(specs)


def discriminator_stack(x_dim, cond_dim, hidden=(32, 32, 32), act="relu"):
    widths = [x_dim + cond_dim, *hidden]
    specs = [LayerSpec(a, b, act) for a, b in zip(widths[:-1], widths[1:])]
    specs.append(LayerSpec(widths[-1], 1, "none"))
    return LayerStack(specs)


def init_params(stack, rng, scheme="uniform_fan_in"):
    """Weights ~ U(-a, a) with a = sqrt(6 / fan_in); biases zero. Modifies in place."""
    if scheme != "uniform_fan_in":
        raise ValueError(f"unknown init scheme {scheme!r}")
    for s, w, b in zip(stack.specs, stack.weights, stack.biases):
        a = np.sqrt(6.0 / s.n_in)
        w[...] = rng.uniform(-a, a, size=w.shape)
        b[...] = 0.0
    return stack


def one_hot(label, width):
    v = np.zeros(width)
    v[label] = 1.0
    return v


def concat_condition(z, c):
    z = np.asarray(z, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if z.ndim != 1 or c.ndim != 1:
        raise ShapeError("concat_condition", z.shape, c.shape, detail="both must be vectors")
    return np.concatenate([z, c])


def forward_with_taps(g, stack, x):
    """Run ``stack`` inside graph ``g``; parameters enter as ``g.param`` leaves.

    ``x`` is either a node id or an array (one sample or one per row).
    """
    xid = x if isinstance(x, (int, np.integer)) else g.leaf(x)
    width = g.value(xid).shape[-1] if g.value(xid).ndim else 0
    if width != stack.in_width:
        raise ShapeError("forward_with_taps", g.value(xid).shape, (stack.in_width,))
    h = xid
    taps = []
    for s, w, b in zip(stack.specs, stack.weights, stack.biases):
        h = g.add(g.matmul(h, g.param(w)), g.param(b))
        if s.act == "relu":
            h = g.relu(h)
        elif s.act == "tanh":
            h = g.tanh(h)
        taps.append(h)
    return ForwardTrace(int(xid), taps)
