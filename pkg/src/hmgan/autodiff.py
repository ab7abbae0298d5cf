"""Tape-based reverse-mode differentiation over float64 numpy arrays.

A :class:`Graph` is an append-only list of nodes. Each node stores the kind of
operation, the ids of its inputs and its eagerly computed value. Node ids are
plain ints, so ``graph.add(a, b)`` returns the id of a new node.

Shape rules per kind:

* ``add``, ``sub``, ``mul``: numpy broadcasting; gradients are summed back to
  each operand's shape.
* ``matmul``: 1-D or 2-D operands, contracts the last axis of the left operand
  with the first axis of the right one.
* ``concat``: operands agree on every axis except ``axis``.
* ``relu``, ``tanh``, ``abs``, ``softplus``, ``scale``, ``reciprocal_eps``:
  elementwise, output shape equals input shape.
* ``sum``: full reduction to a 0-d array, or along one ``axis``.
"""
import numpy as np

from .errors import GraphError, ShapeError

EPS = 1e-8


def _as_array(x):
    return np.array(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_check(kind, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(kind, a.shape, b.shape) from None


# forward(values, attrs) -> array ; backward(g, values, out, attrs) -> tuple of grads

def _fwd_add(v, at):
    _broadcast_check("add", *v)
    return v[0] + v[1]


def _bwd_add(g, v, out, at):
    return _unbroadcast(g, v[0].shape), _unbroadcast(g, v[1].shape)


def _fwd_sub(v, at):
    _broadcast_check("sub", *v)
    return v[0] - v[1]


def _bwd_sub(g, v, out, at):
    return _unbroadcast(g, v[0].shape), _unbroadcast(-g, v[1].shape)


def _fwd_mul(v, at):
    _broadcast_check("mul", *v)
    return v[0] * v[1]


def _bwd_mul(g, v, out, at):
    return _unbroadcast(g * v[1], v[0].shape), _unbroadcast(g * v[0], v[1].shape)


def _fwd_matmul(v, at):
    a, b = v
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return a @ b


def _bwd_matmul(g, v, out, at):
    a, b = v
    if a.ndim == 1 and b.ndim == 1:
        return g * b, g * a
    if a.ndim == 1:
        return b @ g, np.outer(a, g)
    if b.ndim == 1:
        return np.outer(g, b), a.T @ g
    return g @ b.T, a.T @ g


def _fwd_concat(v, at):
    axis = at.get("axis", -1)
    try:
        return np.concatenate(v, axis=axis)
    except (ValueError, np.exceptions.AxisError):
        raise ShapeError("concat", *(x.shape for x in v), detail=f"axis={axis}") from None


def _bwd_concat(g, v, out, at):
    axis = at.get("axis", -1)
    cuts = np.cumsum([x.shape[axis] for x in v])[:-1]
    return tuple(np.split(g, cuts, axis=axis))


def _fwd_sum(v, at):
    axis = at.get("axis")
    x = v[0]
    if axis is not None and not -x.ndim <= axis < x.ndim:
        raise ShapeError("sum", x.shape, detail=f"axis={axis}")
    return np.asarray(x.sum(axis=axis))


def _bwd_sum(g, v, out, at):
    axis = at.get("axis")
    x = v[0]
    if axis is None:
        return (np.broadcast_to(g, x.shape).copy(),)
    return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


_OPS = {
    "add": (2, _fwd_add, _bwd_add),
    "sub": (2, _fwd_sub, _bwd_sub),
    "mul": (2, _fwd_mul, _bwd_mul),
    "matmul": (2, _fwd_matmul, _bwd_matmul),
    "concat": (None, _fwd_concat, _bwd_concat),
    "sum": (1, _fwd_sum, _bwd_sum),
    "relu": (1, lambda v, at: np.maximum(v[0], 0.0),
             lambda g, v, out, at: (g * (v[0] > 0),)),
    "tanh": (1, lambda v, at: np.tanh(v[0]),
             lambda g, v, out, at: (g * (1.0 - out * out),)),
    "abs": (1, lambda v, at: np.abs(v[0]),
            lambda g, v, out, at: (g * np.sign(v[0]),)),
    "scale": (1, lambda v, at: at["c"] * v[0],
              lambda g, v, out, at: (at["c"] * g,)),
    "reciprocal_eps": (1, lambda v, at: 1.0 / (v[0] + at.get("eps", EPS)),
                       lambda g, v, out, at: (-g * out * out,)),
    "softplus": (1, lambda v, at: _softplus(v[0]),
                 lambda g, v, out, at: (g * _sigmoid(v[0]),)),
}

# kinds whose derivative jumps where the input crosses zero
_KINKED = ("abs", "relu")


class Graph:
    """Append-only computation tape.

    Leaves are created with :meth:`leaf` (a fresh copy) or :meth:`param` (the
    same node for the same array object, so a parameter used by several
    forward passes accumulates one gradient).
    """

    def __init__(self):
        self.kinds = []
        self.inputs = []
        self.values = []
        self.attrs = []
        self._params = {}

    def __len__(self):
        return len(self.kinds)

    def _append(self, kind, inputs, value, attrs):
        self.kinds.append(kind)
        self.inputs.append(tuple(inputs))
        value.setflags(write=False)
        self.values.append(value)
        self.attrs.append(attrs)
        return len(self.kinds) - 1

    def leaf(self, value):
        return self._append("leaf", (), _as_array(value), {})

    def param(self, array):
        """Leaf bound to ``array``; repeated calls with the same object return the same id."""
        key = id(array)
        if key not in self._params:
            self._params[key] = (self.leaf(array), array)
        return self._params[key][0]

    def param_id(self, array):
        hit = self._params.get(id(array))
        return None if hit is None else hit[0]

    def value(self, nid):
        return self.values[nid]

    def op(self, kind, *inputs, **attrs):
        if kind not in _OPS:
            raise GraphError(f"unknown operation kind {kind!r}")
        arity, fwd, _ = _OPS[kind]
        if arity is not None and len(inputs) != arity:
            raise GraphError(f"{kind} takes {arity} inputs, got {len(inputs)}")
        for i in inputs:
            if not 0 <= i < len(self.kinds):
                raise GraphError(f"{kind}: unknown node id {i}")
        out = fwd([self.values[i] for i in inputs], attrs)
        return self._append(kind, inputs, _as_array(out), attrs)

    # thin helpers so loss code reads naturally
    def add(self, a, b):
        return self.op("add", a, b)

    def sub(self, a, b):
        return self.op("sub", a, b)

    def mul(self, a, b):
        return self.op("mul", a, b)

    def matmul(self, a, b):
        return self.op("matmul", a, b)

    def concat(self, nodes, axis=-1):
        return self.op("concat", *nodes, axis=axis)

    def relu(self, a):
        return self.op("relu", a)

    def tanh(self, a):
        return self.op("tanh", a)

    def sum(self, a, axis=None):
        return self.op("sum", a, axis=axis)

    def abs(self, a):
        return self.op("abs", a)

    def scale(self, a, c):
        return self.op("scale", a, c=float(c))

    def reciprocal_eps(self, a, eps=EPS):
        return self.op("reciprocal_eps", a, eps=float(eps))

    def softplus(self, a):
        return self.op("softplus", a)

    def mean(self, a):
        return self.scale(self.sum(a), 1.0 / self.values[a].size)

    def backward(self, root):
        """Gradients of scalar ``root`` with respect to every node it depends on."""
        out = self.values[root]
        if out.size != 1:
            raise GraphError(f"backward needs a scalar root, node {root} has shape {out.shape}")
        reach = np.zeros(root + 1, dtype=bool)
        reach[root] = True
        for nid in range(root, -1, -1):
            if reach[nid]:
                for i in self.inputs[nid]:
                    reach[i] = True
        grads = {root: np.ones_like(out)}
        for nid in range(root, -1, -1):
            if not reach[nid] or self.kinds[nid] == "leaf":
                continue
            g = grads.get(nid)
            if g is None:
                continue
            _, _, bwd = _OPS[self.kinds[nid]]
            ins = self.inputs[nid]
            parts = bwd(g, [self.values[i] for i in ins], self.values[nid], self.attrs[nid])
            for i, gi in zip(ins, parts):
                if i in grads:
                    grads[i] = grads[i] + gi
                else:
                    grads[i] = np.array(gi, dtype=np.float64)
        for nid in np.flatnonzero(reach):
            if nid not in grads:
                grads[int(nid)] = np.zeros_like(self.values[nid])
        return grads

    def kink_signature(self):
        """Signs of every input fed to a kinked op (abs, relu), as bytes."""
        parts = [np.sign(self.values[self.inputs[n][0]]).astype(np.int8).tobytes()
                 for n, k in enumerate(self.kinds) if k in _KINKED]
        return b"|".join(parts)


def l1_distance(g, a, b):
    """Scalar sum of |a - b| over all elements."""
    va, vb = g.value(a), g.value(b)
    if va.shape != vb.shape:
        raise ShapeError("l1_distance", va.shape, vb.shape)
    return g.sum(g.abs(g.sub(a, b)))


def finite_diff_check(builder, leaves, h=1e-5, max_coords=None, rng=None):
    """Max relative error between analytic and central-difference gradients.

    ``builder(graph)`` must build the loss and return its node id, reading each
    array in ``leaves`` through ``graph.param``. Leaves are perturbed in place and
    restored. A coordinate whose +-h perturbation flips the sign of any abs/relu
    input is skipped, since the two-sided difference straddles a kink there.
    """
    g = Graph()
    root = builder(g)
    grads = g.backward(root)
    base_sig = g.kink_signature()

    coords = [(li, idx) for li, leaf in enumerate(leaves) for idx in np.ndindex(leaf.shape)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng if rng is not None else np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[k] for k in sorted(pick)]

    def evaluate():
        gp = Graph()
        r = builder(gp)
        return float(gp.value(r)), gp.kink_signature()

    worst = 0.0
    for li, idx in coords:
        leaf = leaves[li]
        nid = g.param_id(leaf)
        analytic = 0.0 if nid is None or nid not in grads else float(grads[nid][idx])
        orig = leaf[idx]
        try:
            leaf[idx] = orig + h
            fp, sp = evaluate()
            leaf[idx] = orig - h
            fm, sm = evaluate()
        finally:
            leaf[idx] = orig
        if sp != base_sig or sm != base_sig:
            continue
        numeric = (fp - fm) / (2.0 * h)
        worst = max(worst, abs(analytic - numeric) / max(1.0, abs(analytic)))
    return worst
