import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hmgan.autodiff import Graph, finite_diff_check, l1_distance
from hmgan.errors import GraphError, ShapeError
from hmgan.rng import rng_stream


def test_add():
    g = Graph()
    out = g.add(g.leaf([1, 2]), g.leaf([3, 4]))
    np.testing.assert_array_equal(g.value(out), [4, 6])


def test_matmul_identity():
    g = Graph()
    m = [[5, 6], [7, 8]]
    out = g.matmul(g.leaf(np.eye(2)), g.leaf(m))
    np.testing.assert_array_equal(g.value(out), m)


def test_reciprocal_eps_at_zero():
    g = Graph()
    out = g.reciprocal_eps(g.leaf([0.0]), 1e-8)
    np.testing.assert_allclose(g.value(out), [1e8])


def test_shape_error_names_kind_and_shapes():
    g = Graph()
    with pytest.raises(ShapeError) as err:
        g.matmul(g.leaf(np.ones((2, 3))), g.leaf(np.ones((2, 3))))
    assert err.value.kind == "matmul"
    assert err.value.shapes == ((2, 3), (2, 3))
    with pytest.raises(ShapeError):
        g.add(g.leaf([1, 2, 3]), g.leaf([1, 2]))


@pytest.mark.parametrize("a,b,expected", [
    ([0, 0], [1, 1], 2.0),
    ([1, -2, 3], [-1, 2, 0], 9.0),  # |2| + |-4| + |3|
])
def test_l1_distance(a, b, expected):
    g = Graph()
    assert g.value(l1_distance(g, g.leaf(a), g.leaf(b))) == expected


def test_l1_distance_self_is_zero():
    g = Graph()
    x = g.leaf([0.3, -1.2])
    assert g.value(l1_distance(g, x, x)) == 0.0


def test_backward_sum_is_ones():
    g = Graph()
    x = g.leaf([1.0, 2.0, 3.0])
    grads = g.backward(g.sum(x))
    np.testing.assert_array_equal(grads[x], [1, 1, 1])


def test_backward_l1_sign_rule():
    g = Graph()
    x = g.leaf([2.0, -3.0])
    grads = g.backward(l1_distance(g, x, g.leaf([0.0, 0.0])))
    np.testing.assert_array_equal(grads[x], [1, -1])


def test_l1_subgradient_zero_at_tie():
    g = Graph()
    x = g.leaf([1.0, 5.0])
    grads = g.backward(l1_distance(g, x, g.leaf([1.0, 4.0])))
    np.testing.assert_array_equal(grads[x], [0, 1])


def test_root_gradient_is_ones():
    g = Graph()
    root = g.sum(g.leaf([1.0, 2.0]))
    assert g.backward(root)[root] == 1.0


def test_backward_rejects_non_scalar():
    g = Graph()
    with pytest.raises(GraphError):
        g.backward(g.leaf([1.0, 2.0]))


def test_backward_does_not_touch_forward_values():
    g = Graph()
    w = np.array([[1.0, -2.0], [0.5, 3.0]])
    x = g.leaf([1.0, 1.0])
    y = g.tanh(g.matmul(x, g.param(w)))
    loss = g.sum(g.abs(y))
    before = [v.copy() for v in g.values]
    g.backward(loss)
    for a, b in zip(before, g.values):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        g.values[y][0] = 0.0


def test_param_is_shared_between_uses():
    g = Graph()
    w = np.array([2.0])
    a, b = g.param(w), g.param(w)
    assert a == b
    grads = g.backward(g.sum(g.mul(a, b)))
    np.testing.assert_allclose(grads[a], [4.0])


def test_unused_leaf_in_reach_gets_zero():
    g = Graph()
    x = g.leaf([1.0, 2.0])
    grads = g.backward(g.sum(g.scale(x, 0.0)))
    np.testing.assert_array_equal(grads[x], [0, 0])


def test_broadcast_gradients_sum_back():
    g = Graph()
    x = g.leaf(np.ones((3, 2)))
    b = g.leaf([1.0, 2.0])
    grads = g.backward(g.sum(g.add(x, b)))
    np.testing.assert_array_equal(grads[b], [3, 3])


def test_concat_splits_gradient():
    g = Graph()
    a, b = g.leaf([1.0]), g.leaf([2.0, 3.0])
    c = g.concat([a, b])
    grads = g.backward(g.sum(g.mul(c, g.leaf([1.0, 2.0, 3.0]))))
    np.testing.assert_array_equal(grads[a], [1])
    np.testing.assert_array_equal(grads[b], [2, 3])


def test_finite_diff_quadratic_exact():
    rng = rng_stream(1, 0)
    x = rng.normal(size=5)
    a = rng.normal(size=(5, 5))

    def build(g):
        v = g.param(x)
        return g.sum(g.mul(v, g.matmul(g.leaf(a), v)))

    assert finite_diff_check(build, [x]) < 1e-8


def test_finite_diff_constant_loss():
    x = np.array([1.0, 2.0])

    def build(g):
        g.param(x)
        return g.sum(g.leaf([3.0]))

    assert finite_diff_check(build, [x]) == 0.0


def test_finite_diff_skips_kinks():
    x = np.array([0.0, 1.0])

    def build(g):
        return g.sum(g.abs(g.param(x)))

    # coordinate 0 sits on the kink and is skipped; coordinate 1 is exact
    assert finite_diff_check(build, [x]) < 1e-9


def test_finite_diff_detects_wrong_gradient():
    x = np.array([0.7, -0.3])

    def build(g):
        v = g.param(x)
        # the loss depends on x through a term the tape does not see
        return g.sum(g.leaf(g.value(g.mul(v, v)) + x))

    assert finite_diff_check(build, [x]) > 0.5


ELEMENTWISE = ["relu", "tanh", "abs", "softplus", "reciprocal_eps"]


@pytest.mark.parametrize("kind", ELEMENTWISE + ["scale", "sum", "sum_axis"])
def test_unary_gradients_random(kind):
    rng = rng_stream(7, len(kind))
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=(3, 4))
        if kind == "reciprocal_eps":
            x = np.abs(x) + 0.5
        w = rng.normal(size=(3, 4))

        def build(g):
            v = g.param(x)
            if kind == "scale":
                out = g.scale(v, 1.7)
            elif kind == "sum":
                return g.mul(g.sum(v), g.sum(v))
            elif kind == "sum_axis":
                s = g.sum(v, axis=1)
                return g.sum(g.mul(s, s))
            else:
                out = g.op(kind, v)
            return g.sum(g.mul(out, g.leaf(w)))

        worst = max(worst, finite_diff_check(build, [x]))
    assert worst < 1e-4


@pytest.mark.parametrize("kind", ["add", "sub", "mul", "matmul", "concat"])
def test_binary_gradients_random(kind):
    rng = rng_stream(8, ["add", "sub", "mul", "matmul", "concat"].index(kind))
    worst = 0.0
    for _ in range(100):
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2)) if kind == "matmul" else rng.normal(size=(3, 4))
        if kind == "add":
            b = rng.normal(size=4)  # broadcast row

        def build(g):
            va, vb = g.param(a), g.param(b)
            out = g.concat([va, vb], axis=0) if kind == "concat" else g.op(kind, va, vb)
            w = g.leaf(np.cos(np.arange(g.value(out).size)).reshape(g.value(out).shape))
            return g.sum(g.tanh(g.mul(out, w)))

        worst = max(worst, finite_diff_check(build, [a, b]))
    assert worst < 1e-4


@pytest.mark.parametrize("shapes", [((3,), (3, 2)), ((2, 3), (3,)), ((3,), (3,))])
def test_matmul_vector_gradients(shapes):
    rng = rng_stream(9, len(shapes[0]) + 2 * len(shapes[1]))
    a, b = rng.normal(size=shapes[0]), rng.normal(size=shapes[1])

    def build(g):
        out = g.matmul(g.param(a), g.param(b))
        return g.sum(g.tanh(out))

    assert finite_diff_check(build, [a, b]) < 1e-6


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-3, 3)))
def test_l1_distance_symmetric_and_nonnegative(x):
    y = x[::-1].copy()
    g = Graph()
    a, b = g.leaf(x), g.leaf(y)
    d1 = g.value(l1_distance(g, a, b))
    d2 = g.value(l1_distance(g, b, a))
    assert d1 == d2 >= 0


def test_rng_streams_deterministic_and_distinct():
    a = rng_stream(3, 1).normal(size=4)
    b = rng_stream(3, 1).normal(size=4)
    c = rng_stream(3, 2).normal(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
