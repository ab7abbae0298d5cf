import numpy as np
import pytest

from hmgan.autodiff import Graph, l1_distance
from hmgan.errors import ShapeError
from hmgan.layers import (LayerSpec, LayerStack, concat_condition, discriminator_stack,
                          forward_with_taps, generator_stack, init_params, one_hot)
from hmgan.rng import rng_stream

from conftest import linear_stack


def test_concat_condition_examples():
    np.testing.assert_array_equal(concat_condition([0.5], one_hot(0, 2)), [0.5, 1, 0])
    np.testing.assert_array_equal(concat_condition([], [1.0]), [1.0])


def test_concat_condition_rejects_matrices():
    with pytest.raises(ShapeError):
        concat_condition(np.ones((2, 2)), [1.0])


def test_shared_condition_preserves_l1(rng):
    for _ in range(20):
        z1, z2 = rng.normal(size=3), rng.normal(size=3)
        c = one_hot(int(rng.integers(4)), 4)
        g = Graph()
        d_in = g.value(l1_distance(g, g.leaf(concat_condition(z1, c)), g.leaf(concat_condition(z2, c))))
        assert d_in == pytest.approx(np.abs(z1 - z2).sum(), abs=1e-12)


def test_one_hot_sums_to_one():
    assert one_hot(2, 5).sum() == 1.0


def test_identity_stack_taps():
    g = Graph()
    trace = forward_with_taps(g, linear_stack(np.eye(2), np.eye(2)), np.array([1.0, 2.0]))
    assert trace.n == 2
    for t in trace.taps:
        np.testing.assert_array_equal(g.value(t), [1, 2])


def test_scale_layer():
    g = Graph()
    trace = forward_with_taps(g, linear_stack(2 * np.eye(2), np.eye(2)), np.array([1.0, 0.0]))
    np.testing.assert_array_equal(g.value(trace.taps[0]), [2, 0])


def test_generator_output_in_tanh_range(rng):
    gen = init_params(generator_stack(2, 2), rng)
    assert gen.n == 4 and gen.specs[-1].act == "tanh"
    out = gen(rng.normal(size=(200, 4)) * 10)
    assert np.all(np.abs(out) <= 1.0)


def test_generator_needs_two_layers():
    with pytest.raises(ValueError):
        generator_stack(2, 2, hidden=())


def test_discriminator_ends_in_scalar_logit():
    d = discriminator_stack(2, 3, hidden=(8, 8))
    assert d.in_width == 5 and d.out_width == 1 and d.specs[-1].act == "none"


def test_width_mismatch_is_shape_error():
    with pytest.raises(ShapeError):
        forward_with_taps(Graph(), linear_stack(np.eye(2)), np.ones(3))
    with pytest.raises(ShapeError):
        LayerStack([LayerSpec(2, 3, "relu"), LayerSpec(4, 1, "none")])


def test_layer_spec_validation():
    with pytest.raises(ValueError):
        LayerSpec(0, 2, "relu")
    with pytest.raises(ValueError):
        LayerSpec(2, 2, "sigmoid")


def test_init_uniform_fan_in():
    stack = init_params(LayerStack([LayerSpec(6, 400, "relu"), LayerSpec(400, 2, "tanh")]),
                        rng_stream(0, 1))
    w = stack.weights[0]
    assert np.all(np.abs(w) < 1.0)  # fan_in 6 gives a = 1
    assert np.abs(w).max() > 0.99
    assert np.all(stack.biases[0] == 0)
    again = init_params(LayerStack(stack.specs), rng_stream(0, 1))
    for a, b in zip(stack.parameters(), again.parameters()):
        np.testing.assert_array_equal(a, b)


def test_numpy_and_graph_forward_agree(rng):
    gen = init_params(generator_stack(2, 2), rng)
    x = rng.normal(size=(5, 4))
    g = Graph()
    trace = forward_with_taps(g, gen, x)
    for t, ref in zip(trace.taps, gen.forward(x)):
        np.testing.assert_allclose(g.value(t), ref, rtol=0, atol=1e-14)


def test_loss_reaches_only_layers_up_to_deepest_tap(rng):
    gen = init_params(generator_stack(2, 2, hidden=(8, 8, 8), act="tanh"), rng)
    x = rng.normal(size=(4, 4))
    g = Graph()
    trace = forward_with_taps(g, gen, x)
    grads = g.backward(g.sum(g.mul(trace.taps[1], trace.taps[1])))
    for k, (w, b) in enumerate(zip(gen.weights, gen.biases)):
        gw = grads.get(g.param_id(w))
        touched = gw is not None and np.any(gw != 0)
        assert touched == (k <= 1)


def test_checkpoint_roundtrip(tmp_path, rng):
    gen = init_params(generator_stack(2, 2), rng)
    path = tmp_path / "gen.json"
    gen.save(path)
    back = LayerStack.load(path)
    assert [s.act for s in back.specs] == [s.act for s in gen.specs]
    for a, b in zip(gen.parameters(), back.parameters()):
        np.testing.assert_array_equal(a, b)
    assert set(gen.to_dict()["layers"][0]) == {"w", "b", "act"}
