import numpy as np
import pytest

from hmgan.config import normalize
from hmgan.experiment import evaluate_run, two_step_bounds
from hmgan.training import build_state, dataset_for, discriminator_step, train

SMALL = {"steps": 60, "log_every": 20, "dataset": {"n_samples": 512},
         "generator": {"hidden": [16, 16, 16]}, "discriminator": {"hidden": [16, 16]},
         "metrics": {"eval_samples": 256, "k": 8, "bound_cap": 64}}


def cfg(**extra):
    doc = {**SMALL, **extra}
    return normalize(doc)


def params(stack):
    return [p.copy() for p in stack.parameters()]


def test_deterministic_given_seed():
    a, _ = train(cfg(), 3)
    b, _ = train(cfg(), 3)
    for x, y in zip(params(a.generator) + params(a.discriminator),
                    params(b.generator) + params(b.discriminator)):
        np.testing.assert_array_equal(x, y)


def test_beta_zero_matches_baseline():
    a, _ = train(cfg(beta=0.0), 1)
    b, _ = train(cfg(variant="baseline", ere_preset=None), 1)
    for x, y in zip(params(a.generator), params(b.generator)):
        np.testing.assert_array_equal(x, y)


def test_variants_share_first_discriminator_update():
    c_base, c_hm = cfg(variant="baseline"), cfg()
    ds = dataset_for(c_base)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, len(ds), 64)
    cond, z = ds.one_hot(ds.labels[idx]), rng.normal(size=(64, 2))
    results = []
    for c in (c_base, c_hm):
        state = build_state(c, 0)
        discriminator_step(state, ds.x[idx], cond, z)
        results.append(params(state.discriminator))
    for x, y in zip(*results):
        np.testing.assert_array_equal(x, y)


def test_ratio_log_positive_finite():
    state, log = train(cfg(), 0)
    assert log["status"] == "ok"
    steps = sorted({s for s, _, _ in state.ratio_log})
    assert steps == [0, 20, 40, 59]
    vals = np.array([r for _, _, r in state.ratio_log])
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    assert {layer for _, layer, _ in state.ratio_log} == {2, 3, 4}


def test_divergence_marks_failed():
    state, log = train(cfg(optimizer={"lr": 1e200}), 0)
    assert state.failed and log["status"] == "failed"
    assert log["failed_step"] is not None and log["failed_step"] < 60


def test_evaluate_run_report():
    c = cfg()
    state, _ = train(c, 0)
    rep = evaluate_run(state, c, seed=0)
    assert rep.m == 256 and rep.k == 8 and rep.variant == "hmgan" and rep.config_hash == c.hash()
    assert 0 <= rep.coverage <= 16 and len(rep.diversity_per_layer) == 3


def test_constant_generator_has_no_diversity():
    c = cfg()
    state = build_state(c, 0)
    for w in state.generator.weights:
        w[...] = 0.0
    state.generator.biases[-1][...] = [0.8, 0.0]
    rep = evaluate_run(state, c)
    assert rep.diversity_total == pytest.approx(0.0, abs=1e-12)
    # the constant sits near a mode of one condition only
    assert rep.coverage <= 1


def test_two_step_bounds_positive_and_repeatable():
    c = cfg(variant="baseline", ere_preset=None)
    a = two_step_bounds(c, 2)
    b = two_step_bounds(c, 2)
    assert a.layers == (2, 3, 4) and a.m == 64
    assert all(v > 0 and np.isfinite(v) for v in a.values)
    assert a.values == b.values
