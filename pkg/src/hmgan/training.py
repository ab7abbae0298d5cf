"""Conditional GAN training on ring datasets with a pluggable generator regularizer."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph
from .data import make_ring_dataset
from .layers import discriminator_stack, forward_with_taps, generator_stack, init_params
from .regularizers import batch_regularizer, combined_objective, cyclic_partners, ratios_numpy
from .rng import DATA, INIT, TRAIN, rng_stream

log = logging.getLogger(__name__)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainState:
    generator: object
    discriminator: object
    opt_g: Adam
    opt_d: Adam
    step: int = 0
    ratio_log: list = field(default_factory=list)  # (step, layer, mean ratio)
    loss_log: list = field(default_factory=list)   # (step, d loss, g loss, reg)
    status: str = "ok"
    failed_step: int = None

    @property
    def failed(self):
        return self.status != "ok"


def dataset_for(config):
    d = config.dataset
    return make_ring_dataset(d.conditions, d.modes, d.radius, d.sigma, d.n_samples,
                             rng_stream(d.seed, DATA))


def build_state(config, seed):
    d = config.dataset
    rng = rng_stream(seed, INIT)
    gen = init_params(generator_stack(config.generator.z_dim, d.conditions, config.generator.hidden,
                                      2, config.generator.activation), rng)
    disc = init_params(discriminator_stack(2, d.conditions, config.discriminator.hidden,
                                           config.discriminator.activation), rng)
    o = config.optimizer
    return TrainState(gen, disc, Adam(gen.parameters(), o.lr, o.beta1, o.beta2),
                      Adam(disc.parameters(), o.lr, o.beta1, o.beta2))


def _disc_logits(g, disc, x_node, cond):
    inp = g.concat([x_node, g.leaf(cond)], axis=1)
    return forward_with_taps(g, disc, inp).taps[-1]


def _grads_for(g, grads, arrays):
    out = []
    for a in arrays:
        nid = g.param_id(a)
        out.append(np.zeros_like(a) if nid is None else grads[nid])
    return out


def discriminator_step(state, x_real, cond, z):
    """One non-saturating D update; returns the D loss."""
    gen, disc = state.generator, state.discriminator
    fake = gen(np.hstack([z, cond]))
    g = Graph()
    real_logits = _disc_logits(g, disc, g.leaf(x_real), cond)
    fake_logits = _disc_logits(g, disc, g.leaf(fake), cond)
    loss = g.add(g.mean(g.softplus(g.scale(real_logits, -1.0))), g.mean(g.softplus(fake_logits)))
    grads = g.backward(loss)
    state.opt_d.step(_grads_for(g, grads, disc.parameters()))
    return float(g.value(loss))


def generator_step(state, cond, labels, z, reg_config, ere):
    """One G update: adversarial term plus beta times the regularizer.

    Returns (total loss, regularizer value or nan, generator taps as arrays).
    """
    gen, disc = state.generator, state.discriminator
    g = Graph()
    trace = forward_with_taps(g, gen, np.hstack([z, cond]))
    logits = _disc_logits(g, disc, trace.taps[-1], cond)
    adv = g.mean(g.softplus(g.scale(logits, -1.0)))
    reg = batch_regularizer(g, trace, labels, reg_config, ere)
    loss = adv if reg is None else combined_objective(g, adv, reg, reg_config)
    grads = g.backward(loss)
    state.opt_g.step(_grads_for(g, grads, gen.parameters()))
    reg_val = float("nan") if reg is None else float(g.value(reg))
    return float(g.value(loss)), reg_val, [g.value(t) for t in trace.taps]


def _finite(stack):
    return all(np.isfinite(p).all() for p in stack.parameters())


def train(config, seed, dataset=None, ere=None):
    """Train one run. Returns (TrainState, run log dict).

    ``ere`` overrides the config's ERE vector (used by sweeps).
    """
    dataset = dataset_for(config) if dataset is None else dataset
    state = build_state(config, seed)
    rng = rng_stream(seed, TRAIN)
    reg_config = config.regularizer()
    ere = config.ere_vector() if ere is None else ere
    cond_dim = dataset.spec.conditions
    eye = np.eye(cond_dim)
    batch, z_dim = config.batch_size, config.generator.z_dim

    for step in range(config.steps):
        idx = rng.integers(0, len(dataset), size=batch)
        labels = dataset.labels[idx]
        cond = eye[labels]
        z_d = rng.standard_normal((batch, z_dim))
        z_g = rng.standard_normal((batch, z_dim))
        with np.errstate(all="ignore"):
            d_loss = discriminator_step(state, dataset.x[idx], cond, z_d)
            g_loss, reg_val, taps = generator_step(state, cond, labels, z_g, reg_config, ere)
        state.step = step + 1
        if not (np.isfinite(d_loss) and np.isfinite(g_loss)) or not (
                _finite(state.generator) and _finite(state.discriminator)):
            state.status = "failed"
            state.failed_step = step
            log.warning("run seed=%s diverged at step %d", seed, step)
            break
        if step % config.log_every == 0 or step == config.steps - 1:
            partner = cyclic_partners(labels)
            valid = partner != np.arange(batch)
            ratios = ratios_numpy(taps, partner, config.epsilon)[:, valid]
            for layer, mean_ratio in zip(range(2, len(taps) + 1), ratios.mean(axis=1)):
                state.ratio_log.append((step, layer, float(mean_ratio)))
            state.loss_log.append((step, d_loss, g_loss, reg_val))

    run_log = {"seed": seed, "status": state.status, "failed_step": state.failed_step,
               "steps": state.step, "ratios": state.ratio_log, "losses": state.loss_log}
    return state, run_log


def sample(generator, labels, z_dim, cond_dim, rng):
    z = rng.standard_normal((len(labels), z_dim))
    return generator(np.hstack([z, np.eye(cond_dim)[labels]]))
