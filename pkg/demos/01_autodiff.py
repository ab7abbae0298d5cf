"""Build a small loss on the tape, backpropagate, and check it against finite differences."""
import numpy as np

from hmgan.autodiff import Graph, finite_diff_check, l1_distance
from hmgan.rng import rng_stream

rng = rng_stream(0, 0)
w = rng.normal(size=(3, 2))
x = rng.normal(size=(5, 3))
target = rng.normal(size=(5, 2))


def loss(g):
    # tanh regression with an L1 penalty on the residual
    pred = g.tanh(g.matmul(g.leaf(x), g.param(w)))
    return l1_distance(g, pred, g.leaf(target))


g = Graph()
root = loss(g)
grads = g.backward(root)
print("loss:", g.value(root))
print("d loss / d w:\n", grads[g.param_id(w)])

# coordinates where a perturbation would cross the |.| kink are skipped
print("max relative gradient error:", finite_diff_check(loss, [w]))
