"""Ratio matrices two ways, their agreement and speed, and per-layer lower bounds."""
import time

import numpy as np

from hmgan.bounds import lower_bounds, ratio_matrix_batched, ratio_matrix_naive
from hmgan.layers import generator_stack, init_params
from hmgan.rng import rng_stream

rng = rng_stream(0, 5)
gen = init_params(generator_stack(2, 2), rng)
z = rng.normal(size=(512, 2))
cond = np.eye(2)[rng.integers(0, 2, size=512)]
inputs = np.hstack([z, cond])

small = inputs[:12]
a = ratio_matrix_naive(gen, small, 3).entries
b = ratio_matrix_batched(gen, small, 3).entries
off = ~np.eye(12, dtype=bool)
print("max |naive - batched| on 12 samples:", np.abs(a[off] - b[off]).max())

for fn in (ratio_matrix_naive, ratio_matrix_batched):
    t0 = time.perf_counter()
    fn(gen, inputs, 3)
    print(f"{fn.__name__:22s} m=512: {time.perf_counter() - t0:.3f}s")

bounds = lower_bounds(gen, inputs)
for rec in bounds.as_records():
    print(rec)
