"""Diversity, Fréchet distance and NDB on a ring dataset versus a collapsed copy of it."""
import numpy as np

from hmgan.data import make_ring_dataset, mode_coverage
from hmgan.metrics import evaluate_points, ndb_fit, random_embedder
from hmgan.rng import rng_stream

real = make_ring_dataset(2, 8, 0.8, 0.01, 4096, rng_stream(0, 0))
fresh = make_ring_dataset(2, 8, 0.8, 0.01, 2048, rng_stream(1, 0))

# keep only half of the modes of each condition
keep = fresh.modes < 4
collapsed_x = np.vstack([fresh.x[keep], fresh.x[keep]])[:2048]
collapsed_labels = np.concatenate([fresh.labels[keep], fresh.labels[keep]])[:2048]

emb = random_embedder(0)
model = ndb_fit(real.x, 20, rng_stream(0, 4))
for name, x, labels in (("fresh samples", fresh.x, fresh.labels),
                        ("half the modes", collapsed_x, collapsed_labels)):
    rep = evaluate_points(real.x, x, emb, model=model)
    cov = mode_coverage(x, real.spec, labels)
    print(f"{name:15s} fid={rep.fid:.5f} ndb={rep.ndb:2d}/{rep.k} jsd={rep.jsd:.4f} "
          f"diversity={rep.diversity_total:.4g} coverage={cov}/16")
