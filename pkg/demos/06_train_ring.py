"""Train baseline and HMGAN1 generators on the two-condition ring and compare them.

Takes about a minute; pass a step count as the first argument to go faster.
"""
import sys

from hmgan.config import normalize
from hmgan.experiment import scatter_svg, train_and_evaluate, eval_batch
from hmgan.training import dataset_for

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
for variant, preset in (("baseline", None), ("hmgan", "HMGAN1"), ("msgan", None)):
    cfg = normalize({"variant": variant, "ere_preset": preset, "steps": steps})
    data = dataset_for(cfg)
    state, log, rep = train_and_evaluate(cfg, 0, data)
    print(f"{variant:8s} fid={rep.fid:.4f} ndb={rep.ndb:2d} jsd={rep.jsd:.4f} coverage={rep.coverage}/16")
    last = {layer: r for step, layer, r in log["ratios"] if step == log["ratios"][-1][0]}
    print("          final mean layer ratios:", {k: round(v, 3) for k, v in last.items()})
    x, labels = eval_batch(state.generator, cfg, data)
    scatter_svg(f"ring_{variant}.svg", data.x, x, data.labels, labels, data.spec.conditions)
print("wrote ring_*.svg")
