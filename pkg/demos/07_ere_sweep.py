"""Vary one layer's target and watch diversity and the saturation region below its bound.

Uses a short schedule and two seeds so it finishes in about a minute.
"""
from hmgan.config import normalize
from hmgan.experiment import sweep_ere

cfg = normalize({"ere_preset": "HMGAN2", "steps": 1000, "seeds": [0, 1]})
rows, summary = sweep_ere(cfg, 3, [1.0, 0.75, 0.5, 0.25, 0.0])
for r in rows:
    flag = "saturated" if r["saturated"] else ""
    print(f"seed {r['seed']} lambda={r['lambda']:.2f} b={r['b']:.3f} "
          f"diversity_l3={r['diversity_target']:.4g} {flag}")
print("median diversity per lambda:", [round(v, 1) for v in summary["median_diversity"]])
print("spearman(-lambda, diversity):", round(summary["spearman"], 3))
