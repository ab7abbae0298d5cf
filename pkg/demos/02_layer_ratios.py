"""Layer ratios on a hand-built stack, the two regularizers, and the telescoping identity."""
import numpy as np

from hmgan.autodiff import Graph
from hmgan.layers import LayerSpec, LayerStack, forward_with_taps
from hmgan.regularizers import EREVector, ere_preset, hierarchical_loss, layer_ratio, msgan_loss

# layer 2 doubles distances (ratio 0.5), layer 3 halves them (ratio 2)
eye = np.eye(2)
stack = LayerStack([LayerSpec(2, 2, "none")] * 3, [eye, 2 * eye, 0.5 * eye])

g = Graph()
t1 = forward_with_taps(g, stack, np.array([0.0, 0.0]))
t2 = forward_with_taps(g, stack, np.array([1.0, 0.5]))
for i in (2, 3):
    print(f"ratio at layer {i}: {g.value(layer_ratio(g, t1, t2, i)):.6f}")

for name in ("HMGAN1", "HMGAN2", "HMGAN3"):
    ere = ere_preset(name, stack.n)
    print(f"{name} targets {ere.values}: L_h = {g.value(hierarchical_loss(g, t1, t2, ere)):.6f}")
print("targets (0.5, 1.0):",
      g.value(hierarchical_loss(g, t1, t2, EREVector((0.5, 1.0)))))

# the single-ratio loss is the product of the per-layer ratios
print("L_d (first-layer numerator):", g.value(msgan_loss(g, t1, t2)))
print("L_d (raw-input numerator):  ", g.value(msgan_loss(g, t1, t2, "raw_input")))
