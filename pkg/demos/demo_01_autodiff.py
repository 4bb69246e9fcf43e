"""
Gradients from a tiny tape
==========================

Every layer in the lifter runs on a small reverse-mode engine over numpy.
Here we build a two-layer expression by hand, backpropagate, and compare
against central differences.
"""

import numpy as np

from mixtgformer import tensor as tc
from mixtgformer.gradcheck import check_gradients, run_suite
from mixtgformer.tensor import Tensor, backward

rng = np.random.default_rng(0)

# leaves that want gradients
x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
w = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
b = Tensor(np.zeros(5), requires_grad=True)


def loss_fn():
    h = tc.gelu(tc.linear(x, w, b))
    return tc.tsum(tc.softmax_lastdim(h) * np.arange(5.0))


loss = loss_fn()
backward(loss)
print("loss", loss.item())
print("dL/dw\n", w.grad)

# The same numbers, estimated by perturbing each coordinate
worst, where = check_gradients(loss_fn, [("x", x), ("w", w), ("b", b)])
print(f"worst relative error {worst:.2e} (in {where})")

###############################################################################
# The packaged suite runs the same comparison for every primitive and for
# each composite layer. Subsampling coordinates keeps it quick.
for r in run_suite(components=["softmax_lastdim", "layer_norm", "mhsa_spatial"], max_coords=10):
    print(f"{r.name:16s} {r.error:.1e}")
