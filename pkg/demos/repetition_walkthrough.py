"""Walk through BP and forest post-processing on a small repetition code.

Run with ``python demos/repetition_walkthrough.py``.
"""

import numpy as np

from bpotf import BpConfig, bp_decode, build_code_capacity_model, build_otf, build_repetition_code, otf_decode
from bpotf.gf2 import matvec_mod2

H, L = build_repetition_code(7)
model = build_code_capacity_model(H, L, 0.08)
print("check matrix\n", H.to_dense())

# A single flipped bit lights up the two checks around it.
e = np.zeros(7, dtype=np.uint8)
e[3] = 1
s = matvec_mod2(H, e)
print("syndrome", s)

res = bp_decode(model, s, cfg=BpConfig(variant="product-sum"))
print("BP estimate", res.estimate, "converged", res.converged, "after", res.iterations_used, "iterations")
print("posteriors", np.round(res.posteriors, 4))

# Cut BP short so that it fails, then let the forest stage finish the job.
short = bp_decode(model, s, cfg=BpConfig(max_iters=1))
print("\none-iteration BP converged:", short.converged)
order = np.argsort(-short.posteriors, kind="stable")
sel = build_otf(H, order)
print("forest columns in scan order", sel.kept_cols, "virtual check rows", sel.virtual_checks)
fixed = otf_decode(model, short.posteriors, s)
print("forest estimate", fixed.estimate, "converged", fixed.converged)
print("logical flipped:", bool(matvec_mod2(L, fixed.estimate ^ e)[0]))
