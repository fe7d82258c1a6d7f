"""Sparsify a detector model and decode with soft information carried across.

The "full" model below adds, on top of a phenomenological surface code
model, faults that flip the detectors of two neighbouring elementary faults
at once, which is roughly what a hook error does in a real circuit. Every
such column is rewritten over the elementary model, and BP output on the
full model becomes the prior of BP on the elementary one.
Run with ``python demos/sparsified_pipeline.py``.
"""

import numpy as np

from bpotf import (
    MonteCarloConfig,
    build_phenomenological_model,
    build_rotated_surface_code,
    build_transfer_matrix,
    model_from_columns,
    run_montecarlo,
    surface_code_config,
)

rng = np.random.default_rng(7)
_, H_Z, _, L_Z = build_rotated_surface_code(5)
sdem = build_phenomenological_model(H_Z, 0.004, 0.004, rounds=5, logicals=L_Z)

cols = [(sdem.H.col(j), sdem.O.col(j), sdem.priors[j]) for j in range(sdem.num_columns)]
for j in rng.choice(sdem.num_columns, 150, replace=False):
    partners = np.unique(np.concatenate([sdem.H.row(r) for r in sdem.H.col(j)]))
    k = int(rng.choice(partners[partners != j]))
    det = np.zeros(sdem.num_detectors, dtype=np.uint8)
    obs = np.zeros(sdem.num_observables, dtype=np.uint8)
    for c in (j, k):
        det[sdem.H.col(c)] ^= 1
        obs[sdem.O.col(c)] ^= 1
    if det[sdem.H.col(j)].any() and det[sdem.H.col(k)].any():
        cols.append((np.flatnonzero(det), np.flatnonzero(obs), 0.002))
dem = model_from_columns(sdem.num_detectors, sdem.num_observables, cols)

T = build_transfer_matrix(dem, sdem)
print(f"full model: {dem.num_columns} columns, mean column weight {dem.mean_column_weight:.2f}")
print(f"sparsified: {sdem.num_columns} columns, mean column weight {sdem.mean_column_weight:.2f}")
print("transfer column weights:", np.bincount(T.A.col_weights))

st = run_montecarlo(dem, MonteCarloConfig(shots=3000, seed=3, rounds=5, pipeline=surface_code_config()),
                    sdem=sdem, transfer=T)
print(f"BP+BP+OTF: {st.failures}/{st.shots} failures, per-round rate {st.ler_per_round:.2e}")
print("stage that produced each answer:", st.stage_counts)
