"""Logical error rates of rotated surface codes under phenomenological noise.

Compares the three-stage BP+BP+OTF decoder with BP+OSD-0 on the same shots.
Here the sparsified model is the detector model itself, so the transfer
matrix is the identity. Run with ``python demos/surface_code_memory.py``;
it takes about a minute.
"""

from bpotf import (
    MonteCarloConfig,
    bp_osd0_config,
    build_phenomenological_model,
    build_rotated_surface_code,
    run_montecarlo,
    surface_code_config,
)

shots = 5000
print(f"{'d':>3} {'p':>6} {'decoder':>12} {'failures':>9} {'LER/round':>10} {'95% CI':>22} {'us/round':>9}")
for d in (3, 5):
    _, H_Z, _, L_Z = build_rotated_surface_code(d)
    for p in (0.01, 0.02):
        model = build_phenomenological_model(H_Z, p, p, rounds=d, logicals=L_Z)
        for name, cfg in (("BP+BP+OTF", surface_code_config()), ("BP+OSD-0", bp_osd0_config(70))):
            st = run_montecarlo(model, MonteCarloConfig(shots=shots, seed=1, rounds=d, pipeline=cfg))
            ci = f"[{st.ci_low:.4f}, {st.ci_high:.4f}]"
            print(f"{d:>3} {p:>6} {name:>12} {st.failures:>9} {st.ler_per_round:>10.5f} {ci:>22} "
                  f"{st.mean_time_per_round * 1e6:>9.1f}")
