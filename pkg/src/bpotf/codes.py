"""Small code families used as fixtures and benchmarks."""

from __future__ import annotations

import numpy as np

from .gf2 import SparseBinaryMatrix, matmul_mod2


def build_repetition_code(d: int) -> tuple[SparseBinaryMatrix, SparseBinaryMatrix]:
    """Distance-``d`` repetition code: ``(d-1) x d`` chain and the all-ones logical."""
    if d < 2:
        raise ValueError("repetition code distance must be at least 2")
    H = SparseBinaryMatrix.from_rows(d - 1, d, [(i, i + 1) for i in range(d - 1)])
    L = SparseBinaryMatrix.from_rows(1, d, [range(d)])
    return H, L


def build_rotated_surface_code(d: int):
    """Rotated surface code on a ``d x d`` grid of data qubits.

    Qubit ``(r, c)`` has index ``r * d + c``. Plaquette ``(i, j)`` covers the
    qubits at rows ``i, i+1`` and columns ``j, j+1`` that exist; it is X-type
    when ``i + j`` is even. Weight-2 X plaquettes sit on the top and bottom
    edges and weight-2 Z plaquettes on the left and right edges.

    Returns
    -------
    H_X, H_Z, logical_X, logical_Z : SparseBinaryMatrix
        Check matrices and the two weight-``d`` logical operators (one row each).
    """
    if d < 3 or d % 2 == 0:
        raise ValueError("rotated surface code distance must be odd and at least 3")
    x_checks, z_checks = [], []
    for i in range(-1, d):
        for j in range(-1, d):
            qubits = [r * d + c for r in (i, i + 1) for c in (j, j + 1)
                      if 0 <= r < d and 0 <= c < d]
            is_x = (i + j) % 2 == 0
            on_top_bottom = i in (-1, d - 1)
            on_left_right = j in (-1, d - 1)
            if len(qubits) == 4:
                (x_checks if is_x else z_checks).append(qubits)
            elif len(qubits) == 2:
                if is_x and on_top_bottom and not on_left_right:
                    x_checks.append(qubits)
                elif not is_x and on_left_right and not on_top_bottom:
                    z_checks.append(qubits)
    n = d * d
    H_X = SparseBinaryMatrix.from_rows(len(x_checks), n, x_checks)
    H_Z = SparseBinaryMatrix.from_rows(len(z_checks), n, z_checks)
    row0 = [c for c in range(d)]
    col0 = [r * d for r in range(d)]
    # a logical X must commute with every Z check, and vice versa
    candidates = [SparseBinaryMatrix.from_rows(1, n, [s]) for s in (row0, col0)]

    def commutes(H, L):
        return matmul_mod2(H, L.transpose()).nnz == 0

    L_X = next(L for L in candidates if commutes(H_Z, L))
    L_Z = next(L for L in candidates if commutes(H_X, L))
    return H_X, H_Z, L_X, L_Z


def css_orthogonal(H_X: SparseBinaryMatrix, H_Z: SparseBinaryMatrix) -> bool:
    return matmul_mod2(H_X, H_Z.transpose()).nnz == 0


def minimum_logical_weight(H: SparseBinaryMatrix, L: SparseBinaryMatrix) -> int:
    """Smallest weight of ``x`` with ``H x = 0`` and ``L x != 0``, by enumeration."""
    n = H.num_cols
    if n > 24:
        raise ValueError("exhaustive search limited to 24 columns")
    xs = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int64)
    Hd, Ld = H.to_dense().astype(np.int64), L.to_dense().astype(np.int64)
    ok = ~((xs @ Hd.T) % 2).any(axis=1) & ((xs @ Ld.T) % 2).any(axis=1)
    return int(xs[ok].sum(axis=1).min())
