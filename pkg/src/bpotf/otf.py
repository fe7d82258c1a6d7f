"""Ordered Tanner forests: union-find over checks and the OTF decoding stage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .bp import BpConfig, DecodeResult, bp_decode_matrix, posteriors_to_order, probs_to_llr
from .dem import DetectorModel, clip
from .gf2 import SparseBinaryMatrix, as_bits, matvec_mod2

VirtualCheckPolicy = Literal["none", "per-component"]


@numba.njit(cache=True, nogil=True)
def _find(root, i):
    while root[i] != i:
        i = root[i]
    return i


@numba.njit(cache=True, nogil=True)
def _try_add(root, depth, rows, scratch):
    """Merge the trees holding ``rows`` unless two of them already share one."""
    w = rows.size
    for k in range(w):
        r = _find(root, rows[k])
        for q in range(k):
            if scratch[q] == r:
                return False
        scratch[k] = r
    best = scratch[0]
    for k in range(1, w):
        r = scratch[k]
        if depth[r] > depth[best] or (depth[r] == depth[best] and r < best):
            best = r
    ties = 0
    for k in range(w):
        if depth[scratch[k]] == depth[best]:
            ties += 1
    for k in range(w):
        r = scratch[k]
        if r != best:
            root[r] = best
    if ties > 1:
        depth[best] += 1
    return True


@numba.njit(cache=True, nogil=True)
def _kruskal(col_ptr, col_idx, order, root, depth, keep):
    max_w = 1
    for j in range(col_ptr.size - 1):
        max_w = max(max_w, col_ptr[j + 1] - col_ptr[j])
    scratch = np.empty(max_w, dtype=np.int64)
    count = 0
    for j in order:
        a = col_ptr[j]
        b = col_ptr[j + 1]
        if a == b:
            continue
        if _try_add(root, depth, col_idx[a:b], scratch):
            keep[count] = j
            count += 1
    return count


class UnionFindForest:
    """Union-find over check nodes with union by depth and no path compression.

    ``root[i]`` is the parent link of node ``i`` and ``depth[i]`` the depth
    recorded for it while it was a root.
    """

    def __init__(self, size: int):
        self.root = np.arange(size, dtype=np.int64)
        self.depth = np.ones(size, dtype=np.int64)
        self._scratch = np.empty(max(size, 1), dtype=np.int64)

    @property
    def size(self) -> int:
        return self.root.size

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.root.tolist(), self.depth.tolist()))

    def find(self, i: int) -> int:
        if not 0 <= i < self.size:
            raise ValueError(f"node {i} out of range for forest of size {self.size}")
        return int(_find(self.root, i))

    def try_add_column(self, check_rows: Iterable[int]) -> bool:
        """Add a column touching ``check_rows`` if that closes no loop.

        All trees are merged under the deepest root (lowest index among equal
        depths, whose depth then grows by one). Returns whether the column
        was accepted; a rejected column leaves the forest untouched.
        """
        rows = np.asarray(sorted(set(int(r) for r in check_rows)), dtype=np.int64)
        if rows.size == 0:
            raise ValueError("a column must touch at least one check")
        if rows[0] < 0 or rows[-1] >= self.size:
            raise ValueError("check index out of range")
        return bool(_try_add(self.root, self.depth, rows, self._scratch))

    def max_depth(self) -> int:
        return int(self.depth[self.root == np.arange(self.size)].max()) if self.size else 0


@dataclass(frozen=True)
class OtfSelection:
    """Columns kept in the ordered Tanner forest.

    ``virtual_checks`` are the synthetic row indices (numbered after the real
    rows) that took part in the forest construction.
    """

    kept_cols: np.ndarray
    virtual_checks: np.ndarray
    augmented: SparseBinaryMatrix

    def __len__(self) -> int:
        return int(self.kept_cols.size)


def augment_with_virtual_checks(H: SparseBinaryMatrix) -> tuple[SparseBinaryMatrix, np.ndarray]:
    """Add one synthetic row per connected component holding weight-1 columns.

    The new row of a component is adjacent to every weight-1 column of that
    component. Returns the augmented matrix and the synthetic row indices.
    """
    m = H.num_rows
    weights = H.col_weights
    single = np.flatnonzero(weights == 1)
    if single.size == 0:
        return H, np.zeros(0, dtype=np.int64)
    labels = H.check_components[H.col_idx[H.col_ptr[single]]]
    used, vrow = np.unique(labels, return_inverse=True)
    virtual_rows = m + np.arange(used.size, dtype=np.int64)
    new_weights = weights.copy()
    new_weights[single] = 2
    ptr = np.zeros(H.num_cols + 1, dtype=np.int64)
    np.cumsum(new_weights, out=ptr[1:])
    idx = np.empty(ptr[-1], dtype=np.int64)
    # copy original supports, then append the virtual row after each single
    dest = np.arange(H.nnz) + np.repeat(ptr[:-1] - H.col_ptr[:-1], weights)
    idx[dest] = H.col_idx
    idx[ptr[single] + 1] = m + vrow
    aug = SparseBinaryMatrix._from_csc(m + used.size, H.num_cols, ptr, idx)
    return aug, virtual_rows


_AUGMENTED_CACHE_ATTR = "_otf_augmented"


def _augmented(H: SparseBinaryMatrix):
    cached = H.__dict__.get(_AUGMENTED_CACHE_ATTR)
    if cached is None:
        cached = augment_with_virtual_checks(H)
        H.__dict__[_AUGMENTED_CACHE_ATTR] = cached
    return cached


def build_otf(H: SparseBinaryMatrix, order, virtual_check_policy: VirtualCheckPolicy = "per-component"
              ) -> OtfSelection:
    """Scan columns in ``order`` and keep those that close no loop.

    Columns of weight zero carry no syndrome information and are skipped.
    With ``virtual_check_policy="per-component"`` the scan runs on the
    matrix augmented by :func:`augment_with_virtual_checks`.
    """
    order = np.ascontiguousarray(order, dtype=np.int64)
    if order.size != H.num_cols or (order.size and not np.array_equal(
            np.sort(order), np.arange(H.num_cols))):
        raise ValueError("order must be a permutation of the column indices")
    if virtual_check_policy == "per-component":
        aug, virtual = _augmented(H)
    elif virtual_check_policy == "none":
        aug, virtual = H, np.zeros(0, dtype=np.int64)
    else:
        raise ValueError(f"unknown virtual check policy {virtual_check_policy!r}")
    size = aug.num_rows
    root = np.arange(size, dtype=np.int64)
    depth = np.ones(size, dtype=np.int64)
    keep = np.empty(H.num_cols, dtype=np.int64)
    count = _kruskal(aug.col_ptr, aug.col_idx, order, root, depth, keep)
    return OtfSelection(kept_cols=keep[:count].copy(), virtual_checks=virtual, augmented=aug)


def is_forest(H: SparseBinaryMatrix, cols) -> bool:
    """Whether the Tanner graph of ``H[:, cols]`` has no cycle."""
    sub = H.select_columns(cols)
    m, n = sub.shape
    touched = np.unique(sub.col_idx)
    vertices = touched.size + n
    edges = sub.nnz
    if vertices == 0:
        return True
    colv = np.repeat(np.arange(n), sub.col_weights) + m
    adj = sp.coo_matrix((np.ones(edges), (sub.col_idx, colv)), shape=(m + n, m + n))
    ncomp, labels = connected_components(adj, directed=False)
    # untouched rows are isolated vertices and are not part of the forest
    comps = ncomp - (m - touched.size)
    return vertices - edges == comps


def otf_decode(model: DetectorModel | SparseBinaryMatrix, posteriors, syndrome,
               decimation: float = 0.0, cfg: BpConfig | None = None,
               virtual_check_policy: VirtualCheckPolicy = "per-component") -> DecodeResult:
    """Decode on the ordered Tanner forest grown from ``posteriors``.

    With ``decimation == 0`` BP runs on the kept columns only, with at least
    as many iterations as kept columns, and the estimate is zero elsewhere.
    Otherwise BP runs on the whole matrix with every non-kept column's prior
    set to ``decimation``. The default BP configuration is unnormalized
    min-sum.
    """
    cfg = cfg or BpConfig(min_sum_scale=1.0)
    H = model.H if isinstance(model, DetectorModel) else model
    if decimation < 0:
        raise ValueError("decimation must be non-negative")
    syndrome = as_bits(syndrome, H.num_rows)
    posteriors = clip(posteriors)
    order = posteriors_to_order(posteriors)
    sel = build_otf(H, order, virtual_check_policy)
    kept = sel.kept_cols
    estimate = np.zeros(H.num_cols, dtype=np.uint8)
    post = posteriors.copy()
    if decimation == 0:
        sub = H.select_columns(kept)
        run_cfg = cfg.replace(max_iters=max(cfg.max_iters, int(kept.size), 1))
        res = bp_decode_matrix(sub, syndrome, posteriors[kept], run_cfg)
        estimate[kept] = res.estimate
        post[:] = 0.0
        post[kept] = res.posteriors
    else:
        priors = np.full(H.num_cols, float(decimation))
        priors[kept] = posteriors[kept]
        res = bp_decode_matrix(H, syndrome, priors, cfg)
        estimate = res.estimate
        post = res.posteriors
    converged = bool(np.array_equal(matvec_mod2(H, estimate), syndrome))
    return DecodeResult(estimate=estimate, converged=converged,
                        iterations_used=res.iterations_used, posteriors=post, stage="otf",
                        extra={"kept_cols": int(kept.size)})
