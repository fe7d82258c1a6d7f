"""Transfer matrices between a detector model and a sparsified model.

Every column of the full model is written as a small XOR combination of
columns of the sparsified model with the same logical action. The transfer
matrix then carries BP soft output from the full model onto the sparsified
one through the piling-up rule.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dem import DetectorModel, clip
from .gf2 import SparseBinaryMatrix, DimensionError, as_bits, matmul_mod2


class DecompositionError(RuntimeError):
    """No decomposition within the allowed weight was found."""

    def __init__(self, columns, w_max: int):
        self.columns = list(columns)
        shown = ", ".join(map(str, self.columns[:20]))
        more = "" if len(self.columns) <= 20 else f" (+{len(self.columns) - 20} more)"
        super().__init__(f"no decomposition of weight <= {w_max} for column(s) {shown}{more}")


@dataclass(frozen=True)
class SparsifyConfig:
    w_max: int = 4
    gamma: int | None = None

    def __post_init__(self):
        if self.w_max < 1:
            raise ValueError("w_max must be at least 1")
        if self.gamma is not None and self.gamma < 1:
            raise ValueError("gamma must be at least 1")


@dataclass(frozen=True)
class TransferMatrix:
    """``A`` (``n_s x n``) with ``H_sdem @ A == H_dem`` and ``O_sdem @ A == O_dem``."""

    A: SparseBinaryMatrix
    source: DetectorModel
    target: DetectorModel
    metadata: dict

    def to_json(self) -> dict:
        return {
            "num_dem_columns": self.A.num_cols,
            "num_sdem_columns": self.A.num_rows,
            "columns": self.A.col_support,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, data: dict, dem: DetectorModel, sdem: DetectorModel) -> "TransferMatrix":
        A = SparseBinaryMatrix(int(data["num_sdem_columns"]), int(data["num_dem_columns"]),
                               data["columns"])
        T = cls(A, dem, sdem, dict(data.get("metadata", {})))
        check_transfer(T)
        return T

    @classmethod
    def load(cls, path: str | Path, dem: DetectorModel, sdem: DetectorModel) -> "TransferMatrix":
        return cls.from_json(json.loads(Path(path).read_text()), dem, sdem)


def _mask(indices) -> int:
    out = 0
    for i in indices:
        out |= 1 << int(i)
    return out


class _ColumnIndex:
    """Bitmask view of the sparsified model used by the exhaustive search."""

    def __init__(self, sdem: DetectorModel):
        self.sdem = sdem
        self.det = [_mask(sdem.H.col(j)) for j in range(sdem.num_columns)]
        self.obs = [_mask(sdem.O.col(j)) for j in range(sdem.num_columns)]

    def candidates(self, rows) -> list[int]:
        """sdem columns sharing at least one non-zero row with ``rows``, ascending."""
        H = self.sdem.H
        if len(rows) == 0:
            return []
        return np.unique(np.concatenate([H.row(int(r)) for r in rows])).tolist()

    def search(self, rows, obs_rows, w_max: int) -> list[int] | None:
        target_det = _mask(rows)
        target_obs = _mask(obs_rows)
        if target_det == 0 and target_obs == 0:
            return []
        cand = self.candidates(rows)
        for size in range(1, min(w_max, len(cand)) + 1):
            for combo in itertools.combinations(cand, size):
                d = 0
                o = 0
                for j in combo:
                    d ^= self.det[j]
                    o ^= self.obs[j]
                if d == target_det and o == target_obs:
                    return list(combo)
        return None


def decompose_column(h, model_sdem: DetectorModel, obs_target,
                     cfg: SparsifyConfig | None = None, column: int | None = None) -> np.ndarray:
    """Minimum-weight combination of sparsified columns reproducing ``h``.

    Candidates are the sparsified columns sharing a non-zero row with ``h``.
    Combinations are tried by increasing size and, within one size, in
    lexicographic order of candidate index; the first one matching both the
    detector vector and ``obs_target`` is returned as an indicator vector.
    """
    cfg = cfg or SparsifyConfig()
    h = as_bits(h, model_sdem.num_detectors)
    obs_target = as_bits(obs_target, model_sdem.num_observables)
    found = _ColumnIndex(model_sdem).search(np.flatnonzero(h), np.flatnonzero(obs_target),
                                            cfg.w_max)
    if found is None:
        raise DecompositionError([column if column is not None else "<given>"], cfg.w_max)
    a = np.zeros(model_sdem.num_columns, dtype=np.uint8)
    a[found] = 1
    return a


def check_transfer(T: TransferMatrix) -> None:
    """Raise ``ValueError`` unless both transfer identities hold column by column."""
    dem, sdem, A = T.source, T.target, T.A
    if A.shape != (sdem.num_columns, dem.num_columns):
        raise DimensionError(f"transfer matrix shape {A.shape} does not match the models")
    if matmul_mod2(sdem.H, A) != dem.H:
        raise ValueError("H_sdem @ A differs from H_dem")
    if matmul_mod2(sdem.O, A) != dem.O:
        raise ValueError("O_sdem @ A differs from O_dem")


def build_transfer_matrix(dem: DetectorModel, sdem: DetectorModel,
                          cfg: SparsifyConfig | None = None) -> TransferMatrix:
    """Decompose every column of ``dem`` over ``sdem``.

    Raises :class:`DecompositionError` listing every column without a
    decomposition of weight at most ``cfg.w_max``.
    """
    cfg = cfg or SparsifyConfig()
    if dem.num_detectors != sdem.num_detectors:
        raise DimensionError("models have different detector counts")
    if dem.num_observables != sdem.num_observables:
        raise DimensionError("models have different observable counts")
    if cfg.gamma is not None and sdem.num_columns and sdem.H.col_weights.max() > cfg.gamma:
        raise ValueError(f"sparsified model has columns heavier than gamma={cfg.gamma}")
    index = _ColumnIndex(sdem)
    cols: list[list[int]] = []
    failed: list[int] = []
    for i in range(dem.num_columns):
        found = index.search(dem.H.col(i), dem.O.col(i), cfg.w_max)
        if found is None:
            failed.append(i)
            found = []
        cols.append(found)
    if failed:
        raise DecompositionError(failed, cfg.w_max)
    A = SparseBinaryMatrix(sdem.num_columns, dem.num_columns, cols)
    weights = A.col_weights
    meta = {
        "w_max": cfg.w_max,
        "max_column_weight": int(weights.max()) if weights.size else 0,
        "tie_break": "first minimal combination in lexicographic order of candidate index",
    }
    T = TransferMatrix(A, dem, sdem, meta)
    check_transfer(T)
    return T


def map_soft_info(p_dem, T: TransferMatrix | SparseBinaryMatrix) -> np.ndarray:
    """Sparsified-model probabilities from full-model probabilities.

    Entry ``i`` is the probability that an odd number of the full-model
    faults in row ``i`` of the transfer matrix fire,
    ``(1 - prod(1 - 2 p)) / 2``, clipped to ``[1e-80, 1 - 1e-80]``.
    """
    A = T.A if isinstance(T, TransferMatrix) else T
    p_dem = np.asarray(p_dem, dtype=np.float64)
    if p_dem.shape != (A.num_cols,):
        raise DimensionError(f"expected {A.num_cols} probabilities, got {p_dem.shape}")
    factors = 1.0 - 2.0 * p_dem[A.row_idx]
    prod = np.ones(A.num_rows)
    rows = np.repeat(np.arange(A.num_rows), A.row_weights)
    np.multiply.at(prod, rows, factors)
    return clip(0.5 * (1.0 - prod))
