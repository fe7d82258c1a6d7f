"""Belief propagation over Tanner graphs (product-sum and normalized min-sum)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Literal

import numba
import numpy as np
from scipy.special import expit

from .dem import CLIP_LOW, DetectorModel, clip
from .gf2 import SparseBinaryMatrix, DimensionError, as_bits

# LLR of the clipping bound; probabilities are never trusted beyond it
LLR_MAX = math.log((1.0 - CLIP_LOW) / CLIP_LOW)


@dataclass(frozen=True)
class BpConfig:
    """Settings for one BP run.

    ``llr_clamp`` bounds every message. It has to exceed ``LLR_MAX`` so that a
    check with a single unknown neighbour can overrule any clipped prior.
    ``stop_on_syndrome=False`` runs all ``max_iters`` iterations, which is
    what exact marginals on a tree need.
    """

    variant: Literal["min-sum", "product-sum"] = "min-sum"
    max_iters: int = 100
    min_sum_scale: float = 0.625
    schedule: Literal["parallel"] = "parallel"
    llr_clamp: float = 1000.0
    stop_on_syndrome: bool = True

    def __post_init__(self):
        if self.variant not in ("min-sum", "product-sum"):
            raise ValueError(f"unknown BP variant {self.variant!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.min_sum_scale <= 1.0:
            raise ValueError("min_sum_scale must lie in (0, 1]")
        if self.schedule != "parallel":
            raise ValueError("only the parallel (flooding) schedule is supported")
        if self.llr_clamp <= LLR_MAX:
            raise ValueError(f"llr_clamp must exceed {LLR_MAX:.1f}")

    def replace(self, **changes) -> "BpConfig":
        return BpConfig(**{**asdict(self), **changes})


@dataclass
class DecodeResult:
    """Outcome of a decoder call.

    ``space`` names the column space of ``estimate`` and ``posteriors``
    (``"dem"`` or ``"sdem"``); ``stage`` names the stage that produced them.
    """

    estimate: np.ndarray
    converged: bool
    iterations_used: int
    posteriors: np.ndarray
    stage: str = "dem"
    space: str = "dem"
    decode_time: float | None = None
    member: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "estimate": "".join(map(str, self.estimate.tolist())),
            "converged": bool(self.converged),
            "iterations_used": int(self.iterations_used),
            "posteriors": [float(p) for p in self.posteriors],
            "stage": self.stage,
            "space": self.space,
        }
        if self.member is not None:
            out["member"] = self.member
        if self.decode_time is not None:
            out["decode_time"] = self.decode_time
        return out


def probs_to_llr(p) -> np.ndarray:
    p = clip(p)
    with np.errstate(divide="ignore"):
        llr = np.log1p(-p) - np.log(p)
    return np.clip(llr, -LLR_MAX, LLR_MAX)


def llr_to_probs(llr) -> np.ndarray:
    return expit(-np.asarray(llr, dtype=np.float64))


@numba.njit(cache=True, nogil=True)
def _bp_kernel(col_ptr, col_idx, row_ptr, row_edges, row_cols, syndrome, prior,
               max_iters, min_sum, scale, clamp, stop, llr_out, hard_out):
    n = col_ptr.size - 1
    m = row_ptr.size - 1
    nnz = col_idx.size
    v2c = np.empty(nnz)
    c2v = np.zeros(nnz)
    for j in range(n):
        for e in range(col_ptr[j], col_ptr[j + 1]):
            v2c[e] = prior[j]
    max_deg = 1
    for i in range(m):
        max_deg = max(max_deg, row_ptr[i + 1] - row_ptr[i])
    fwd = np.empty(max_deg + 1)
    bwd = np.empty(max_deg + 1)

    converged = False
    it = 0
    while it < max_iters:
        it += 1
        # check-to-variable
        for i in range(m):
            a = row_ptr[i]
            b = row_ptr[i + 1]
            if a == b:
                continue
            sgn0 = -1.0 if syndrome[i] else 1.0
            if min_sum:
                parity = sgn0
                min1 = np.inf
                min2 = np.inf
                arg = -1
                for k in range(a, b):
                    x = v2c[row_edges[k]]
                    if x < 0:
                        parity = -parity
                        x = -x
                    if x < min1:
                        min2 = min1
                        min1 = x
                        arg = k
                    elif x < min2:
                        min2 = x
                for k in range(a, b):
                    e = row_edges[k]
                    sgn = -parity if v2c[e] < 0 else parity
                    mag = min2 if k == arg else min1
                    msg = scale * mag
                    if msg > clamp:
                        msg = clamp
                    c2v[e] = sgn * msg
            else:
                deg = b - a
                fwd[0] = 1.0
                for k in range(deg):
                    fwd[k + 1] = fwd[k] * math.tanh(0.5 * v2c[row_edges[a + k]])
                bwd[deg] = 1.0
                for k in range(deg - 1, -1, -1):
                    bwd[k] = bwd[k + 1] * math.tanh(0.5 * v2c[row_edges[a + k]])
                for k in range(deg):
                    t = sgn0 * fwd[k] * bwd[k + 1]
                    if t >= 1.0:
                        msg = clamp
                    elif t <= -1.0:
                        msg = -clamp
                    else:
                        msg = 2.0 * math.atanh(t)
                        if msg > clamp:
                            msg = clamp
                        elif msg < -clamp:
                            msg = -clamp
                    c2v[row_edges[a + k]] = msg
        # variable-to-check and hard decision
        for j in range(n):
            total = prior[j]
            for e in range(col_ptr[j], col_ptr[j + 1]):
                total += c2v[e]
            llr_out[j] = total
            hard_out[j] = 1 if total < 0 else 0
            for e in range(col_ptr[j], col_ptr[j + 1]):
                v = total - c2v[e]
                if v > clamp:
                    v = clamp
                elif v < -clamp:
                    v = -clamp
                v2c[e] = v
        ok = True
        for i in range(m):
            par = 0
            for k in range(row_ptr[i], row_ptr[i + 1]):
                par ^= hard_out[row_cols[k]]
            if par != syndrome[i]:
                ok = False
                break
        converged = ok
        if ok and stop:
            break
    return converged, it


def bp_decode_matrix(H: SparseBinaryMatrix, syndrome, priors, cfg: BpConfig | None = None,
                     prior_llr: np.ndarray | None = None) -> DecodeResult:
    """Run BP on parity-check matrix ``H``; see :func:`bp_decode`."""
    cfg = cfg or BpConfig()
    syndrome = as_bits(syndrome, H.num_rows)
    if prior_llr is None:
        priors = np.asarray(priors, dtype=np.float64)
        if priors.shape != (H.num_cols,):
            raise DimensionError(f"expected {H.num_cols} priors, got {priors.shape}")
        prior_llr = probs_to_llr(priors)
    llr = np.empty(H.num_cols)
    hard = np.zeros(H.num_cols, dtype=np.uint8)
    row_edges = H.row_to_col_entry
    converged, iters = _bp_kernel(
        H.col_ptr, H.col_idx, H.row_ptr, row_edges, H.row_idx, syndrome,
        np.ascontiguousarray(prior_llr, dtype=np.float64), int(cfg.max_iters),
        cfg.variant == "min-sum", float(cfg.min_sum_scale), float(cfg.llr_clamp),
        bool(cfg.stop_on_syndrome), llr, hard)
    return DecodeResult(estimate=hard, converged=bool(converged), iterations_used=int(iters),
                        posteriors=llr_to_probs(llr), stage="bp")


def bp_decode(model: DetectorModel | SparseBinaryMatrix, syndrome, priors=None,
              cfg: BpConfig | None = None) -> DecodeResult:
    """Decode ``syndrome`` with belief propagation on a flooding schedule.

    Messages are log-likelihood ratios with prior ``log((1 - p) / p)``. After
    every iteration the hard decision (1 iff the posterior LLR is negative)
    is checked against the syndrome. Posteriors are returned as
    probabilities whether or not BP converged.
    """
    if isinstance(model, DetectorModel):
        H = model.H
        if priors is None:
            priors = model.priors
    else:
        H = model
        if priors is None:
            raise ValueError("priors are required when decoding a bare matrix")
    res = bp_decode_matrix(H, syndrome, priors, cfg)
    res.stage = "dem"
    return res


def posteriors_to_order(p) -> np.ndarray:
    """Column indices from most to least likely in error, ties by index."""
    p = np.asarray(p, dtype=np.float64)
    return np.argsort(-p, kind="stable")
