"""Composed decoders built from BP, OTF, OSD-0 and the sparsified model.

Every pipeline returns at the first stage whose estimate reproduces the
syndrome. The result's ``space`` tells whether the estimate indexes the
columns of the full model (``"dem"``) or of the sparsified one (``"sdem"``).
"""

from __future__ import annotations

import time
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace

import numpy as np

from .bp import BpConfig, DecodeResult, bp_decode, bp_decode_matrix, posteriors_to_order
from .dem import DetectorModel
from .gf2 import SparseBinaryMatrix, as_bits, matvec_mod2, solve_on_columns
from .otf import VirtualCheckPolicy, otf_decode
from .sparsify import TransferMatrix, map_soft_info

PIPELINES = ("bp", "bp-otf", "bp-osd0", "bp-bp", "bp-bp-otf", "bp-bp-osd0", "ensemble")

# 22 members: 17, 34, ..., 374 (the end point 391 is excluded)
BB_ENSEMBLE_STAGE1_ITERS = tuple(range(17, 391, 17))


@dataclass(frozen=True)
class PipelineConfig:
    """Per-stage BP settings and post-processing options.

    ``stage1`` runs on the full model, ``stage2`` on the sparsified model and
    ``stage3`` on the ordered Tanner forest (or is unused for OSD-0). The
    forest stage defaults to unnormalized min-sum: a scale below one shrinks
    the hard syndrome constraints geometrically along long tree paths until
    priors outvote them, and the estimate then misses the syndrome.
    """

    kind: str = "bp-bp-otf"
    stage1: BpConfig = field(default_factory=lambda: BpConfig(max_iters=100))
    stage2: BpConfig = field(default_factory=lambda: BpConfig(max_iters=100))
    stage3: BpConfig = field(default_factory=lambda: BpConfig(max_iters=100, min_sum_scale=1.0))
    decimation: float = 0.0
    ensemble_stage1_iters: tuple[int, ...] | None = None
    virtual_checks: VirtualCheckPolicy = "per-component"

    def __post_init__(self):
        if self.kind not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.kind!r}; expected one of {PIPELINES}")
        if self.decimation < 0:
            raise ValueError("decimation must be non-negative")
        if self.ensemble_stage1_iters is not None:
            iters = tuple(int(k) for k in self.ensemble_stage1_iters)
            if not iters or min(iters) < 1:
                raise ValueError("ensemble iteration counts must be positive")
            object.__setattr__(self, "ensemble_stage1_iters", iters)
        if self.kind == "ensemble" and not self.ensemble_stage1_iters:
            raise ValueError("an ensemble needs stage-1 iteration counts")

    def members(self) -> list["PipelineConfig"]:
        """One BP+BP+OTF configuration per stage-1 iteration count."""
        return [replace(self, kind="bp-bp-otf", ensemble_stage1_iters=None,
                        stage1=self.stage1.replace(max_iters=k))
                for k in self.ensemble_stage1_iters or ()]


def _min_sum(iters: int) -> BpConfig:
    return BpConfig(variant="min-sum", max_iters=iters)


def _forest_min_sum(iters: int) -> BpConfig:
    return BpConfig(variant="min-sum", max_iters=iters, min_sum_scale=1.0)


def surface_code_config() -> PipelineConfig:
    """BP+BP+OTF with 6, 51 and 50 iterations and full decimation."""
    return PipelineConfig("bp-bp-otf", _min_sum(6), _min_sum(51), _forest_min_sum(50), decimation=0.0)


def bivariate_bicycle_ensemble_config() -> PipelineConfig:
    """22-member ensemble, stage-1 iterations ``range(17, 391, 17)``, later stages capped at 113."""
    return PipelineConfig("ensemble", _min_sum(BB_ENSEMBLE_STAGE1_ITERS[0]), _min_sum(113),
                          _forest_min_sum(113), decimation=1e-9,
                          ensemble_stage1_iters=BB_ENSEMBLE_STAGE1_ITERS)


def bivariate_bicycle_single_config() -> PipelineConfig:
    """Single BP+BP+OTF decoder for codes with little degeneracy: 300/113/113."""
    return PipelineConfig("bp-bp-otf", _min_sum(300), _min_sum(113), _forest_min_sum(113),
                          decimation=1e-9)


def bp_osd0_config(iters: int = 10_000) -> PipelineConfig:
    """BP+OSD-0; 10,000 iterations for bivariate bicycle codes, 70 for surface codes."""
    return PipelineConfig("bp-osd0", _min_sum(iters))


def bp_bp_osd0_config() -> PipelineConfig:
    """1,000 iterations on the full model, 9,000 on the sparsified one, then OSD-0."""
    return PipelineConfig("bp-bp-osd0", _min_sum(1000), _min_sum(9000))


def identity_transfer(model: DetectorModel) -> TransferMatrix:
    """Transfer matrix of a model onto itself."""
    A = SparseBinaryMatrix.identity(model.num_columns)
    return TransferMatrix(A, model, model, {"identity": True})


def osd0_decode(model: DetectorModel | SparseBinaryMatrix, syndrome, posteriors) -> DecodeResult:
    """Order-0 ordered statistics decoding.

    Columns are ranked from most to least likely in error and the first
    linearly independent set in that order is used as information set; the
    estimate is the unique solution supported on it.
    """
    H = model.H if isinstance(model, DetectorModel) else model
    syndrome = as_bits(syndrome, H.num_rows)
    posteriors = np.asarray(posteriors, dtype=np.float64)
    order = posteriors_to_order(posteriors)
    estimate = np.zeros(H.num_cols, dtype=np.uint8)
    x = solve_on_columns(H.dense[:, order], syndrome)
    converged = x is not None
    if converged:
        estimate[order] = x
    return DecodeResult(estimate=estimate, converged=converged, iterations_used=0,
                        posteriors=posteriors, stage="osd0")


def _stage(res: DecodeResult, stage: str, space: str, iters: int) -> DecodeResult:
    res.stage = stage
    res.space = space
    res.iterations_used = iters
    return res


def bp_otf_decode(model: DetectorModel, syndrome, cfg: PipelineConfig) -> DecodeResult:
    """BP on the model, then OTF post-processing on the same model."""
    first = bp_decode(model, syndrome, cfg=cfg.stage1)
    if first.converged:
        return _stage(first, "dem", "dem", first.iterations_used)
    res = otf_decode(model, first.posteriors, syndrome, cfg.decimation, cfg.stage3,
                     cfg.virtual_checks)
    return _stage(res, "otf", "dem", first.iterations_used + res.iterations_used)


def bp_osd0_decode(model: DetectorModel, syndrome, cfg: PipelineConfig) -> DecodeResult:
    first = bp_decode(model, syndrome, cfg=cfg.stage1)
    if first.converged:
        return _stage(first, "dem", "dem", first.iterations_used)
    res = osd0_decode(model, syndrome, first.posteriors)
    return _stage(res, "osd0", "dem", first.iterations_used)


def _two_stage(dem, sdem, T, syndrome, cfg):
    if T.A.shape != (sdem.num_columns, dem.num_columns):
        raise ValueError("transfer matrix does not match the model pair")
    first = bp_decode(dem, syndrome, cfg=cfg.stage1)
    if first.converged:
        return first, None
    mapped = map_soft_info(first.posteriors, T)
    second = bp_decode_matrix(sdem.H, syndrome, mapped, cfg.stage2)
    return first, second


def bp_bp_decode(dem: DetectorModel, sdem: DetectorModel, T: TransferMatrix, syndrome,
                 cfg: PipelineConfig) -> DecodeResult:
    """BP on the full model, then BP on the sparsified model with mapped soft output."""
    first, second = _two_stage(dem, sdem, T, syndrome, cfg)
    if second is None:
        return _stage(first, "dem", "dem", first.iterations_used)
    return _stage(second, "sdem", "sdem", first.iterations_used + second.iterations_used)


def bp_bp_otf_decode(dem: DetectorModel, sdem: DetectorModel, T: TransferMatrix, syndrome,
                     cfg: PipelineConfig) -> DecodeResult:
    """BP+BP followed by OTF post-processing on the sparsified model."""
    first, second = _two_stage(dem, sdem, T, syndrome, cfg)
    if second is None:
        return _stage(first, "dem", "dem", first.iterations_used)
    used = first.iterations_used + second.iterations_used
    if second.converged:
        return _stage(second, "sdem", "sdem", used)
    third = otf_decode(sdem, second.posteriors, syndrome, cfg.decimation, cfg.stage3,
                       cfg.virtual_checks)
    return _stage(third, "otf", "sdem", used + third.iterations_used)


def bp_bp_osd0_decode(dem: DetectorModel, sdem: DetectorModel, T: TransferMatrix, syndrome,
                      cfg: PipelineConfig) -> DecodeResult:
    first, second = _two_stage(dem, sdem, T, syndrome, cfg)
    if second is None:
        return _stage(first, "dem", "dem", first.iterations_used)
    used = first.iterations_used + second.iterations_used
    if second.converged:
        return _stage(second, "sdem", "sdem", used)
    third = osd0_decode(sdem, syndrome, second.posteriors)
    return _stage(third, "osd0", "sdem", used)


def _residual_weight(res: DecodeResult, dem, sdem, syndrome) -> int:
    H = dem.H if res.space == "dem" else sdem.H
    return int(np.count_nonzero(matvec_mod2(H, res.estimate) ^ syndrome))


def _timed_member(dem, sdem, T, syndrome, member_cfg):
    start = time.perf_counter()
    res = bp_bp_otf_decode(dem, sdem, T, syndrome, member_cfg)
    res.decode_time = time.perf_counter() - start
    return res


def ensemble_decode(dem: DetectorModel, sdem: DetectorModel, T: TransferMatrix, syndrome,
                    cfg: PipelineConfig, executor: Executor | None = None) -> DecodeResult:
    """Run one BP+BP+OTF decoder per stage-1 iteration count.

    The returned result is the lowest-index member whose estimate reproduces
    the syndrome, or, if none does, the member with the lightest residual
    syndrome. Run serially, members stop at the first success and
    ``decode_time`` is that member's own time. With an ``executor`` all
    members run and ``decode_time`` is the fastest successful member's time,
    i.e. the time of the first finisher of a parallel run.
    """
    syndrome = as_bits(syndrome, dem.num_detectors)
    members = cfg.members()
    if not members:
        raise ValueError("ensemble configuration has no members")
    if executor is None:
        results = []
        for k, mcfg in enumerate(members):
            res = _timed_member(dem, sdem, T, syndrome, mcfg)
            res.member = k
            if res.converged:
                return res
            results.append(res)
    else:
        futures = [executor.submit(_timed_member, dem, sdem, T, syndrome, mcfg)
                   for mcfg in members]
        results = [f.result() for f in futures]
        for k, res in enumerate(results):
            res.member = k
        done = [r for r in results if r.converged]
        if done:
            best = done[0]
            best.decode_time = min(r.decode_time for r in done)
            return best
    weights = [_residual_weight(r, dem, sdem, syndrome) for r in results]
    best = results[int(np.argmin(weights))]
    best.decode_time = max(r.decode_time for r in results)
    return best


def run_pipeline(cfg: PipelineConfig, dem: DetectorModel, syndrome,
                 sdem: DetectorModel | None = None, T: TransferMatrix | None = None,
                 executor: Executor | None = None) -> DecodeResult:
    """Dispatch on ``cfg.kind``. Without a sparsified model, ``dem`` doubles as one."""
    if sdem is None:
        sdem = dem
        T = T or identity_transfer(dem)
    elif T is None:
        raise ValueError("a sparsified model needs a transfer matrix")
    kind = cfg.kind
    if kind == "bp":
        return bp_decode(dem, syndrome, cfg=cfg.stage1)
    if kind == "bp-otf":
        return bp_otf_decode(dem, syndrome, cfg)
    if kind == "bp-osd0":
        return bp_osd0_decode(dem, syndrome, cfg)
    if kind == "bp-bp":
        return bp_bp_decode(dem, sdem, T, syndrome, cfg)
    if kind == "bp-bp-otf":
        return bp_bp_otf_decode(dem, sdem, T, syndrome, cfg)
    if kind == "bp-bp-osd0":
        return bp_bp_osd0_decode(dem, sdem, T, syndrome, cfg)
    return ensemble_decode(dem, sdem, T, syndrome, cfg, executor)


def predicted_observables(res: DecodeResult, dem: DetectorModel,
                          sdem: DetectorModel | None = None) -> np.ndarray:
    """Logical observables implied by an estimate, in whichever space it lives."""
    model = dem if res.space == "dem" or sdem is None else sdem
    return matvec_mod2(model.O, res.estimate)
