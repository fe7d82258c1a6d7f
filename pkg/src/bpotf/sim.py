"""Monte Carlo estimation of logical error rates and decoder timing.

Shot ``i`` of a run seeded with ``seed`` draws its error from a generator
keyed by ``(seed, i)``, so every pipeline sees the same shots and results do
not depend on how shots are split between worker processes.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .dem import DetectorModel
from .gf2 import matvec_mod2
from .pipelines import PipelineConfig, identity_transfer, predicted_observables, run_pipeline
from .sparsify import TransferMatrix

Z95 = 1.959963984540054

CSV_COLUMNS = ("p", "d", "rounds", "shots", "failures", "ler_total", "ler_per_round",
               "ci_low", "ci_high", "mean_time_per_round_ns")


@dataclass(frozen=True)
class MonteCarloConfig:
    shots: int
    seed: int = 0
    rounds: int = 1
    physical_p: float | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")


class LogHistogram:
    """Histogram of durations with geometrically widening bins.

    Bin ``k`` spans ``[lo * r**k, lo * r**(k+1))`` with ``r = 10 **
    (1 / bins_per_decade)``; two extra bins catch under- and overflow.
    """

    def __init__(self, lo: float = 1e-7, hi: float = 1e2, bins_per_decade: int = 8):
        decades = math.log10(hi / lo)
        nbins = int(round(decades * bins_per_decade))
        self.edges = lo * 10.0 ** (np.arange(nbins + 1) / bins_per_decade)
        self.counts = np.zeros(nbins + 2, dtype=np.int64)
        self.total = 0.0
        self.n = 0

    def add(self, t: float) -> None:
        self.counts[np.searchsorted(self.edges, t, side="right")] += 1
        self.total += t
        self.n += 1

    def merge(self, other: "LogHistogram") -> None:
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("histograms have different bins")
        self.counts += other.counts
        self.total += other.total
        self.n += other.n

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else float("nan")

    def to_json(self) -> dict:
        return {"edges_s": self.edges.tolist(), "counts": self.counts.tolist(),
                "mean_s": self.mean, "n": self.n}


def wilson_interval(failures: int, shots: int, z: float = Z95) -> tuple[float, float]:
    if shots <= 0:
        return 0.0, 1.0
    p = failures / shots
    denom = 1 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots))
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == shots else min(1.0, centre + half)
    return lo, hi


def likelihood_ratio_interval(failures: int, shots: int,
                              ratio: float = 1000.0) -> tuple[float, float]:
    """Rates whose binomial likelihood is within ``ratio`` of the maximum."""
    k, n = failures, shots
    drop = math.log(ratio)

    def loglik(p):
        out = 0.0
        if k:
            out += k * math.log(p)
        if n - k:
            out += (n - k) * math.log1p(-p)
        return out

    p_hat = k / n
    top = loglik(p_hat) if 0 < p_hat < 1 else 0.0
    f = lambda p: top - loglik(p) - drop  # noqa: E731
    eps = 1e-300
    lo = 0.0 if k == 0 else brentq(f, eps, p_hat)
    hi = 1.0 if k == n else brentq(f, p_hat if k else eps, 1 - 1e-16)
    return lo, hi


def per_round_rate(ler_total: float, rounds: int) -> float:
    """Per-cycle failure rate ``1 - (1 - ler_total) ** (1 / rounds)``."""
    if ler_total <= 0:
        return 0.0
    if ler_total >= 1:
        return 1.0
    return float(-math.expm1(math.log1p(-ler_total) / rounds))


@dataclass
class MonteCarloStats:
    failures: int
    shots: int
    rounds: int
    ler_total: float
    ler_per_round: float
    ci_low: float
    ci_high: float
    lr_low: float | None
    lr_high: float | None
    timing: LogHistogram
    non_converged: int = 0
    stage_counts: dict = field(default_factory=dict)

    @property
    def mean_time_per_round(self) -> float:
        return self.timing.mean / self.rounds

    def to_json(self) -> dict:
        return {
            "failures": self.failures, "shots": self.shots, "rounds": self.rounds,
            "ler_total": self.ler_total, "ler_per_round": self.ler_per_round,
            "ler_per_round_formula": "1 - (1 - ler_total) ** (1 / rounds)",
            "ci_low": self.ci_low, "ci_high": self.ci_high, "ci_method": "wilson-95",
            "lr_low": self.lr_low, "lr_high": self.lr_high,
            "non_converged": self.non_converged, "stage_counts": self.stage_counts,
            "timing": self.timing.to_json() if self.timing.n else None,
        }


def shot_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_error(model: DetectorModel, rng: np.random.Generator):
    """Flip every column independently with its prior; return ``(e, s, obs)``."""
    e = (rng.random(model.num_columns) < model.priors).astype(np.uint8)
    return e, matvec_mod2(model.H, e), matvec_mod2(model.O, e)


def _run_shots(dem, sdem, T, pipeline, seed, start, stop, record_timing):
    hist = LogHistogram()
    failures = 0
    non_converged = 0
    stages: dict[str, int] = {}
    for i in range(start, stop):
        e, s, obs = sample_error(dem, shot_rng(seed, i))
        t0 = time.perf_counter()
        res = run_pipeline(pipeline, dem, s, sdem, T)
        elapsed = time.perf_counter() - t0
        if record_timing:
            hist.add(res.decode_time if res.decode_time is not None else elapsed)
        stages[res.stage] = stages.get(res.stage, 0) + 1
        if not res.converged:
            non_converged += 1
            failures += 1
        elif np.any(predicted_observables(res, dem, sdem) != obs):
            failures += 1
    return failures, non_converged, stages, hist


def run_montecarlo(model: DetectorModel, cfg: MonteCarloConfig,
                   sdem: DetectorModel | None = None, transfer: TransferMatrix | None = None,
                   workers: int = 1, record_timing: bool = True) -> MonteCarloStats:
    """Sample, decode and compare logical observables for ``cfg.shots`` shots.

    A shot fails when the decoder does not reproduce the syndrome or when the
    observables of its estimate differ from those of the sampled error.
    """
    if sdem is None:
        sdem, transfer = model, identity_transfer(model)
    elif transfer is None:
        raise ValueError("a sparsified model needs a transfer matrix")
    workers = max(1, int(workers))
    bounds = np.linspace(0, cfg.shots, workers + 1).astype(int)
    jobs = [(model, sdem, transfer, cfg.pipeline, cfg.seed, int(a), int(b), record_timing)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        parts = [_run_shots(*job) for job in jobs]
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_run_shots, *zip(*jobs)))
    failures = sum(p[0] for p in parts)
    non_converged = sum(p[1] for p in parts)
    stages: dict[str, int] = {}
    hist = LogHistogram()
    for p in parts:
        for k, v in p[2].items():
            stages[k] = stages.get(k, 0) + v
        hist.merge(p[3])
    ler = failures / cfg.shots
    lo, hi = wilson_interval(failures, cfg.shots)
    lr = likelihood_ratio_interval(failures, cfg.shots) if cfg.shots >= 100 else (None, None)
    return MonteCarloStats(failures=failures, shots=cfg.shots, rounds=cfg.rounds, ler_total=ler,
                           ler_per_round=per_round_rate(ler, cfg.rounds), ci_low=lo, ci_high=hi,
                           lr_low=lr[0], lr_high=lr[1], timing=hist,
                           non_converged=non_converged, stage_counts=dict(sorted(stages.items())))


def bench_decoders(models: Mapping[str, DetectorModel | tuple], pipelines: Mapping[str, PipelineConfig],
                   shots: int, seed: int = 0, rounds: Mapping[str, int] | None = None) -> list[dict]:
    """Time every pipeline on every model with identical shot streams.

    ``models`` maps a name to a model or to a ``(dem, sdem, transfer)``
    triple. Each report entry carries the mean time per syndrome round and
    the log-binned time distribution.
    """
    report = []
    for mname, entry in models.items():
        dem, sdem, T = entry if isinstance(entry, tuple) else (entry, None, None)
        r = (rounds or {}).get(mname, 1)
        for pname, pcfg in pipelines.items():
            stats = run_montecarlo(dem, MonteCarloConfig(shots=shots, seed=seed, rounds=r,
                                                         pipeline=pcfg), sdem, T)
            report.append({
                "model": mname, "pipeline": pname, "shots": shots, "rounds": r,
                "failures": stats.failures,
                "mean_time_s": stats.timing.mean,
                "mean_time_per_round_s": stats.mean_time_per_round,
                "histogram": stats.timing.to_json(),
            })
    return report


def stats_row(p: float | None, d: int | None, stats: MonteCarloStats,
              with_timing: bool) -> dict:
    return {
        "p": p, "d": d, "rounds": stats.rounds, "shots": stats.shots,
        "failures": stats.failures, "ler_total": stats.ler_total,
        "ler_per_round": stats.ler_per_round, "ci_low": stats.ci_low, "ci_high": stats.ci_high,
        "mean_time_per_round_ns": (stats.mean_time_per_round * 1e9) if with_timing else "",
    }
