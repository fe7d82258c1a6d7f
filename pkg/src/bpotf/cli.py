"""Command line entry point: ``decode``, ``sparsify`` and ``simulate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .bp import BpConfig
from .codes import build_repetition_code, build_rotated_surface_code
from .dem import build_code_capacity_model, build_phenomenological_model, load_model
from .pipelines import BB_ENSEMBLE_STAGE1_ITERS, PIPELINES, PipelineConfig, identity_transfer, run_pipeline
from .sim import CSV_COLUMNS, MonteCarloConfig, run_montecarlo, stats_row
from .sparsify import SparsifyConfig, TransferMatrix, build_transfer_matrix


def _read_syndrome(arg: str, num_detectors: int) -> np.ndarray:
    text = Path(arg).read_text() if Path(arg).is_file() else arg
    bits = "".join(ch for ch in text if not ch.isspace() and ch != ",")
    if not bits or set(bits) - {"0", "1"}:
        raise SystemExit("syndrome must be a string of 0/1 characters or a file holding one")
    if len(bits) != num_detectors:
        raise SystemExit(f"syndrome has {len(bits)} bits, model has {num_detectors} detectors")
    return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")


def _pipeline_from_args(args) -> PipelineConfig:
    def stage(iters, scale=args.scale):
        return BpConfig(variant=args.variant, max_iters=iters, min_sum_scale=scale)

    default = args.max_iters
    kind = args.pipeline
    if kind == "bp" and args.post != "none":
        kind = {"otf": "bp-otf", "osd0": "bp-osd0"}[args.post]
    ensemble = None
    if kind == "ensemble":
        ensemble = BB_ENSEMBLE_STAGE1_ITERS if args.ensemble is None else tuple(args.ensemble)
    return PipelineConfig(
        kind,
        stage(args.iters1 or default),
        stage(args.iters2 or default),
        stage(args.iters3 or default, args.scale3),
        decimation=args.decimation,
        ensemble_stage1_iters=ensemble,
        virtual_checks="per-component" if args.virtual_checks == "auto" else "none",
    )


def _sparsified(args, dem):
    if args.sdem is None:
        return None, None
    sdem = load_model(args.sdem)
    if args.transfer is not None:
        T = TransferMatrix.load(args.transfer, dem, sdem)
    else:
        T = build_transfer_matrix(dem, sdem, SparsifyConfig(w_max=args.wmax))
    return sdem, T


def cmd_decode(args) -> int:
    dem = load_model(args.model)
    syndrome = _read_syndrome(args.syndrome, dem.num_detectors)
    sdem, T = _sparsified(args, dem)
    res = run_pipeline(_pipeline_from_args(args), dem, syndrome, sdem, T)
    out = res.to_json()
    out["pipeline"] = args.pipeline if args.post == "none" else f"{args.pipeline}+{args.post}"
    print(json.dumps(out))
    return 0


def cmd_sparsify(args) -> int:
    dem = load_model(args.dem)
    sdem = load_model(args.sdem)
    T = build_transfer_matrix(dem, sdem, SparsifyConfig(w_max=args.wmax))
    T.save(args.out)
    print(json.dumps({"out": str(args.out), **T.metadata}))
    return 0


def _build_model(args, p: float):
    if args.model is not None:
        return load_model(args.model), None, args.rounds or 1
    if args.distance is None:
        raise SystemExit("simulate needs --model or --code with -d")
    d = args.distance
    if args.code == "repetition":
        H, L = build_repetition_code(d)
    else:
        _, H, _, L = build_rotated_surface_code(d)
    if args.noise == "code-capacity":
        return build_code_capacity_model(H, L, p), d, args.rounds or 1
    rounds = args.rounds or d
    return build_phenomenological_model(H, p, p, rounds, L), d, rounds


def cmd_simulate(args) -> int:
    ps = args.p if args.p else [None]
    if args.model is None and ps == [None]:
        raise SystemExit("simulate with --code needs -p")
    rows, full = [], []
    for p in ps:
        dem, d, rounds = _build_model(args, p)
        sdem, T = _sparsified(args, dem)
        if sdem is None:
            sdem, T = dem, identity_transfer(dem)
        cfg = MonteCarloConfig(shots=args.shots, seed=args.seed, rounds=rounds, physical_p=p,
                               pipeline=_pipeline_from_args(args))
        stats = run_montecarlo(dem, cfg, sdem, T, workers=args.workers,
                               record_timing=args.timing)
        rows.append(stats_row(p, d, stats, args.timing))
        full.append({"p": p, "d": d, "pipeline": args.pipeline, "seed": args.seed,
                     **stats.to_json()})
    if args.out is None or str(args.out).endswith(".csv"):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
        text = buf.getvalue()
    else:
        text = json.dumps(full if len(full) > 1 else full[0], indent=2)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def _add_decoder_args(p: argparse.ArgumentParser, default_pipeline: str) -> None:
    p.add_argument("--pipeline", choices=PIPELINES, default=default_pipeline)
    p.add_argument("--post", choices=("none", "otf", "osd0"), default="none",
                   help="post-processing after plain BP (with --pipeline bp)")
    p.add_argument("--variant", choices=("min-sum", "product-sum"), default="min-sum")
    p.add_argument("--max-iters", type=int, default=100,
                   help="iteration cap for every stage without its own --itersN")
    p.add_argument("--scale", type=float, default=0.625,
                   help="min-sum scaling factor of the BP stages")
    p.add_argument("--scale3", type=float, default=1.0,
                   help="min-sum scaling factor of the forest stage")
    p.add_argument("--iters1", type=int)
    p.add_argument("--iters2", type=int)
    p.add_argument("--iters3", type=int)
    p.add_argument("--ensemble", type=int, nargs="+",
                   help="stage-1 iteration counts of the ensemble members")
    p.add_argument("--decimation", type=float, default=0.0)
    p.add_argument("--virtual-checks", choices=("auto", "off"), default="auto")
    p.add_argument("--sdem", help="sparsified model for the bp-bp pipelines")
    p.add_argument("--transfer", help="transfer matrix JSON (built on the fly if absent)")
    p.add_argument("--wmax", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpotf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser("decode", help="decode one syndrome and print the result as JSON")
    dec.add_argument("--model", required=True)
    dec.add_argument("--syndrome", required=True, help="0/1 string or a file holding one")
    _add_decoder_args(dec, "bp")
    dec.set_defaults(func=cmd_decode)

    spa = sub.add_parser("sparsify", help="build the transfer matrix between two models")
    spa.add_argument("--dem", required=True)
    spa.add_argument("--sdem", required=True)
    spa.add_argument("--wmax", type=int, default=4)
    spa.add_argument("--out", required=True)
    spa.set_defaults(func=cmd_sparsify)

    sim = sub.add_parser("simulate", help="Monte Carlo logical error rate estimate")
    sim.add_argument("--model")
    sim.add_argument("--code", choices=("repetition", "rotated-surface"), default="repetition")
    sim.add_argument("-d", dest="distance", type=int)
    sim.add_argument("--noise", choices=("code-capacity", "phenomenological"),
                     default="code-capacity")
    sim.add_argument("-p", type=float, nargs="+")
    sim.add_argument("--rounds", type=int)
    sim.add_argument("--shots", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="results.csv or results.json (CSV on stdout if absent)")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--timing", action="store_true",
                     help="fill mean_time_per_round_ns (wall-clock, not reproducible)")
    _add_decoder_args(sim, "bp-otf")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
