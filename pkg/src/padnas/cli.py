"""Command-line entry points.

    padnas run --config cfg.json [--out DIR] [--resume DIR]
    padnas baseline --mode {random,spos,i-supernet} --config cfg.json
    padnas space --profile {basic,large} [--out FILE]
    padnas distmatrix --stage-report FILE --out FILE

Exit codes: 0 success, 2 configuration error, 3 infeasible latency band.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .evolution import InfeasibleBandError, spos_search
from .latency import load_latency_table, synth_latency_table
from .pipeline import (
    CheckpointError,
    ConfigError,
    PipelineConfig,
    _derive_seed,
    baseline_summary,
    random_search_baseline,
    run_pipeline,
)
from .pruning import LayerDistribution, distribution_matrix_csv
from .space import build_space, builtin_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _load_config(args) -> PipelineConfig:
    payload = {}
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = PipelineConfig.from_dict(payload)
    overrides = {}
    if getattr(args, "lut", None):
        overrides["lut_path"] = args.lut
    if getattr(args, "lat_min", None) is not None:
        overrides["lat_min"] = args.lat_min
    if getattr(args, "lat_max", None) is not None:
        overrides["lat_max"] = args.lat_max
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _make_oracle_for(cfg: PipelineConfig):
    from .oracle import Oracle

    space = build_space(cfg.space_profile)
    if cfg.lut_path:
        table = load_latency_table(cfg.lut_path)
    else:
        table = synth_latency_table(space, rng=_derive_seed(cfg.seed, "lut"))
    oracle = Oracle(
        space,
        table,
        backend=cfg.oracle_backend if cfg.oracle_backend != "external" else "supernet",
        seed=_derive_seed(cfg.seed, "oracle"),
        sigma0=cfg.sigma0,
        tau_decay_epochs=cfg.tau_decay_epochs,
    )
    return space, table, oracle


def cmd_run(args) -> int:
    cfg = _load_config(args)
    best, reports = run_pipeline(cfg, out_dir=args.out, resume_from=args.resume)
    for ev in best:
        print(f"{'|'.join(ev.architecture.choices)}  acc={ev.accuracy:.4f}  lat={ev.latency_ms:.2f}ms")
    print(f"completed {len(reports)} stages")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    if args.mode == "i-supernet":
        cfg = dataclasses.replace(cfg, stages=2, finetune_schedule=None)
        best, _ = run_pipeline(cfg, out_dir=args.out)
        for ev in best:
            print(
                f"{'|'.join(ev.architecture.choices)}  acc={ev.accuracy:.4f}  lat={ev.latency_ms:.2f}ms"
            )
        return EXIT_OK
    space, table, oracle = _make_oracle_for(cfg)
    if args.mode == "random":
        evals = random_search_baseline(
            space, cfg.band, oracle, n=args.n, rng=np.random.default_rng(cfg.seed)
        )
        truth = oracle.true_accuracy if oracle.backend != "external" else None
        print(json.dumps(baseline_summary(evals, truth), indent=2, sort_keys=True))
        return EXIT_OK
    # spos
    ces = dataclasses.replace(cfg.ces, seed=_derive_seed(cfg.seed, "spos"))
    result = spos_search(space, table, cfg.band, oracle, ces)
    top = result.population[: args.n]
    for ind in top:
        print(f"{'|'.join(ind.arch.choices)}  acc={ind.accuracy:.4f}  lat={ind.latency_ms:.2f}ms")
    return EXIT_OK


def cmd_space(args) -> int:
    profile = builtin_profile(args.profile)
    text = json.dumps(profile, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        size = build_space(profile).size()
        print(f"wrote {args.out} ({len(profile['layers'])} layers, size {size:.3e})")
    else:
        print(text)
    return EXIT_OK


def cmd_distmatrix(args) -> int:
    try:
        payload = json.loads(Path(args.stage_report).read_text())
        raw = payload["distributions"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read stage report {args.stage_report}: {exc}") from None
    dists = [
        LayerDistribution(d["layer"], dict(d["probs"]), int(d["support_count"])) for d in raw
    ]
    distribution_matrix_csv(dists, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padnas")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the progressive pipeline")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None)
    run.add_argument("--resume", default=None)
    run.add_argument("--lut", default=None)
    run.add_argument("--lat-min", type=float, default=None)
    run.add_argument("--lat-max", type=float, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=cmd_run)

    base = sub.add_parser("baseline", help="random / accuracy-truncation / no-prune baselines")
    base.add_argument("--mode", choices=("random", "spos", "i-supernet"), required=True)
    base.add_argument("--config", required=True)
    base.add_argument("--out", default=None)
    base.add_argument("--n", type=int, default=5)
    base.add_argument("--lut", default=None)
    base.add_argument("--lat-min", type=float, default=None)
    base.add_argument("--lat-max", type=float, default=None)
    base.add_argument("--seed", type=int, default=None)
    base.set_defaults(func=cmd_baseline)

    space = sub.add_parser("space", help="export a built-in space profile")
    space.add_argument("--profile", choices=("basic", "large"), required=True)
    space.add_argument("--out", default=None)
    space.set_defaults(func=cmd_space)

    dist = sub.add_parser("distmatrix", help="per-layer operation distribution as CSV")
    dist.add_argument("--stage-report", required=True)
    dist.add_argument("--out", required=True)
    dist.set_defaults(func=cmd_distmatrix)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleBandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
