"""Command-line interface: ``hindsight {train,eval,vgdist,bias-study,aggregate}``.

Exit codes: 0 on success, 2 for invalid configuration or inputs, 3 when
training hits a non-finite value. Run directories are assembled in a
temporary sibling directory and renamed into place once complete.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agent import ActorCritic, AgentConfig, AlgoConfig, run_training
from .config import OUTPUT_ROOT_ENV, apply_overrides, load_config, resolve
from .envs import make_env
from .exceptions import ConfigurationError, NumericError, PreconditionError, ShapeError
from .goals import (GaussianMixture, GridDistribution, GridSpec, SampleSet, UniformRect,
                    build_target_grid, write_grid_csv)
from .metrics import (aggregate_curves, evaluate_with_bias, virtual_goal_proposal,
                      vg_distribution_report, write_aggregate, write_learning_curves)
from .relabel import count_misleading

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
BIAS_COLUMNS = ("seed", "variant", "final_success_rate", "q0_estimate", "empirical_return",
                "bias", "misleading")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _parse_pair(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_grid(text: str) -> tuple:
    try:
        m, n = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like 20x20, got {text!r}") from exc
    return m, n


def parse_spec(text: str | None):
    """Goal distribution from JSON: ``{"type": "uniform", "low": [..], "high": [..]}``,
    ``{"type": "gmm", "weights": [..], "means": [[..]], "covariances": [[[..]]]}`` or
    ``{"type": "samples", "points": [[..]]}``."""
    if text is None:
        return UniformRect((0.0, 0.0), (1.0, 1.0))
    try:
        d = json.loads(Path(text).read_text() if Path(text).is_file() else text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"spec is not valid JSON: {exc}") from exc
    kind = d.pop("type", None) if isinstance(d, dict) else None
    try:
        if kind == "uniform":
            return UniformRect(tuple(d["low"]), tuple(d["high"]))
        if kind == "gmm":
            return GaussianMixture(np.asarray(d["weights"], float), np.asarray(d["means"], float),
                                   np.asarray(d["covariances"], float))
        if kind == "samples":
            return SampleSet(np.asarray(d["points"], float))
    except KeyError as exc:
        raise ConfigurationError(f"spec of type {kind!r} lacks field {exc}") from exc
    raise ConfigurationError(f"spec type must be uniform, gmm or samples, got {kind!r}")


def _write_report_csv(report, path):
    row = {"epoch": 0, "epsilon": 0.0, "sigma_sq": math.nan, **report.as_dict()}
    return write_learning_curves([row], path)


# -- train ---------------------------------------------------------------------

def train_run(cfg, run_dir: Path, progress=None) -> Path:
    """Execute one configured run and publish its directory atomically."""
    env = cfg.make_env()
    run_dir = Path(run_dir)
    if run_dir.exists():
        raise ConfigurationError(f"run directory {run_dir} already exists")
    run_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{run_dir.name}-", dir=run_dir.parent))
    try:
        cfg.write_snapshot(tmp / "config.json")
        run = run_training(env, cfg.algo.variant, cfg.agent_config(), cfg.run.seed, cfg.algo,
                           progress=progress)
        write_learning_curves(run.curves, tmp / "curves.csv")
        (tmp / "checkpoints").mkdir()
        run.ac.save(tmp / "checkpoints" / "final.npz",
                    {"env": cfg.env_name, "variant": cfg.algo.variant, "seed": cfg.run.seed})
        (tmp / "heatmaps").mkdir()
        if run.grid is not None:
            write_grid_csv(tmp / "heatmaps" / "target.csv", run.reference_target,
                           sigma=cfg.algo.reference_sigma, floor=cfg.algo.target_floor)
            goals = run.buffer.goal[: run.buffer.size][run.buffer.is_virtual[: run.buffer.size]]
            if len(goals):
                write_grid_csv(tmp / "heatmaps" / "proposal.csv",
                               virtual_goal_proposal(goals, run.grid))
        run.buffer.dump_csv(tmp / "buffer-dump.csv")
        tmp.rename(run_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return run_dir


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.output_dir:
        run_dir = Path(args.output_dir)
    elif cfg.run.output_dir:
        run_dir = Path(cfg.run.output_dir)
    else:
        run_dir = output_root() / f"{cfg.env_name}-{cfg.algo.variant}-seed{cfg.run.seed}"

    def progress(row):
        if not args.quiet:
            print(f"epoch {row['epoch']:3d}  success {row['success_rate']:.3f}  "
                  f"dist {row['mean_final_distance']:.3f}  kl {row['kl_to_target']:.3f}",
                  flush=True)

    print(train_run(cfg, run_dir, progress))
    return 0


# -- eval ----------------------------------------------------------------------

def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise PreconditionError("--episodes must be at least 1")
    raw = apply_overrides({"env": {"name": args.env}}, args.set)
    env = resolve(raw).make_env()
    ac = ActorCritic.load(args.checkpoint, env)
    report, _ = evaluate_with_bias(env, ac, args.episodes, args.gamma, args.seed)
    for k, v in report.as_dict().items():
        print(f"{k}: {v}")
    if args.output:
        _write_report_csv(report, args.output)
    return 0


# -- vgdist --------------------------------------------------------------------

def cmd_vgdist(args) -> int:
    spec = parse_spec(args.spec)
    m, n = _parse_grid(args.grid)
    grid = GridSpec(m, n, UniformRect(_parse_pair(args.low), _parse_pair(args.high)))
    target = build_target_grid(spec, args.sigma, grid, args.floor)
    write_grid_csv(args.output, target, sigma=float(args.sigma), floor=float(args.floor))
    print(args.output)
    if args.from_dump:
        proposal, kl = vg_distribution_report(args.from_dump, grid, target, args.direction)
        if args.proposal_output:
            write_grid_csv(args.proposal_output, proposal)
            print(args.proposal_output)
        print(f"kl: {kl!r}")
    return 0


# -- bias study ----------------------------------------------------------------

def _bias_job(job):
    seed, variant, agent_cfg, n_bits = job
    env = make_env("bitflip", n_bits=n_bits)
    run = run_training(env, variant, agent_cfg, seed, AlgoConfig(variant=variant))
    report, _ = evaluate_with_bias(env, run.ac, agent_cfg.n_eval_episodes, agent_cfg.gamma,
                                   seed + 10_000)
    buf = run.buffer
    k = buf.size
    misleading = count_misleading(buf.achieved_goal[:k], buf.goal[:k], buf.is_virtual[:k],
                                  env.reward)
    return {"seed": seed, "variant": variant,
            "final_success_rate": run.curves[-1]["success_rate"] if run.curves else math.nan,
            "q0_estimate": report.q0_estimate, "empirical_return": report.empirical_return,
            "bias": report.bias, "misleading": misleading}


def run_bias_study(seeds, agent_cfg: AgentConfig, n_bits: int = 8, workers: int = 1):
    """HER and Filtered-HER on bit-flip per seed, plus a median summary row."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise PreconditionError("bias study needs at least 2 seeds")
    jobs = [(s, v, agent_cfg, n_bits) for s in seeds for v in ("her", "filtered-her")]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_bias_job, jobs))
    else:
        rows = [_bias_job(j) for j in jobs]

    def med(variant, key):
        return float(np.median([r[key] for r in rows if r["variant"] == variant]))

    summary = {"seed": "median", "variant": "her-minus-filtered"}
    for key in ("final_success_rate", "q0_estimate", "empirical_return", "bias", "misleading"):
        summary[key] = med("her", key) - med("filtered-her", key)
    return rows + [summary]


def write_bias_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BIAS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return Path(path)


def cmd_bias_study(args) -> int:
    agent_cfg = AgentConfig(epochs=args.epochs, cycles_per_epoch=args.cycles,
                            episodes_per_cycle=args.episodes,
                            optimization_steps_per_cycle=args.opt_steps,
                            n_eval_episodes=args.eval_episodes)
    rows = run_bias_study(args.seeds, agent_cfg, args.n_bits, args.workers)
    out = args.output or (output_root() / "bias-study.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_bias_csv(rows, out)
    s = rows[-1]
    print(f"median bias difference (her - filtered): {s['bias']:.4f}")
    print(out)
    return 0


# -- aggregate -----------------------------------------------------------------

def cmd_aggregate(args) -> int:
    paths = []
    for p in map(Path, args.runs):
        paths.append(p / "curves.csv" if p.is_dir() else p)
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise ConfigurationError(f"missing curve files: {', '.join(missing)}")
    rows = aggregate_curves(paths)
    print(write_aggregate(rows, args.output))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hindsight", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one agent and write a run directory")
    t.add_argument("--config", help="TOML or JSON run config")
    t.add_argument("--set", action="append", default=[], metavar="BLOCK.KEY=VALUE")
    t.add_argument("--output-dir", help=f"run directory (default under ${OUTPUT_ROOT_ENV})")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--env", required=True)
    e.add_argument("--set", action="append", default=[], metavar="env.KEY=VALUE")
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--gamma", type=float, default=0.98)
    e.add_argument("--output", help="one-row CSV in learning-curve format")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("vgdist", help="target grid, optionally vs. a buffer dump")
    v.add_argument("--spec", help="goal distribution as JSON text or file (default: unit square)")
    v.add_argument("--sigma", type=float, default=0.2)
    v.add_argument("--grid", default="20x20")
    v.add_argument("--low", default="0,0")
    v.add_argument("--high", default="1,1")
    v.add_argument("--floor", type=float, default=0.002)
    v.add_argument("--output", default="target-grid.csv")
    v.add_argument("--from-dump", help="buffer-dump.csv to build the proposal grid from")
    v.add_argument("--proposal-output")
    v.add_argument("--direction", default="target-proposal",
                   choices=("target-proposal", "proposal-target"))
    v.set_defaults(func=cmd_vgdist)

    b = sub.add_parser("bias-study", help="HER vs. Filtered-HER critic bias on bit-flip")
    b.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    b.add_argument("--n-bits", type=int, default=8)
    b.add_argument("--epochs", type=int, default=6)
    b.add_argument("--cycles", type=int, default=50)
    b.add_argument("--episodes", type=int, default=16)
    b.add_argument("--opt-steps", type=int, default=40)
    b.add_argument("--eval-episodes", type=int, default=50)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--output")
    b.set_defaults(func=cmd_bias_study)

    a = sub.add_parser("aggregate", help="percentile bands across runs")
    a.add_argument("runs", nargs="+", help="run directories or curves CSVs")
    a.add_argument("--output", default="aggregate.csv")
    a.set_defaults(func=cmd_aggregate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, ShapeError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
