"""Command-line entry point: ``uedlab train|eval|inspect-buffer|plot``.

Exit codes: 0 success, 2 configuration error, 3 integrity error (corrupt
file or cache mismatch), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .core import ConfigurationError, NumericalError, ParseError, PreconditionError
from .curriculum import LevelBuffer
from .diversity import div_scores
from .evaluation import default_suite_path, evaluate, load_suite
from .learner import load_policy, save_policy
from .maze import get_family, render_ascii
from .plot import plot_metrics
from .strategies import run_strategy

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRITY, EXIT_NUMERICAL = 0, 2, 3, 4
CACHE_TOL = 1e-9

log = logging.getLogger("uedlab")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- subcommands ---------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    for item in args.set or []:
        key, _, raw = item.partition("=")
        try:
            changes[key] = json.loads(raw)
        except json.JSONDecodeError:
            changes[key] = raw
    if changes:
        cfg = cfg.replace(**changes)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = run_strategy(cfg)

    artifacts = {"metrics.csv": out / "metrics.csv", "policy.json": out / "policy.json"}
    report.write_csv(artifacts["metrics.csv"])
    save_policy(report.student, artifacts["policy.json"], report.family_id)
    if report.buffer is not None:
        artifacts["buffer.json"] = out / "buffer.json"
        report.buffer.save(artifacts["buffer.json"])
    manifest = {
        "uedlab_version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "iterations": len(report.rows),
        "env_steps": report.env_steps,
        "artifacts": {name: _sha256(p) for name, p in artifacts.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.strategy.kind} seed={cfg.seed}: {len(report.rows)} iterations, "
          f"{report.env_steps} env steps -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    params, family_id = load_policy(args.policy)
    levels = load_suite(args.levels)
    log.info("evaluating a policy trained on %s over %d levels", family_id, len(levels))
    res = evaluate(params, levels, episodes=args.episodes, seed=args.seed, horizon=args.horizon,
                   greedy=not args.sample)
    for r in res.per_level:
        print(f"{r.name:<24} ep={r.episode:<3} solved={int(r.solved)} return={r.ret:.4f} steps={r.steps}")
    print(res.summary())
    if args.out:
        res.write_csv(args.out)
    return EXIT_OK


def cmd_inspect_buffer(args) -> int:
    buf = LevelBuffer.load(args.snapshot)
    if len(buf) == 0:
        print("0 entries")
        return EXIT_OK
    fresh = div_scores([e.reps for e in buf], buf.div_cfg.zero_norm_epsilon)
    print(f"{len(buf)} entries (capacity {buf.cfg.K}, replacement={buf.cfg.replacement})")
    for e, f in zip(buf, fresh):
        print(f"\nlevel {e.level_id}: F_gae={e.gae_score:.6f} F_div={e.div_score:.6f} "
              f"(recomputed {f:.6f}) visits={e.visits} last_iteration={e.last_iteration}")
        try:
            fam = get_family(e.level.family_id)
            print(render_ascii(fam.decode(e.level)), end="")
        except (ConfigurationError, ValueError) as exc:
            print(f"  <cannot render: {exc}>")
    total = float(fresh.sum()) if len(buf) >= 2 else 0.0
    print(f"\nbuffer diversity: {total:.6f}")
    cached = np.array([e.div_score for e in buf])
    worst = float(np.max(np.abs(cached - fresh)))
    if worst > CACHE_TOL:
        bad = [e.level_id for e, c, f in zip(buf, cached, fresh) if abs(c - f) > CACHE_TOL]
        print(f"cache mismatch: {len(bad)} cached diversity scores differ from recomputation "
              f"(max error {worst:.3g}; levels {bad})", file=sys.stderr)
        return EXIT_INTEGRITY
    return EXIT_OK


def cmd_plot(args) -> int:
    curves = plot_metrics(args.metrics, args.metric, args.out, args.agg)
    for c in curves:
        print(f"{c.strategy}: {c.num_runs} run(s), {len(c.steps)} points")
    print(f"wrote {args.out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uedlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"uedlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one strategy and write metrics and snapshots")
    t.add_argument("--config", type=Path, help="experiment config (JSON); defaults if omitted")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    t.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. --set curriculum.p=0.3")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy zero-shot evaluation on .maze files")
    e.add_argument("--policy", type=Path, required=True)
    e.add_argument("--levels", type=Path, default=None,
                   help=f"directory of .maze files (default: shipped suite at {default_suite_path()})")
    e.add_argument("--episodes", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--horizon", type=int, default=100)
    e.add_argument("--sample", action="store_true", help="sample actions instead of argmax")
    e.add_argument("--out", type=Path, help="per-episode CSV")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("inspect-buffer", help="print and verify a buffer snapshot")
    b.add_argument("--snapshot", type=Path, required=True)
    b.set_defaults(func=cmd_inspect_buffer)

    pl = sub.add_parser("plot", help="SVG of a metric across seeds, grouped by strategy")
    pl.add_argument("--metrics", type=Path, nargs="+", required=True)
    pl.add_argument("--metric", default="eval_solved_rate")
    pl.add_argument("--agg", choices=("mean", "median"), default="mean")
    pl.add_argument("--out", type=Path, required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.payload:
            print(json.dumps(exc.payload, sort_keys=True, default=str), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
