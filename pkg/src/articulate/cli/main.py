"""``articulate`` command-line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..active import ActiveEnv, greedy_policy
from ..errors import ArticulateError, ConfigError, MissingPrerequisiteError
from .commands import (EXIT_MISSING, EXIT_OK, EXIT_SENSING, EXIT_USAGE, RunPaths, _require_stage, cmd_eval,
                       cmd_gen_data, cmd_train, cmd_train_dqn, load_policy, perceiver)
from .config import load_config
from .pipeline import parse_command, run_pipeline, write_outputs
from .report import LogFormatError, run_report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="articulate", description="Articulated-object perception, active sensing and manipulation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="key = value configuration file (defaults if omitted)")
        sp.add_argument("--runs", default="runs", help="root directory for run artifacts (default: runs)")
        return sp

    g = with_config(sub.add_parser("gen-data", help="render the synthetic dataset"))
    g.add_argument("--out", help="write the dataset here instead of the run directory")

    t = with_config(sub.add_parser("train", help="train one perception stage"))
    t.add_argument("--stage", type=int, choices=(1, 2, 3), required=True)

    with_config(sub.add_parser("train-dqn", help="train the viewpoint-selection policy"))

    e = with_config(sub.add_parser("eval", help="joint-estimation metrics"))
    e.add_argument("--active", choices=("off", "on"), default="off")
    e.add_argument("--checkpoint", help="perception checkpoint (default: the run's stage-3 model)")
    e.add_argument("--dataset", help="dataset directory (default: the run's dataset)")

    pl = with_config(sub.add_parser("pipeline", help="perceive, re-view if needed, manipulate"))
    pl.add_argument("--scene", type=int, required=True, help="scene seed")
    pl.add_argument("--target", required=True, help="target joint state, e.g. 'open 0.2 m' or 'open 100°'")
    pl.add_argument("--part", type=int, help="select this part index instead of the movable part")
    pl.add_argument("--oracle-params", action="store_true", help="manipulate with ground-truth joint parameters")
    pl.add_argument("--out", help="output directory (default: <run>/pipeline_<scene>)")

    r = sub.add_parser("report", help="aggregate logs into column files")
    r.add_argument("--rewards")
    r.add_argument("--metrics")
    r.add_argument("--eval-off")
    r.add_argument("--eval-on")
    r.add_argument("--out", required=True)
    return p


def _pipeline(args, cfg, paths) -> int:
    model = _require_stage(paths, cfg, 3)
    net = load_policy(paths.policy)
    select = "movable" if args.part is None else args.part
    env = ActiveEnv(perceiver(model), cfg.env(), select=select)
    res = run_pipeline(env, greedy_policy(net), args.scene, parse_command(args.target), cfg.success_threshold,
                       cfg.max_steps, args.oracle_params)
    out = Path(args.out) if args.out else paths.dir / f"pipeline_{args.scene}"
    write_outputs(res, out)
    print("\n".join(res.trace))
    print(f"status\t{res.status}\t{out}")
    return EXIT_SENSING if res.status == "sensing-failure" else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            run_report(args.out, args.rewards, args.metrics, args.eval_off, args.eval_on)
            return EXIT_OK
        cfg = load_config(args.config)
        paths = RunPaths(cfg, args.runs)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, paths, args.out)
        if args.command == "train":
            return cmd_train(cfg, paths, args.stage)
        if args.command == "train-dqn":
            return cmd_train_dqn(cfg, paths)
        if args.command == "eval":
            return cmd_eval(cfg, paths, args.active == "on", args.checkpoint, args.dataset)
        if args.command == "pipeline":
            return _pipeline(args, cfg, paths)
    except MissingPrerequisiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArticulateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
