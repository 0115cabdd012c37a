"""Command-line front end.

Subcommands cover the full workflow: train and save the n-gram model or the
embedding table, decode a single prompt for inspection, recompute metrics
from stored records, run the full experiment grid, sweep generation lengths,
and render the report with figures.

Every subcommand reads the same JSON experiment config via --config, and
--seed / --strategy / --max-length override the configured values.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .dist import InvalidDistribution
from .embeddings import save_text_vectors, train_cooccurrence
from .harness import (
    build_lm,
    build_resources,
    decode_all,
    experiment_dir,
    recompute_metrics,
    render_report,
    run_experiment,
    run_sweep,
)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None, help="use this single seed instead of the configured list")
    common.add_argument("--strategy", default=None, help="restrict to one configured strategy name")
    common.add_argument("--max-length", type=int, default=None, help="override the generation length cap")
    common.add_argument("--output-dir", default=None, help="override the configured output directory")

    parser = argparse.ArgumentParser(prog="decodelab", description="decoding strategy laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-lm", parents=[common], help="train the n-gram model and save it")
    p.add_argument("--out", default=None, help="destination path (default: <experiment dir>/lm.txt)")

    p = sub.add_parser("train-emb", parents=[common], help="train embeddings and save them")
    p.add_argument("--out", default=None, help="destination path (default: <experiment dir>/embeddings.txt)")

    p = sub.add_parser("decode", parents=[common], help="decode one prompt and print the text")
    p.add_argument("--prompt-index", type=int, default=0, help="which prompt case to decode")
    p.add_argument("--show-steps", action="store_true", help="print per-step diagnostics")

    sub.add_parser("metrics", parents=[common], help="recompute metrics from stored records")
    sub.add_parser("run", parents=[common], help="decode the grid and write records, metrics, and reports")
    sub.add_parser("sweep", parents=[common], help="write the repetition-versus-length table")
    sub.add_parser("report", parents=[common], help="run everything and render figures")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes: dict = {}
    if args.output_dir is not None:
        changes["output_dir"] = Path(args.output_dir).resolve()
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.max_length is not None:
        if args.max_length < 1:
            raise ConfigError("--max-length must be >= 1")
        changes["max_length"] = args.max_length
    if args.strategy is not None:
        keep = [s for s in cfg.strategies if s.name == args.strategy]
        if not keep:
            names = ", ".join(s.name for s in cfg.strategies)
            raise ConfigError(f"--strategy {args.strategy!r} not in config (have: {names})")
        changes["strategies"] = keep
        if cfg.sweep is not None:
            kept = [n for n in cfg.sweep.strategies if n == args.strategy]
            changes["sweep"] = dataclasses.replace(cfg.sweep, strategies=kept) if kept else None
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _cmd_train_lm(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    _vocab, _corpus, lm = build_lm(cfg)
    out = Path(args.out) if args.out else experiment_dir(cfg) / "lm.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    lm.save(out)
    print(out)
    return 0


def _cmd_train_emb(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    vocab, corpus, _lm = build_lm(cfg)
    table = train_cooccurrence(corpus, window=cfg.embedding_window, dim=cfg.embedding_dim)
    out = Path(args.out) if args.out else experiment_dir(cfg) / "embeddings.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_text_vectors(table, vocab, out)
    print(out)
    return 0


def _cmd_decode(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    res = build_resources(cfg)
    if not 0 <= args.prompt_index < len(res.prompts):
        raise ConfigError(f"--prompt-index must be in [0, {len(res.prompts) - 1}]")
    case = res.prompts[args.prompt_index]
    cells = decode_all(cfg, res, seeds=cfg.seeds[:1], samples=1)
    cells = [c for c in cells if c.prompt_id == args.prompt_index]
    for cell in cells:
        print(f"# strategy={cell.strategy} seed={cell.seed} termination={cell.record.termination}")
        print(" ".join(cell.tokens))
        if args.show_steps:
            for i, step in enumerate(cell.record.steps):
                print(f"  step {i}: entropy={step.entropy:.4f} info={step.info:.4f} survivors={step.survivors}")
    if not cells:
        print(f"no output for prompt {args.prompt_index} (pieces: {case.pieces})", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "train-lm":
            return _cmd_train_lm(cfg, args)
        if args.command == "train-emb":
            return _cmd_train_emb(cfg, args)
        if args.command == "decode":
            return _cmd_decode(cfg, args)
        if args.command == "metrics":
            paths = recompute_metrics(cfg)
        elif args.command == "run":
            paths = run_experiment(cfg)
        elif args.command == "sweep":
            if cfg.sweep is None:
                raise ConfigError("config has no sweep section")
            paths = {"sweep_csv": run_sweep(cfg)}
        else:
            paths = render_report(cfg)
        for key in sorted(paths):
            print(paths[key])
        return 0
    except (ConfigError, InvalidDistribution) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # Downstream closed the pipe (e.g. piped into head); exit quietly.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
