"""Command-line entry point.

Commands mirror the workflow order: gen-fixtures, extract, train agent1,
train agent2, predict, fuse, evaluate, report. Exit codes: 0 success,
1 usage/configuration, 2 ingestion, 3 numeric failure. Failures also emit
one machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from deepagent import fixtures, pipeline
from deepagent.config import load_config
from deepagent.errors import DeepAgentError
from deepagent.manifest import load_manifest


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (overrides DEEPAGENT_CONFIG)")
    p.add_argument("--seed", type=int, help="global random seed")
    p.add_argument("--frame-policy", choices=("interval5", "even"),
                   dest="frame_policy")
    p.add_argument("--m", type=int, help="frame cap for the 'even' policy")
    p.add_argument("--meta-dims", type=int, choices=(2, 4), dest="meta_dims")
    p.add_argument("--desk-scale", action="store_const", const=True,
                   dest="desk_scale", default=None,
                   help="64x64 input geometry for quick runs")
    p.add_argument("--mel-filters", type=int, dest="mel_filters")


def _config_from(args) -> "pipeline.PipelineConfig":
    overrides = {
        key: getattr(args, key, None)
        for key in ("seed", "frame_policy", "m", "meta_dims", "desk_scale",
                    "mel_filters")
    }
    epochs = getattr(args, "epochs", None)
    cfg = load_config(getattr(args, "config", None), overrides)
    if epochs is not None:
        if getattr(args, "agent", None) == "agent2":
            cfg.agent2.epochs = epochs
        else:
            cfg.agent1.epochs = epochs
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepagent",
        description="Multimodal deepfake detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixtures", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--gap", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("extract", help="populate the feature cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="feature cache path")
    _add_config_flags(p)

    p = sub.add_parser("train", help="train one agent")
    p.add_argument("agent", choices=("agent1", "agent2"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", help="feature cache (agent2 only)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="history JSON path")
    p.add_argument("--epochs", type=int, help="override the epoch budget")
    _add_config_flags(p)

    p = sub.add_parser("predict", help="per-video scores from both agents")
    p.add_argument("--manifest", required=True)
    p.add_argument("--agent1", required=True, help="agent1 checkpoint")
    p.add_argument("--agent2", required=True, help="agent2 checkpoint")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True, help="scores JSON path")
    _add_config_flags(p)

    p = sub.add_parser("fuse", help="cross-validated meta-classifier run")
    p.add_argument("--manifest", required=True)
    p.add_argument("--agent1", required=True, help="agent1 checkpoint")
    p.add_argument("--agent2", required=True, help="agent2 checkpoint")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True, help="fold report JSON path")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="per-agent metrics from a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    p.add_argument("--out", required=True, help="metrics JSON path")

    p = sub.add_parser("report", help="render fold tables and ROC CSVs")
    p.add_argument("--fold-report", required=True, dest="fold_report")
    p.add_argument("--out", help="table text path")
    p.add_argument("--roc-dir", dest="roc_dir", help="directory for ROC CSV files")

    return parser


def _dispatch(args) -> int:
    if args.command == "gen-fixtures":
        manifest = fixtures.gen_fixtures(args.out, args.n, args.strength,
                                         args.gap, args.seed)
        print(f"wrote {manifest}")
        return 0

    if args.command == "extract":
        cfg = _config_from(args)
        records = load_manifest(args.manifest)
        n = pipeline.run_extract(records, cfg, args.out)
        print(f"extracted features for {n} samples into {args.out}")
        return 0

    if args.command == "train":
        cfg = _config_from(args)
        records = load_manifest(args.manifest)
        if args.agent == "agent1":
            history = pipeline.run_train_agent1(records, cfg, args.out,
                                                args.history)
        else:
            if not args.cache:
                raise DeepAgentError("train agent2 requires --cache")
            history = pipeline.run_train_agent2(records, cfg, args.cache,
                                                args.out, args.history)
        last = history[-1] if history else {}
        print(f"trained {args.agent} for {len(history)} epochs "
              f"(train_acc={last.get('train_acc')}) -> {args.out}")
        return 0

    if args.command == "predict":
        cfg = _config_from(args)
        records = load_manifest(args.manifest)
        rows = pipeline.run_predict(records, cfg, args.agent1, args.agent2,
                                    args.cache, args.out)
        print(f"scored {len(rows)} samples -> {args.out}")
        return 0

    if args.command == "fuse":
        cfg = _config_from(args)
        records = load_manifest(args.manifest)
        mean_f1 = pipeline.run_fuse(records, cfg, args.agent1, args.agent2,
                                    args.cache, args.out)
        print(f"mean cross-validated macro F1: {mean_f1:.4f} -> {args.out}")
        return 0

    if args.command == "evaluate":
        out = pipeline.run_evaluate(args.scores, args.split, args.out)
        print(f"evaluated {out['n_samples']} samples ({args.split}) -> {args.out}")
        return 0

    if args.command == "report":
        table = pipeline.run_report(args.fold_report, args.out, args.roc_dir)
        print(table, end="")
        return 0

    raise DeepAgentError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except DeepAgentError as exc:
        json.dump({"error": {"kind": type(exc).__name__, "exit_code": exc.exit_code,
                             "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return exc.exit_code
    except OSError as exc:
        json.dump({"error": {"kind": "OSError", "exit_code": 2,
                             "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # numeric or unexpected failure
        json.dump({"error": {"kind": type(exc).__name__, "exit_code": 3,
                             "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
