"""Command-line entry point: ``retrievalnet {ingest,train,evaluate,search,report}``.

Results go to stdout, diagnostics to stderr.  Exit codes:

    0  success
    1  unexpected internal error
    2  configuration / usage error
    3  data error (bad JSONL, labels, dimensions)
    4  vector index error
    5  shape, training or metric error
    6  missing or mismatched run artifacts
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import pipeline
from .errors import ConfigError, RetrievalNetError


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrievalnet",
        description="Retrieval-feature fake-news classification pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--seed", type=int, help="root seed (overrides the config)")
    parser.add_argument("--out", metavar="DIR", help="run directory (overrides the config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and print its summary")
    p.add_argument("--source", help="JSONL path or 'synthetic'")
    p.add_argument("--json", action="store_true", help="print the summary as JSON")

    p = sub.add_parser("train", help="split, index, extract features and train")
    p.add_argument("--source", help="JSONL path or 'synthetic'")
    p.add_argument("--variant", choices=("model1", "model2"))
    p.add_argument("-k", type=int, dest="k")
    p.add_argument("--epochs", type=int)
    p.add_argument("--grid", action="store_true", help="grid-search lr, batch size and hidden preset")
    p.add_argument("--export-features", action="store_true",
                   help="also write the raw training retrieval features to features_train.csv")

    p = sub.add_parser("evaluate", help="score a trained run on its test split or a JSONL file")
    p.add_argument("--data", metavar="JSONL", help="evaluate on this file instead of the test split")

    p = sub.add_parser("search", help="nearest indexed articles for a vector or an indexed id")
    p.add_argument("--index", metavar="PATH", help="index file (default: <out>/index.nxidx)")
    p.add_argument("-k", type=int, default=5)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--vector", type=_parse_vector, help="comma or space separated values")
    group.add_argument("--id", dest="article_id", help="use an indexed article's vector")
    p.add_argument("--exclude-self", action="store_true", help="drop the --id article from the hits")

    sub.add_parser("report", help="merge manifest, history and metrics into report.json/.txt")
    return parser


def _config(args) -> pipeline.PipelineConfig:
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "source": getattr(args, "source", None),
        "variant": getattr(args, "variant", None),
        "k": getattr(args, "k", None) if args.command == "train" else None,
        "epochs": getattr(args, "epochs", None),
    }
    return pipeline.load_config(args.config, **overrides)


def _run_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(_config(args).out_dir)


def cmd_ingest(args) -> int:
    cfg = _config(args)
    cfg.validate()
    with pipeline.stage("ingest"):
        ds = pipeline.load_dataset(cfg)
    summary = ds.summary()
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    print(f"{'Dataset':<14}{'Total':>8}{'Fake':>8}{'Real':>8}")
    for tag, c in summary["models"].items():
        print(f"{tag:<14}{c['total']:>8}{c['fake']:>8}{c['real']:>8}")
    if len(summary["models"]) > 1:
        print(f"{'all':<14}{summary['total']:>8}{summary['fake']:>8}{summary['real']:>8}")
    print(f"dim {summary['dim']}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    arts = pipeline.run_train(cfg, grid=args.grid, export_features=args.export_features)
    last = arts.history[-1]
    print(f"trained {arts.model.variant} on {cfg.source}: {len(arts.history)} epochs, "
          f"loss {last.loss:.6f}, train accuracy {last.train_accuracy:.4f}")
    print(f"artifacts written to {cfg.out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    report = pipeline.run_evaluate(_run_dir(args), data=args.data)
    print(report.to_table())
    return 0


def cmd_search(args) -> int:
    index = args.index or str(_run_dir(args) / pipeline.INDEX_FILE)
    with pipeline.stage("search"):
        hits = pipeline.run_search(index, args.k, args.vector, args.article_id, args.exclude_self)
    print("rank\tid\tdistance")
    for rank, (article_id, dist) in enumerate(hits, 1):
        print(f"{rank}\t{article_id}\t{dist!r}")
    return 0


def cmd_report(args) -> int:
    with pipeline.stage("report"):
        _, text = pipeline.run_report(_run_dir(args))
    print(text)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RetrievalNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
