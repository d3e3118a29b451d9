"""Command line front end: corpus in, embedding file out."""

from __future__ import annotations

import argparse
import sys

from .corpusio import CorpusFormatError
from .exporter import ExportError, ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedexport", description=__doc__)
    parser.add_argument("--corpus", required=True, help="petition corpus file")
    parser.add_argument("--corpus-format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument(
        "--model", required=True, help="checkpoint name or local checkpoint directory"
    )
    parser.add_argument("--out", required=True, help="embedding file to write")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--max-tokens", type=int, default=128)
    parser.add_argument("--device", default="cpu", help="torch device selector")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus_path=args.corpus,
        corpus_format=args.corpus_format,
        model_id=args.model,
        output_path=args.out,
        max_tokens=args.max_tokens,
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        summary = export_embeddings(job)
    except (ExportError, CorpusFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {summary['count']} vectors (dim {summary['dim']}, "
        f"model {summary['model_id']}) -> {summary['output']}"
    )
    return 0


def main() -> None:
    sys.exit(run())
