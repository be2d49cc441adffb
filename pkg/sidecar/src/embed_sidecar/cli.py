"""Command-line interface.

Exit codes:

* 0 — success (for ``verify``: the store passed every check)
* 1 — ``verify`` found problems (missing or non-finite vectors)
* 2 — configuration error
* 3 — data error (missing input file, malformed corpus line)
* 4 — other failure (checkpoint unavailable, store unreadable/unwritable)
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Sequence

from embed_sidecar import __version__
from embed_sidecar.config import load_sidecar_config
from embed_sidecar.embed import embed_corpus
from embed_sidecar.errors import (
    CheckpointUnavailable,
    ConfigError,
    CorpusParseError,
    MissingFile,
    SidecarError,
    StoreFormatError,
    WriteError,
)
from embed_sidecar.verify import verify_store

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_OTHER = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Embed a serialized-record corpus with a frozen transformer into a FEDEMB store.",
    )
    parser.add_argument("--version", action="version", version=f"embed-sidecar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", help="embed a corpus and write the store")
    embed.add_argument("--config", required=True, help="JSON config file (model_id, max_tokens, ...)")
    embed.add_argument("--corpus", required=True, help="input corpus.jsonl")
    embed.add_argument("--out", help="output store path (falls back to the config's `output`)")
    embed.add_argument(
        "--allow-dim",
        action="store_true",
        help="accept encoders whose hidden width is not 768",
    )

    verify = sub.add_parser("verify", help="check a store against a corpus")
    verify.add_argument("--store", required=True, help="FEDEMB store to check")
    verify.add_argument("--corpus", required=True, help="corpus the store should cover")
    return parser


def cmd_embed(args: argparse.Namespace) -> int:
    cfg = load_sidecar_config(args.config)
    if args.allow_dim and not cfg.allow_dim:
        cfg = dataclasses.replace(cfg, allow_dim=True)
    out_path = args.out or cfg.output
    if not out_path:
        raise ConfigError("no output path: pass --out or set `output` in the config")
    summary = embed_corpus(cfg, args.corpus, out_path)
    print(f"embedded {summary.records} records with {summary.encoder_id} (dim {summary.dim}) -> {summary.out_path}")
    print(f"checkpoint: {summary.checkpoint} @ {summary.resolved_commit or summary.revision}")
    if summary.truncated:
        print(f"truncated {summary.truncated} record(s) to {summary.max_tokens} tokens")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    report = verify_store(args.store, args.corpus)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VERIFY_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embed":
            return cmd_embed(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingFile, CorpusParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CheckpointUnavailable, WriteError, StoreFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except SidecarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    raise SystemExit(main())
