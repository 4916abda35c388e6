"""Extraction command line: instances JSONL in, dataset directory out."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .encoder import EncodingError, MaskedLmEncoder
from .export import ExportError, export, write_names
from .instances import InstanceError, read_instances


def run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="coview-extract",
        description="Extract token-view and mask-view embeddings from annotated text.",
    )
    parser.add_argument("--input", required=True, help="instances JSONL")
    parser.add_argument("--model", required=True, help="masked LM name or path")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--names", action="store_true", help="also export predicted type names")
    parser.add_argument("--top-k", type=int, default=10)
    parser.add_argument("--num-unknown", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        instances = read_instances(args.input)
        encoder = MaskedLmEncoder(
            args.model,
            seed=args.seed,
            max_length=args.max_length,
            batch_size=args.batch_size,
        )
        token_rows = encoder.encode_token_view(instances)
        mask_rows = encoder.encode_mask_view(instances)
        export(instances, token_rows, mask_rows, args.out, num_unknown=args.num_unknown)
        if args.names:
            names = encoder.predict_names(instances, top_k=args.top_k)
            write_names(Path(args.out) / "names.jsonl", instances, names)
        print(
            json.dumps(
                {
                    "out": str(args.out),
                    "n": len(instances),
                    "token_dim": int(token_rows.shape[1]),
                    "mask_dim": int(mask_rows.shape[1]),
                }
            )
        )
        return 0
    except (InstanceError, EncodingError, ExportError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
