"""CLI: extract <media> --fps 0.5 --pooling patch_mean --out file.embs

Exit codes: 0 ok, 2 media/data error, 3 encoder or argument error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import AdapterError, EncoderLoadError, MediaError
from .extract import ExtractionSpec, extract_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embs-extract",
        description="Convert a video or image into an EMBS embedding stream.",
    )
    parser.add_argument("media", help="video or image file")
    parser.add_argument("--fps", type=float, default=0.5, help="sampling rate (default 0.5)")
    parser.add_argument(
        "--pooling", choices=["patch_mean", "cls"], default="patch_mean",
        help="token pooling (default patch_mean)",
    )
    parser.add_argument(
        "--encoder", default="local",
        help="encoder identifier: local, local-<dim>, or hf:<model-id> (default local)",
    )
    parser.add_argument("--out", required=True, help="EMBS output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExtractionSpec(media=args.media, fps=args.fps, encoder=args.encoder, pooling=args.pooling)
        rows = extract_embeddings(spec, args.out)
    except MediaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EncoderLoadError, AdapterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {rows} frames to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
