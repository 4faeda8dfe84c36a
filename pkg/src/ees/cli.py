"""Command-line interface.

Subcommands::

    ees segment     stream an EMBS file (or stdin) into JSONL segments
    ees consolidate reduce a flushed hierarchy to per-event summary vectors
    ees bench       run the synthetic benchmark and write reports
    ees train       fit a predictor on an EMBS corpus and write a checkpoint

Exit codes: 0 success, 2 data/format error (including missing inputs),
3 configuration error, 4 consolidation attempted without stored embeddings.
Outputs are deterministic for fixed inputs, flags, and seeds; the only
wall-clock values live in the bench timing file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as benchmod
from .config import parse_thresholds, resolve_config
from .consolidation import AttentionConfig, consolidate_all
from .embs import dump_stream, read_stream, read_stream_array
from .engine import EngineConfig, EventEngine
from .errors import ConfigError, EesError, MissingEmbeddingsError, StreamFormatError
from .hierarchy_io import load_records, rebuild_hierarchy, write_segment
from .predictors import PredictorConfig, load_checkpoint, save_checkpoint, train_predictor
from .types import FrameEmbedding, StreamHeader

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_CONFIG = 3
EXIT_NO_EMBEDDINGS = 4


def _common_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--layers", type=int, default=None, help="hierarchy depth (default 3)")
    parser.add_argument(
        "--threshold",
        default=None,
        help="boundary threshold, scalar or comma list per level (default 0.4)",
    )
    parser.add_argument("--window-cap", type=int, default=None, dest="window_cap")
    parser.add_argument(
        "--predictor",
        default=None,
        choices=["mean_pool_identity", "linear_ar", "mlp"],
    )
    parser.add_argument("--checkpoint", default=None, help="EESP predictor checkpoint to load")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ees", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="segment an embedding stream into JSONL events")
    p_seg.add_argument("input", help="EMBS file path, or '-' for stdin")
    p_seg.add_argument("--out", default=None, help="JSONL destination (default stdout)")
    p_seg.add_argument("--stats", default=None, help="hierarchy stats JSON destination")
    p_seg.add_argument(
        "--emit-embeddings",
        action="store_true",
        default=None,
        dest="emit_embeddings",
        help="store each segment's summary vector in its record (needed for consolidate)",
    )
    _common_engine_flags(p_seg)

    p_con = sub.add_parser("consolidate", help="summarize a segmented hierarchy per event")
    p_con.add_argument("hierarchy", help="JSONL written by 'ees segment'")
    p_con.add_argument("--stream", required=True, help="the EMBS stream that was segmented")
    p_con.add_argument("--out", default=None, help="summary JSON destination (default stdout)")
    p_con.add_argument("--emit-embs", default=None, dest="emit_embs", help="also write summaries as an EMBS file")
    p_con.add_argument(
        "--essential",
        default=None,
        choices=["max_error", "random", "middle"],
        help="essential-token selection strategy (default max_error)",
    )
    p_con.add_argument("--scale", type=float, default=None, help="attention scale (default 1/sqrt(d))")
    p_con.add_argument("--checkpoint", default=None, help="checkpoint providing learned projections")
    p_con.add_argument("--seed", type=int, default=None)
    p_con.add_argument("--config", default=None)

    p_bench = sub.add_parser("bench", help="run the synthetic benchmark")
    p_bench.add_argument("--out-dir", required=True, dest="out_dir")
    p_bench.add_argument("--kind", default="both", choices=["clean", "drift", "both"])
    p_bench.add_argument("--corpus", default=None, help="existing corpus manifest to load")
    p_bench.add_argument("--streams", type=int, default=100)
    p_bench.add_argument("--frames", type=int, default=120)
    p_bench.add_argument("--dim", type=int, default=64)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--layers", type=int, default=None)
    p_bench.add_argument("--threshold", default=None)
    p_bench.add_argument("--window-cap", type=int, default=None, dest="window_cap")
    p_bench.add_argument("--sim-threshold", type=float, default=0.7, dest="sim_threshold")
    p_bench.add_argument("--tolerance", type=int, default=1)
    p_bench.add_argument("--write-corpus", action="store_true", dest="write_corpus")
    p_bench.add_argument(
        "--dump-similarity",
        type=int,
        default=0,
        dest="dump_similarity",
        help="write cosine-matrix CSVs for the first N streams",
    )
    p_bench.add_argument("--config", default=None)

    p_train = sub.add_parser("train", help="fit a predictor on an EMBS corpus")
    p_train.add_argument("corpus", help="manifest.json, a directory of .embs files, or one .embs file")
    p_train.add_argument("--out", required=True, help="checkpoint destination (.eesp)")
    p_train.add_argument("--epochs", type=int, default=3)
    p_train.add_argument("--loss-csv", default=None, dest="loss_csv")
    p_train.add_argument("--hidden", type=int, default=None)
    p_train.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    _common_engine_flags(p_train)

    return parser


def _engine_from_config(cfg: dict, dim: int) -> EventEngine:
    layers = int(cfg["layers"])
    thresholds = parse_thresholds(cfg["threshold"], layers)
    if cfg.get("checkpoint"):
        state, _attn = load_checkpoint(cfg["checkpoint"])
        if state.config.dim != dim:
            raise ConfigError(
                f"checkpoint dim {state.config.dim} does not match stream dim {dim}"
            )
        predictor_cfg = state.config
    else:
        state = None
        predictor_cfg = PredictorConfig(
            kind=cfg["predictor"],
            dim=dim,
            levels=layers,
            window_cap=int(cfg["window_cap"]),
            hidden=int(cfg["hidden"]),
            learning_rate=float(cfg["learning_rate"]),
            seed=int(cfg["seed"]),
        )
    engine_cfg = EngineConfig(
        dim=dim,
        levels=layers,
        thresholds=thresholds,
        window_cap=int(cfg["window_cap"]),
        predictor=predictor_cfg,
    )
    return EventEngine(engine_cfg, predictor_state=state, retain_segments=False)


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = resolve_config(config_file=args.config, flags=vars(args))
    emit_embeddings = bool(cfg["emit_embeddings"])

    if args.input == "-":
        source = sys.stdin.buffer
    else:
        path = Path(args.input)
        if not path.exists():
            raise StreamFormatError(f"input file not found: {path}")
        source = path

    header, frames = read_stream(source)
    engine = _engine_from_config(cfg, header.dim)

    out_fp = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for frame in frames:
            for seg in engine.ingest(frame):
                write_segment(out_fp, seg, include_embedding=emit_embeddings)
                out_fp.flush()
        flushed = engine.flush()
        for lvl in range(1, flushed.depth + 1):
            for seg in flushed.segments(lvl):
                if seg.provisional:
                    write_segment(out_fp, seg, include_embedding=emit_embeddings)
        out_fp.flush()
    finally:
        if args.out:
            out_fp.close()

    stats = engine.running_stats(flushed)
    stats_text = json.dumps(stats, sort_keys=True) + "\n"
    if args.stats:
        Path(args.stats).write_text(stats_text)
    elif args.out:
        sys.stdout.write(stats_text)
    else:
        sys.stderr.write(stats_text)
    return EXIT_OK


def cmd_consolidate(args: argparse.Namespace) -> int:
    cfg = resolve_config(config_file=args.config, flags=vars(args))
    records = load_records(args.hierarchy)
    stream_path = Path(args.stream)
    if not stream_path.exists():
        raise StreamFormatError(f"stream file not found: {stream_path}")
    _header, matrix = read_stream_array(stream_path)

    hierarchy = rebuild_hierarchy(records, matrix)
    if hierarchy.depth == 0:
        result_payload: dict = {"events": []}
        summaries = []
    else:
        attn_kwargs: dict = {}
        if args.scale is not None:
            attn_kwargs["scale"] = args.scale
        if cfg.get("checkpoint"):
            _state, attn = load_checkpoint(cfg["checkpoint"])
            if attn is not None:
                attn_kwargs.update(wq=attn["wq"], wk=attn["wk"], wv=attn["wv"])
        attention = AttentionConfig(**attn_kwargs)
        result = consolidate_all(
            hierarchy, attention, strategy=cfg["essential"], seed=int(cfg["seed"])
        )
        summaries = list(result.summaries)
        result_payload = {
            "events": [
                {
                    "span": list(s.event_span),
                    "abstract": [float(x) for x in s.abstract],
                    "coarse": [float(x) for x in s.coarse],
                    "fine": [float(x) for x in s.fine],
                    "essential_frames": prov["essential_frames"],
                }
                for s, prov in zip(result.summaries, result.provenance)
            ],
            "strategy": cfg["essential"],
        }

    text = json.dumps(result_payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)

    if args.emit_embs and summaries:
        dim = summaries[0].abstract.shape[0]
        rows = []
        for s in summaries:
            rows.extend([s.abstract, s.coarse, s.fine])
        frames = [FrameEmbedding(index=i, vector=v) for i, v in enumerate(rows)]
        with open(args.emit_embs, "wb") as fp:
            dump_stream(StreamHeader(dim=dim, frame_count=len(frames)), frames, fp)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(config_file=args.config, flags=vars(args))
    out_dir = Path(args.out_dir)
    kinds = ["clean", "drift"] if args.kind == "both" else [args.kind]

    if args.corpus:
        manifest, corpus = benchmod.load_manifest(args.corpus)
        bench_cfg = benchmod.BenchConfig(
            kind=manifest["kind"],
            streams=len(corpus),
            dim=manifest["dim"],
            frames=args.frames,
            seed=int(cfg["seed"]),
            levels=int(cfg["layers"]),
            threshold=parse_thresholds(cfg["threshold"], int(cfg["layers"]))[0],
            window_cap=int(cfg["window_cap"]),
            sim_threshold=args.sim_threshold,
            tolerance=args.tolerance,
        )
        report, timing = benchmod.run_benchmark(bench_cfg, corpus=corpus)
        benchmod.write_report(report, timing, out_dir)
        return EXIT_OK

    for kind in kinds:
        bench_cfg = benchmod.BenchConfig(
            kind=kind,
            streams=args.streams,
            dim=args.dim,
            frames=args.frames,
            seed=int(cfg["seed"]),
            levels=int(cfg["layers"]),
            threshold=parse_thresholds(cfg["threshold"], int(cfg["layers"]))[0],
            window_cap=int(cfg["window_cap"]),
            sim_threshold=args.sim_threshold,
            tolerance=args.tolerance,
        )
        target = out_dir / kind if len(kinds) > 1 else out_dir
        if args.write_corpus:
            benchmod.write_corpus(bench_cfg, target / "corpus")
        report, timing = benchmod.run_benchmark(bench_cfg)
        benchmod.write_report(report, timing, target)
        if args.dump_similarity > 0:
            for i in range(min(args.dump_similarity, bench_cfg.streams)):
                if kind == "clean":
                    spec = benchmod.clean_stream_spec(bench_cfg, i)
                else:
                    spec, _ = benchmod.drift_stream_spec(bench_cfg, i)
                from .synthetic import generate_stream  # noqa: PLC0415

                frames, _truth = generate_stream(spec)
                benchmod.dump_similarity_csv(frames, target / f"similarity_{i:04d}.csv")
    return EXIT_OK


def _collect_corpus(path_str: str) -> list:
    path = Path(path_str)
    if not path.exists():
        raise StreamFormatError(f"corpus not found: {path}")
    if path.is_dir():
        return sorted(path.glob("*.embs"))
    if path.suffix == ".json":
        manifest = json.loads(path.read_text())
        return [path.parent / item["embs"] for item in manifest["streams"]]
    return [path]


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(config_file=args.config, flags=vars(args))
    corpus = _collect_corpus(args.corpus)
    if not corpus:
        raise ConfigError("training corpus is empty")
    header, _frames = read_stream(corpus[0])
    predictor_cfg = PredictorConfig(
        kind=cfg["predictor"],
        dim=header.dim,
        levels=int(cfg["layers"]),
        window_cap=int(cfg["window_cap"]),
        hidden=int(cfg["hidden"]),
        learning_rate=float(cfg["learning_rate"]),
        seed=int(cfg["seed"]),
    )
    thresholds = parse_thresholds(cfg["threshold"], int(cfg["layers"]))
    state, losses = train_predictor(corpus, predictor_cfg, args.epochs, thresholds=thresholds)
    save_checkpoint(state, args.out)
    if args.loss_csv:
        lines = ["epoch,mean_loss"] + [f"{i},{loss!r}" for i, loss in enumerate(losses)]
        Path(args.loss_csv).write_text("\n".join(lines) + "\n")
    summary = {
        "epochs": args.epochs,
        "streams": len(corpus),
        "losses": losses,
        "skipped_updates": state.skipped_updates,
        "checkpoint": str(args.out),
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "segment": cmd_segment,
        "consolidate": cmd_consolidate,
        "bench": cmd_bench,
        "train": cmd_train,
    }
    try:
        return handlers[args.command](args)
    except MissingEmbeddingsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EMBEDDINGS
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StreamFormatError, FileNotFoundError, EesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
