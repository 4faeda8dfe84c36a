"""Desk-scale segmentation benchmark: streaming engine vs two baselines.

Two corpus kinds, both 100 streams of 120 frames at d=64 by default:

* ``clean`` - instantaneous scene changes, shared noise level. Used for
  boundary-recovery scoring against the planted truth.
* ``drift`` - heterogeneous per-scene noise, within-scene drift, and smooth
  multi-frame transitions between scenes. No single adjacent-frame
  similarity threshold handles all of it, which is what the cohesion
  comparison probes.

Reports are split into a deterministic part (report.json / report.csv,
byte-stable for a given seed) and a wall-clock part (timing.json).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .baselines import baseline_cluster_segment, baseline_threshold_segment
from .embs import dump_stream, read_stream_array
from .engine import EngineConfig, EventEngine, hierarchy_stats
from .errors import ConfigError
from .metrics import boundary_f1, cohesion_metrics, spans_to_boundaries
from .synthetic import GroundTruth, SegmentSpec, SynthSpec, generate_stream
from .types import FrameEmbedding, StreamHeader

CORPUS_KINDS = ("clean", "drift")


@dataclass(frozen=True)
class BenchConfig:
    kind: str = "clean"
    streams: int = 100
    dim: int = 64
    frames: int = 120
    seed: int = 0
    levels: int = 3
    threshold: float = 0.4
    window_cap: int = 32
    sim_threshold: float = 0.7
    tolerance: int = 1

    def __post_init__(self) -> None:
        if self.kind not in CORPUS_KINDS:
            raise ConfigError(f"unknown corpus kind {self.kind!r}, expected one of {CORPUS_KINDS}")
        if self.streams < 1:
            raise ConfigError("streams must be >= 1")
        if self.frames < 20:
            raise ConfigError("streams shorter than 20 frames make no scenes")


def _partition(total: int, parts: int, rng: np.random.Generator, minimum: int) -> list[int]:
    """Random composition of ``total`` into ``parts`` parts, each >= minimum."""
    if parts * minimum > total:
        raise ConfigError(f"cannot split {total} frames into {parts} scenes of >= {minimum}")
    slack = total - parts * minimum
    cuts = np.sort(rng.integers(0, slack + 1, size=parts - 1)) if parts > 1 else np.array([], dtype=int)
    sizes = np.diff(np.concatenate([[0], cuts, [slack]]))
    return [minimum + int(s) for s in sizes]


def stream_seed(base_seed: int, index: int) -> int:
    return base_seed * 100_003 + index


def clean_stream_spec(cfg: BenchConfig, index: int) -> SynthSpec:
    """4-7 scenes (fewer on short streams), sigma 0.05, instantaneous
    transitions."""
    seed = stream_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    hi = max(2, min(7, cfg.frames // 8))
    scenes = int(rng.integers(min(4, hi), hi + 1))
    lengths = _partition(cfg.frames, scenes, rng, minimum=8)
    segments = [SegmentSpec(length=n, noise_sigma=0.05) for n in lengths]
    return SynthSpec(dim=cfg.dim, segments=tuple(segments), seed=seed, max_centroid_cos=0.2)


def drift_stream_spec(cfg: BenchConfig, index: int) -> tuple[SynthSpec, int]:
    """Content scenes with heterogeneous noise and drift, joined by smooth
    multi-frame transitions. Returns the spec and the content-scene count."""
    seed = stream_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    transition_len = 6
    min_scene = 10
    hi = max(2, min(5, (cfg.frames + transition_len) // (min_scene + transition_len)))
    scenes = int(rng.integers(min(3, hi), hi + 1))
    budget = cfg.frames - (scenes - 1) * transition_len
    lengths = _partition(budget, scenes, rng, minimum=min_scene)

    # Draw the scene centroids here so transitions can aim at the next one.
    centroids = []
    for _ in range(scenes):
        for _attempt in range(10_000):
            cand = rng.standard_normal(cfg.dim)
            cand /= np.linalg.norm(cand)
            if all(float(cand @ c) <= 0.2 for c in centroids):
                centroids.append(cand)
                break
        else:
            raise ConfigError("could not separate drift-corpus centroids")

    segments: list[SegmentSpec] = []
    for i, n in enumerate(lengths):
        sigma = float(rng.uniform(0.25, 0.6))
        drift = float(rng.uniform(0.004, 0.015))
        segments.append(
            SegmentSpec(
                length=n,
                centroid=tuple(float(x) for x in centroids[i]),
                noise_sigma=sigma,
                drift_rate=drift,
            )
        )
        if i + 1 < scenes:
            step = (centroids[i + 1] - centroids[i]) / transition_len
            segments.append(
                SegmentSpec(
                    length=transition_len,
                    centroid=tuple(float(x) for x in centroids[i]),
                    noise_sigma=0.02,
                    drift_rate=float(np.linalg.norm(step)),
                    drift_direction=tuple(float(x) for x in step / np.linalg.norm(step)),
                )
            )
    spec = SynthSpec(dim=cfg.dim, segments=tuple(segments), seed=seed, max_centroid_cos=0.2)
    return spec, scenes


def ees_level1_spans(
    frames: list[FrameEmbedding], cfg: BenchConfig
) -> tuple[list[tuple[int, int]], dict]:
    """Run the engine over the frames; level-1 spans (flush included) and
    hierarchy stats."""
    engine = EventEngine(
        EngineConfig(
            dim=cfg.dim,
            levels=cfg.levels,
            thresholds=cfg.threshold,
            window_cap=cfg.window_cap,
        )
    )
    for frame in frames:
        engine.ingest(frame)
    hierarchy = engine.flush()
    spans = [(s.start_frame, s.end_frame) for s in hierarchy.segments(1)]
    return sorted(spans), hierarchy_stats(hierarchy)


def evaluate_stream(
    frames: list[FrameEmbedding],
    truth: GroundTruth,
    cfg: BenchConfig,
    *,
    cluster_k: int,
    seed: int,
) -> tuple[dict, float]:
    """Score all three methods on one stream; returns (record, ees_seconds)."""
    t0 = time.perf_counter()
    ees_spans, stats = ees_level1_spans(frames, cfg)
    ees_elapsed = time.perf_counter() - t0

    thr_spans = baseline_threshold_segment(frames, cfg.sim_threshold)
    clu_spans = baseline_cluster_segment(frames, k=cluster_k, seed=seed)

    record: dict = {"frames": len(frames), "true_boundaries": len(truth.boundary_frames)}
    for name, spans in (("ees", ees_spans), ("threshold", thr_spans), ("cluster", clu_spans)):
        f1 = boundary_f1(spans_to_boundaries(spans), truth, tolerance=cfg.tolerance)
        cohesion = cohesion_metrics(frames, spans)
        record[name] = {
            "segments": len(spans),
            "precision": f1["precision"],
            "recall": f1["recall"],
            "f1": f1["f1"],
            "intra": cohesion["mean_intra_similarity"],
            "inter": cohesion["mean_inter_similarity"],
            "gap": cohesion["gap"],
        }
    record["ees"]["compression_ratio"] = stats["compression_ratio"]
    record["ees"]["token_counts"] = stats["token_counts"]
    return record, ees_elapsed


def _gap_or_worst(entry: dict) -> float:
    gap = entry.get("gap")
    return gap if gap is not None else float("-inf")


def aggregate(records: list[dict]) -> dict:
    def mean_of(name: str, key: str) -> float | None:
        values = [r[name][key] for r in records if r[name].get(key) is not None]
        return float(np.mean(values)) if values else None

    out: dict = {}
    for name in ("ees", "threshold", "cluster"):
        out[name] = {
            "mean_f1": mean_of(name, "f1"),
            "mean_precision": mean_of(name, "precision"),
            "mean_recall": mean_of(name, "recall"),
            "mean_gap": mean_of(name, "gap"),
            "mean_segments": mean_of(name, "segments"),
        }
    out["ees"]["mean_compression_ratio"] = mean_of("ees", "compression_ratio")
    n = len(records)
    out["ees"]["gap_win_rate_vs_threshold"] = (
        sum(_gap_or_worst(r["ees"]) > _gap_or_worst(r["threshold"]) for r in records) / n
    )
    out["ees"]["gap_win_rate_vs_cluster"] = (
        sum(_gap_or_worst(r["ees"]) > _gap_or_worst(r["cluster"]) for r in records) / n
    )
    return out


def run_benchmark(cfg: BenchConfig, corpus: list[dict] | None = None) -> tuple[dict, dict]:
    """Execute the benchmark; returns (deterministic report, timing).

    ``corpus`` entries, when given, come from :func:`load_manifest`;
    otherwise streams are generated in memory from the config seed.
    """
    records: list[dict] = []
    timings: list[dict] = []
    for i in range(cfg.streams if corpus is None else len(corpus)):
        if corpus is None:
            if cfg.kind == "clean":
                spec = clean_stream_spec(cfg, i)
                scenes = len(spec.segments)
            else:
                spec, scenes = drift_stream_spec(cfg, i)
            frames, truth = generate_stream(spec)
            seed = spec.seed
        else:
            entry = corpus[i]
            frames = entry["frames"]
            truth = entry["truth"]
            scenes = entry["scenes"]
            seed = entry["seed"]
        record, elapsed = evaluate_stream(frames, truth, cfg, cluster_k=scenes, seed=seed)
        record = {"id": i, "seed": seed, "scenes": scenes, **record}
        records.append(record)
        timings.append({"id": i, "ees_seconds": elapsed})
    report = {
        "config": asdict(cfg),
        "metadata": {
            "similarity_statistic": "mean pairwise cosine within segments",
            "inter_statistic": "mean pairwise cosine between adjacent segments",
            "undefined_gap_policy": "a method with fewer than 2 segments scores worst",
            "cluster_k": "true content-scene count per stream",
        },
        "aggregate": aggregate(records),
        "streams": records,
    }
    timing = {"per_stream": timings, "total_ees_seconds": float(sum(t["ees_seconds"] for t in timings))}
    return report, timing


def write_report(report: dict, timing: dict, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report_json": out / "report.json",
        "report_csv": out / "report.csv",
        "timing_json": out / "timing.json",
    }
    paths["report_json"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    paths["timing_json"].write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")

    columns = ["id", "seed", "scenes", "method", "segments", "precision", "recall", "f1", "intra", "inter", "gap"]
    lines = [",".join(columns)]
    for rec in report["streams"]:
        for method in ("ees", "threshold", "cluster"):
            row = [str(rec["id"]), str(rec["seed"]), str(rec["scenes"]), method]
            for key in columns[4:]:
                value = rec[method].get(key)
                row.append("" if value is None else f"{value:.6f}" if isinstance(value, float) else str(value))
            lines.append(",".join(row))
    paths["report_csv"].write_text("\n".join(lines) + "\n")
    return paths


def dump_similarity_csv(frames: list[FrameEmbedding], path: str | Path) -> None:
    """Cosine matrix of one stream as CSV, for plotting similarity figures."""
    data = np.stack([f.vector for f in frames])
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    unit = data / np.where(norms < 1e-12, 1.0, norms)
    sims = unit @ unit.T
    with open(path, "w", encoding="utf-8") as fp:
        for row in sims:
            fp.write(",".join(f"{x:.6f}" for x in row))
            fp.write("\n")


# -- corpus files ---------------------------------------------------------


def write_corpus(cfg: BenchConfig, out_dir: str | Path) -> Path:
    """Materialize the generated corpus as EMBS + truth files and a manifest."""
    out = Path(out_dir)
    streams_dir = out / "streams"
    streams_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(cfg.streams):
        if cfg.kind == "clean":
            spec = clean_stream_spec(cfg, i)
            scenes = len(spec.segments)
        else:
            spec, scenes = drift_stream_spec(cfg, i)
        frames, truth = generate_stream(spec)
        embs_rel = f"streams/{i:04d}.embs"
        truth_rel = f"streams/{i:04d}.truth.json"
        with open(out / embs_rel, "wb") as fp:
            dump_stream(StreamHeader(dim=cfg.dim, frame_count=len(frames)), frames, fp)
        (out / truth_rel).write_text(
            json.dumps(
                {
                    "boundary_frames": list(truth.boundary_frames),
                    "segment_ids": list(truth.segment_ids),
                    "scenes": scenes,
                    "seed": spec.seed,
                },
                separators=(",", ":"),
            )
            + "\n"
        )
        entries.append({"id": i, "embs": embs_rel, "truth": truth_rel, "scenes": scenes, "seed": spec.seed})
    manifest = {"kind": cfg.kind, "dim": cfg.dim, "seed": cfg.seed, "streams": entries}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_manifest(path: str | Path) -> tuple[dict, list[dict]]:
    """Read a corpus manifest; returns (manifest, loaded stream entries)."""
    manifest_path = Path(path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    entries = []
    for item in manifest["streams"]:
        _header, matrix = read_stream_array(base / item["embs"])
        truth_raw = json.loads((base / item["truth"]).read_text())
        truth = GroundTruth(
            boundary_frames=tuple(truth_raw["boundary_frames"]),
            segment_ids=tuple(truth_raw["segment_ids"]),
        )
        frames = [FrameEmbedding(index=i, vector=row) for i, row in enumerate(matrix)]
        entries.append(
            {
                "id": item["id"],
                "frames": frames,
                "truth": truth,
                "scenes": item["scenes"],
                "seed": item["seed"],
            }
        )
    return manifest, entries


__all__ = [
    "BenchConfig",
    "run_benchmark",
    "write_report",
    "write_corpus",
    "load_manifest",
    "clean_stream_spec",
    "drift_stream_spec",
    "dump_similarity_csv",
]
