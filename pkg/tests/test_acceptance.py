"""Acceptance suite: one test per release criterion, stated tolerances pinned.

Each test prints a single PASS/FAIL line (straight to the real stdout so it
survives pytest capture) and then asserts.
"""

import json
import subprocess
import sys
import textwrap
import time

import numpy as np
import pytest

from ees import (
    EngineConfig,
    EventEngine,
    FrameEmbedding,
    PredictorConfig,
    PredictorState,
    hierarchy_stats,
    prediction_error,
)
from ees.bench import BenchConfig, run_benchmark
from ees.cli import main as cli_main
from ees.consolidation import consolidate_all
from ees.embs import write_stream
from ees.predictors import predict_next, prediction_loss_gradients
from ees.synthetic import SegmentSpec, SynthSpec, generate_stream, nested_synth_spec
from ees.types import StreamHeader

from conftest import build_random_hierarchy, make_frames, oracle_consolidate_top


@pytest.fixture
def report(capsys):
    """Announce one criterion verdict on the real stdout, then assert."""

    def _report(number: int, ok: bool, label: str, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE {number:>2} {status}: {label}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return _report


# 1 ---------------------------------------------------------------------------


def test_criterion_1_error_metric_exactness(report):
    t0 = time.perf_counter()
    exact = (
        abs(prediction_error([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]) - 0.0) < 1e-12
        and abs(prediction_error([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - 1.0) < 1e-12
        and abs(prediction_error([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]) - 2.0) < 1e-12
        and abs(prediction_error([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]) - 2.0) < 1e-12
    )
    rng = np.random.default_rng(11)
    in_bounds = True
    for _ in range(10_000):
        d = int(rng.integers(2, 16))
        a = rng.normal(size=d)
        b = rng.normal(size=d)
        e = prediction_error(a, b)
        if not 0.0 <= e <= 2.0:
            in_bounds = False
            break
    elapsed = time.perf_counter() - t0
    report(
        1,
        exact and in_bounds and elapsed < 1.0,
        "cosine distance exact at 0/1/2 and bounded on 10k random pairs",
        f"{elapsed:.2f}s",
    )


# 2 ---------------------------------------------------------------------------


def _emissions(rows, dim):
    engine = EventEngine(EngineConfig(dim=dim, levels=3, thresholds=0.4))
    out = []
    for i, row in enumerate(rows):
        segs = engine.ingest(FrameEmbedding(index=i, vector=row))
        out.append(
            json.dumps(
                [[s.level, s.start_frame, s.end_frame, s.essential_frame, s.peak_error] for s in segs]
            ).encode()
        )
    return out


def test_criterion_2_causality_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    dim = 16
    ok = True
    for _ in range(100):
        scenes = int(rng.integers(2, 6))
        spec = SynthSpec(
            dim=dim,
            segments=tuple(
                SegmentSpec(length=int(rng.integers(8, 25)), noise_sigma=0.1) for _ in range(scenes)
            ),
            seed=int(rng.integers(0, 2**31)),
        )
        frames, _ = generate_stream(spec)
        rows = [f.vector for f in frames]
        t = int(rng.integers(3, len(rows) - 1))
        full = _emissions(rows, dim)
        prefix = _emissions(rows[:t], dim)
        mutated = rows[:t] + [rng.normal(size=dim) for _ in range(len(rows) - t)]
        tampered = _emissions(mutated, dim)
        if not (full[:t] == prefix == tampered[:t]):
            ok = False
            break
    elapsed = time.perf_counter() - t0
    report(
        2,
        ok and elapsed < 30.0,
        "emitted segments for a prefix are byte-identical under future truncation/mutation",
        f"100 streams, {elapsed:.1f}s",
    )


# 3 ---------------------------------------------------------------------------


def test_criterion_3_clean_boundary_recovery(report):
    t0 = time.perf_counter()
    cfg = BenchConfig(kind="clean", streams=100, dim=64, frames=120, seed=0, threshold=0.4)
    result, _ = run_benchmark(cfg)
    mean_f1 = result["aggregate"]["ees"]["mean_f1"]
    elapsed = time.perf_counter() - t0
    report(
        3,
        mean_f1 >= 0.95 and elapsed < 60.0,
        "boundary F1 >= 0.95 on the 100-stream clean corpus (tolerance +-1 frame)",
        f"F1={mean_f1:.4f}, {elapsed:.1f}s",
    )


# 4 ---------------------------------------------------------------------------


def test_criterion_4_cohesion_beats_baselines(tmp_path, report):
    t0 = time.perf_counter()
    cfg = BenchConfig(kind="drift", streams=100, dim=64, frames=120, seed=0, threshold=0.4)
    result, timing = run_benchmark(cfg)
    wins_thr = result["aggregate"]["ees"]["gap_win_rate_vs_threshold"]
    wins_clu = result["aggregate"]["ees"]["gap_win_rate_vs_cluster"]
    archive = tmp_path / "cohesion_report.json"
    archive.write_text(json.dumps(result, indent=2, sort_keys=True))
    elapsed = time.perf_counter() - t0
    report(
        4,
        wins_thr >= 0.80 and wins_clu >= 0.60 and elapsed < 300.0,
        "cohesion gap beats the threshold baseline on >=80% and the cluster baseline on >=60% of streams",
        f"thr {wins_thr:.0%}, cluster {wins_clu:.0%}, report {archive.name}, {elapsed:.1f}s",
    )


# 5 ---------------------------------------------------------------------------


def test_criterion_5_elasticity(report):
    spec, _ = nested_synth_spec(
        dim=32, chapters=[[12, 13, 12], [13, 12, 13], [12, 13]], seed=5, noise_sigma=0.05
    )
    frames, _ = generate_stream(spec)
    rows = [f.vector for f in frames]

    def top_tokens(rows):
        engine = EventEngine(EngineConfig(dim=32, levels=3, thresholds=0.4))
        for i, row in enumerate(rows):
            engine.ingest(FrameEmbedding(index=i, vector=row))
        return hierarchy_stats(engine.flush())["token_counts"][3]

    grows = top_tokens(rows) >= top_tokens(rows[:60])

    monotone = True
    cfg = BenchConfig(kind="clean", streams=100, dim=64, frames=120, seed=0)
    from ees.bench import clean_stream_spec

    for i in range(cfg.streams):
        frames, _ = generate_stream(clean_stream_spec(cfg, i))
        engine = EventEngine(EngineConfig(dim=64, levels=3, thresholds=0.4))
        for frame in frames:
            engine.ingest(frame)
        counts = hierarchy_stats(engine.flush())["token_counts"]
        if not counts[1] >= counts[2] >= counts[3]:
            monotone = False
            break
    report(
        5,
        grows and monotone,
        "level-3 token count grows with stream length; per-level counts non-increasing on every stream",
    )


# 6 ---------------------------------------------------------------------------


def test_criterion_6_consolidation_matches_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    ok = True
    for case in range(200):
        depth = int(rng.integers(1, 4))
        hierarchy, plain = build_random_hierarchy(rng, dim=6, max_leaves=50, depth=depth)
        result = consolidate_all(hierarchy)
        tops = hierarchy.top_segments()
        for i, summary in enumerate(result.summaries):
            expected = oracle_consolidate_top(plain, i, dim=6)
            if not np.allclose(summary.abstract, expected["abstract"], atol=1e-6):
                ok = False
            if not np.allclose(summary.coarse, expected["coarse"], atol=1e-7):
                ok = False
            if not np.array_equal(summary.fine, expected["fine"]):
                ok = False
            if not any(summary.fine is tok.vector for tok in tops[i].tokens):
                ok = False
        if not ok:
            break
    elapsed = time.perf_counter() - t0
    report(
        6,
        ok and elapsed < 30.0,
        "consolidation matches the brute-force subtree oracle on 200 random hierarchies",
        f"{elapsed:.1f}s",
    )


# 7 ---------------------------------------------------------------------------


def test_criterion_7_mlp_gradient_check(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        hidden = int(rng.integers(2, 6))
        level = int(rng.integers(1, 3))
        state = PredictorState.initialize(
            PredictorConfig(
                kind="mlp", dim=dim, levels=level, hidden=hidden, seed=int(rng.integers(0, 2**31))
            )
        )
        # move off the initialization manifold
        for name, arr in state.psi[level - 1].items():
            state.psi[level - 1][name] = arr + rng.normal(0, 0.3, size=arr.shape)
        latents = [rng.normal(size=dim) for _ in range(level)]
        target = rng.normal(size=dim)
        analytic = prediction_loss_gradients(level, latents, target, state)

        def loss():
            pred = predict_next(level, latents, state)
            return float(np.sum((pred - target) ** 2))

        for name in ("w1", "b1", "w2", "b2"):
            block = state.psi[level - 1][name]
            flat = block.reshape(-1)
            numeric = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss()
                flat[i] = orig - h
                down = loss()
                flat[i] = orig
                numeric[i] = (up - down) / (2 * h)
            a = analytic[name].reshape(-1)
            rel = np.abs(a - numeric) / np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-6)
            worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    report(
        7,
        worst < 1e-4 and elapsed < 30.0,
        "analytic mlp gradients match central differences (h=1e-5) at 100 random points",
        f"worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


# 8 ---------------------------------------------------------------------------


_RSS_PROBE = textwrap.dedent(
    """
    import resource, sys
    import numpy as np
    from ees import EngineConfig, EventEngine, FrameEmbedding

    n = int(sys.argv[1])
    rng = np.random.default_rng(0)
    base = rng.normal(size=512); base /= np.linalg.norm(base)
    other = rng.normal(size=512); other /= np.linalg.norm(other)
    engine = EventEngine(EngineConfig(dim=512, levels=3, thresholds=0.4), retain_segments=False)
    for i in range(n):
        c = base if (i // 400) % 2 == 0 else other
        v = c + rng.normal(0, 0.02 / np.sqrt(512), size=512)
        engine.ingest(FrameEmbedding(index=i, vector=v))
    print(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)
    """
)


def test_criterion_8_throughput_and_bounded_memory(tmp_path, report):
    rng = np.random.default_rng(0)
    centroids = rng.normal(size=(10, 512))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    frames = []
    for i in range(10_000):
        c = centroids[(i // 1000) % 10]
        v = c + rng.normal(0, 0.05 / np.sqrt(512), size=512)
        frames.append(FrameEmbedding(index=i, vector=v))
    engine = EventEngine(EngineConfig(dim=512, levels=3, thresholds=0.4), retain_segments=False)
    t0 = time.perf_counter()
    for frame in frames:
        engine.ingest(frame)
    elapsed = time.perf_counter() - t0

    probe = tmp_path / "rss_probe.py"
    probe.write_text(_RSS_PROBE)
    rss = {}
    for n in (1_000, 100_000):
        out = subprocess.run(
            [sys.executable, str(probe), str(n)], capture_output=True, text=True, check=True
        )
        rss[n] = int(out.stdout)
    ratio = rss[100_000] / rss[1_000]
    report(
        8,
        elapsed < 2.0 and ratio < 1.2,
        "10k frames at d=512 ingested in under 2s; peak RSS flat from 1k to 100k frames",
        f"{elapsed:.2f}s, rss ratio {ratio:.3f}",
    )


# 9 ---------------------------------------------------------------------------


def test_criterion_9_cli_determinism(tmp_path, report):
    rows = []
    rng = np.random.default_rng(5)
    centroids = rng.normal(size=(4, 16))
    for i in range(80):
        rows.append(centroids[i // 20] + rng.normal(0, 0.01, size=16))
    stream = tmp_path / "in.embs"
    stream.write_bytes(write_stream(StreamHeader(dim=16, frame_count=80), make_frames(rows)))

    seg_outputs = []
    for run in ("a", "b"):
        out = tmp_path / f"seg_{run}.jsonl"
        stats = tmp_path / f"stats_{run}.json"
        code = cli_main(
            ["segment", str(stream), "--out", str(out), "--stats", str(stats), "--seed", "3",
             "--emit-embeddings"]
        )
        assert code == 0
        seg_outputs.append(out.read_bytes() + stats.read_bytes())
    segment_ok = seg_outputs[0] == seg_outputs[1]

    bench_outputs = []
    for run in ("a", "b"):
        out_dir = tmp_path / f"bench_{run}"
        code = cli_main(
            ["bench", "--kind", "both", "--streams", "12", "--frames", "80",
             "--seed", "4", "--out-dir", str(out_dir)]
        )
        assert code == 0
        bench_outputs.append(
            (out_dir / "clean" / "report.json").read_bytes()
            + (out_dir / "clean" / "report.csv").read_bytes()
            + (out_dir / "drift" / "report.json").read_bytes()
            + (out_dir / "drift" / "report.csv").read_bytes()
        )
    bench_ok = bench_outputs[0] == bench_outputs[1]
    report(
        9,
        segment_ok and bench_ok,
        "segment and bench outputs are byte-identical across reruns with fixed seeds",
    )
