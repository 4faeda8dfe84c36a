"""Pluggable abstraction and next-token prediction heads.

Three reference kinds:

* ``mean_pool_identity`` - zero-parameter baseline: abstraction is the
  arithmetic mean of the window, prediction is the current latent unchanged
  (persistence). Every segmentation decision is hand-checkable.
* ``linear_ar`` - affine map on the concatenation of the level-1..l latents.
* ``mlp`` - one hidden tanh layer on the same concatenation; the abstraction
  head applies a d-to-d MLP to the window mean.

Training is online L2 regression of the predicted next token against the
observed one; the boundary metric stays cosine distance regardless of kind.
All parameters are float64 in memory and float32 in checkpoints.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import ConfigError, DegenerateVectorError, StreamFormatError
from .types import LatentToken

KINDS = ("mean_pool_identity", "linear_ar", "mlp")

CHECKPOINT_MAGIC = b"EESP"
CHECKPOINT_VERSION = 1
_CKPT_STRUCT = struct.Struct("<4sIIIIIIqdI")


@dataclass(frozen=True)
class PredictorConfig:
    kind: str = "mean_pool_identity"
    dim: int = 0
    levels: int = 3
    window_cap: int = 32
    hidden: int = 16
    learning_rate: float = 1e-2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown predictor kind {self.kind!r}, expected one of {KINDS}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if self.window_cap < 1:
            raise ConfigError(f"window_cap must be >= 1, got {self.window_cap}")
        if self.kind == "mlp" and self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1 for mlp, got {self.hidden}")
        if self.kind != "mean_pool_identity" and self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")


def _uniform_block(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class PredictorState:
    """Parameter blocks plus running loss statistics, owned by one engine.

    ``psi[l]`` holds the prediction head for level l+1 (0-based list),
    ``phi[l]`` the abstraction head (mlp kind only). Initialization draws
    blocks from a single seeded generator in a fixed order, so identical
    configs yield bit-identical parameters.
    """

    config: PredictorConfig
    phi: list[dict[str, np.ndarray]] = field(default_factory=list)
    psi: list[dict[str, np.ndarray]] = field(default_factory=list)
    loss_sum: list[float] = field(default_factory=list)
    loss_count: list[int] = field(default_factory=list)
    skipped_updates: int = 0

    @classmethod
    def initialize(cls, config: PredictorConfig) -> "PredictorState":
        rng = np.random.default_rng(config.seed)
        d, hidden = config.dim, config.hidden
        phi: list[dict[str, np.ndarray]] = []
        psi: list[dict[str, np.ndarray]] = []
        for level in range(1, config.levels + 1):
            if config.kind == "mlp":
                phi.append(
                    {
                        "w1": _uniform_block(rng, (hidden, d), d),
                        "b1": _uniform_block(rng, (hidden,), d),
                        "w2": _uniform_block(rng, (d, hidden), hidden),
                        "b2": _uniform_block(rng, (d,), hidden),
                    }
                )
            else:
                phi.append({})
            in_dim = level * d
            if config.kind == "linear_ar":
                psi.append(
                    {
                        "w": _uniform_block(rng, (d, in_dim), in_dim),
                        "b": _uniform_block(rng, (d,), in_dim),
                    }
                )
            elif config.kind == "mlp":
                psi.append(
                    {
                        "w1": _uniform_block(rng, (hidden, in_dim), in_dim),
                        "b1": _uniform_block(rng, (hidden,), in_dim),
                        "w2": _uniform_block(rng, (d, hidden), hidden),
                        "b2": _uniform_block(rng, (d,), hidden),
                    }
                )
            else:
                psi.append({})
        return cls(
            config=config,
            phi=phi,
            psi=psi,
            loss_sum=[0.0] * config.levels,
            loss_count=[0] * config.levels,
        )

    def reset_loss_stats(self) -> None:
        self.loss_sum = [0.0] * self.config.levels
        self.loss_count = [0] * self.config.levels

    def mean_loss(self) -> float:
        total = sum(self.loss_sum)
        count = sum(self.loss_count)
        return total / count if count else float("nan")

    def clone(self) -> "PredictorState":
        return PredictorState(
            config=self.config,
            phi=[{k: v.copy() for k, v in block.items()} for block in self.phi],
            psi=[{k: v.copy() for k, v in block.items()} for block in self.psi],
            loss_sum=list(self.loss_sum),
            loss_count=list(self.loss_count),
            skipped_updates=self.skipped_updates,
        )


def _vectors(window: Sequence[LatentToken | np.ndarray | Sequence[float]]) -> np.ndarray:
    rows = [tok.vector if isinstance(tok, LatentToken) else np.asarray(tok, dtype=np.float64) for tok in window]
    return np.stack(rows)


def _mlp_forward(block: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    hidden = np.tanh(block["w1"] @ x + block["b1"])
    return block["w2"] @ hidden + block["b2"]


def abstract(
    level: int,
    window: Sequence[LatentToken | np.ndarray | Sequence[float]],
    state: PredictorState,
) -> np.ndarray:
    """Map a window of same-level tokens to one summary vector."""
    if len(window) == 0:
        raise ValueError("abstract: empty window")
    if len(window) > state.config.window_cap:
        raise ValueError(
            f"abstract: window length {len(window)} exceeds cap {state.config.window_cap}"
        )
    if not 1 <= level <= state.config.levels:
        raise ValueError(f"abstract: level {level} outside [1, {state.config.levels}]")
    rows = _vectors(window)
    if rows.shape[1] != state.config.dim:
        raise ValueError(f"abstract: dimension mismatch {rows.shape[1]} != {state.config.dim}")
    mean = rows.mean(axis=0)
    if state.config.kind == "mlp":
        return _mlp_forward(state.phi[level - 1], mean)
    return mean


def predict_next(
    level: int,
    current_latents: Sequence[np.ndarray],
    state: PredictorState,
) -> np.ndarray:
    """Predict the next level-``level`` token from the latents of levels 1..level."""
    if len(current_latents) != level:
        raise ValueError(
            f"predict_next: expected {level} latents (levels 1..{level}), got {len(current_latents)}"
        )
    latents = [np.asarray(z, dtype=np.float64) for z in current_latents]
    for z in latents:
        if z.shape != (state.config.dim,):
            raise ValueError(f"predict_next: latent shape {z.shape} != ({state.config.dim},)")
    if state.config.kind == "mean_pool_identity":
        # Persistence: the level's own latent, lower levels intentionally unused.
        return latents[level - 1]
    x = np.concatenate(latents)
    block = state.psi[level - 1]
    if state.config.kind == "linear_ar":
        return block["w"] @ x + block["b"]
    return _mlp_forward(block, x)


def prediction_error(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Cosine distance 1 - cos(predicted, actual), in [0, 2]."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise ValueError(f"prediction_error: shape mismatch {p.shape} vs {a.shape}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise DegenerateVectorError("prediction_error: non-finite input")
    np_norm = float(np.linalg.norm(p))
    na_norm = float(np.linalg.norm(a))
    if np_norm < 1e-12 or na_norm < 1e-12:
        raise DegenerateVectorError("prediction_error: zero vector input")
    cos = float(np.dot(p, a) / (np_norm * na_norm))
    cos = min(1.0, max(-1.0, cos))
    return 1.0 - cos


def online_update(
    level: int,
    input_latents: Sequence[np.ndarray],
    observed_next: np.ndarray,
    state: PredictorState,
) -> PredictorState:
    """One SGD step on ||predict_next(...) - observed||^2; no-op for the
    parameter-free kind. Non-finite gradients skip the step and bump
    ``skipped_updates``. Returns the (mutated) state."""
    cfg = state.config
    y = np.asarray(observed_next, dtype=np.float64)
    if cfg.kind == "mean_pool_identity":
        pred = predict_next(level, input_latents, state)
        state.loss_sum[level - 1] += float(np.sum((pred - y) ** 2))
        state.loss_count[level - 1] += 1
        return state

    latents = [np.asarray(z, dtype=np.float64) for z in input_latents]
    x = np.concatenate(latents)
    block = state.psi[level - 1]
    lr = cfg.learning_rate

    if cfg.kind == "linear_ar":
        pred = block["w"] @ x + block["b"]
        residual = pred - y
        loss = float(np.sum(residual**2))
        grad_w = 2.0 * np.outer(residual, x)
        grad_b = 2.0 * residual
        if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_b))):
            state.skipped_updates += 1
        else:
            block["w"] -= lr * grad_w
            block["b"] -= lr * grad_b
    else:  # mlp
        pre = block["w1"] @ x + block["b1"]
        hidden = np.tanh(pre)
        pred = block["w2"] @ hidden + block["b2"]
        residual = pred - y
        loss = float(np.sum(residual**2))
        d_out = 2.0 * residual
        grad_w2 = np.outer(d_out, hidden)
        grad_b2 = d_out
        d_hidden = block["w2"].T @ d_out
        d_pre = d_hidden * (1.0 - hidden**2)
        grad_w1 = np.outer(d_pre, x)
        grad_b1 = d_pre
        grads = (grad_w1, grad_b1, grad_w2, grad_b2)
        if not all(np.all(np.isfinite(g)) for g in grads):
            state.skipped_updates += 1
        else:
            block["w1"] -= lr * grad_w1
            block["b1"] -= lr * grad_b1
            block["w2"] -= lr * grad_w2
            block["b2"] -= lr * grad_b2

    state.loss_sum[level - 1] += loss
    state.loss_count[level - 1] += 1
    return state


def prediction_loss_gradients(
    level: int,
    input_latents: Sequence[np.ndarray],
    observed_next: np.ndarray,
    state: PredictorState,
) -> dict[str, np.ndarray]:
    """Analytic gradients of the squared prediction loss, without updating.

    Exposed for gradient verification against finite differences.
    """
    cfg = state.config
    x = np.concatenate([np.asarray(z, dtype=np.float64) for z in input_latents])
    y = np.asarray(observed_next, dtype=np.float64)
    block = state.psi[level - 1]
    if cfg.kind == "linear_ar":
        residual = block["w"] @ x + block["b"] - y
        return {"w": 2.0 * np.outer(residual, x), "b": 2.0 * residual}
    if cfg.kind == "mlp":
        pre = block["w1"] @ x + block["b1"]
        hidden = np.tanh(pre)
        residual = block["w2"] @ hidden + block["b2"] - y
        d_out = 2.0 * residual
        d_pre = (block["w2"].T @ d_out) * (1.0 - hidden**2)
        return {
            "w1": np.outer(d_pre, x),
            "b1": d_pre,
            "w2": np.outer(d_out, hidden),
            "b2": d_out,
        }
    raise ConfigError("gradients undefined for the parameter-free kind")


def train_predictor(
    corpus: Sequence, config: PredictorConfig, epochs: int, *, thresholds=None
) -> tuple[PredictorState, list[float]]:
    """Replay EMBS streams through the segmentation loop with online updates.

    ``corpus`` entries are anything :func:`ees.embs.read_stream` accepts.
    Returns the final state and the per-epoch mean loss. Epoch 0 (no
    training) returns the freshly initialized state and an empty loss list.
    """
    from .embs import read_stream  # noqa: PLC0415
    from .engine import EngineConfig, EventEngine  # noqa: PLC0415 - avoids an import cycle

    if len(corpus) == 0:
        raise ConfigError("train_predictor: empty corpus")
    if epochs < 0:
        raise ConfigError(f"train_predictor: epochs must be >= 0, got {epochs}")

    state = PredictorState.initialize(config)
    losses: list[float] = []
    for _ in range(epochs):
        state.reset_loss_stats()
        for source in corpus:
            header, frames = read_stream(source)
            if header.dim != config.dim:
                raise StreamFormatError(
                    f"train_predictor: stream dim {header.dim} != config dim {config.dim}"
                )
            engine_cfg = EngineConfig(
                dim=config.dim,
                levels=config.levels,
                thresholds=thresholds if thresholds is not None else 0.4,
                window_cap=config.window_cap,
                predictor=config,
                online_learning=True,
            )
            engine = EventEngine(engine_cfg, predictor_state=state, retain_segments=False)
            for frame in frames:
                engine.ingest(frame)
        losses.append(state.mean_loss())
    return state, losses


_KIND_CODES = {name: i for i, name in enumerate(KINDS)}
_CODE_KINDS = {i: name for name, i in _KIND_CODES.items()}


def _block_order(config: PredictorConfig) -> list[tuple[str, int, str, tuple[int, ...]]]:
    """Deterministic (group, level, name, shape) order of checkpoint blocks."""
    d, hidden = config.dim, config.hidden
    order: list[tuple[str, int, str, tuple[int, ...]]] = []
    for level in range(1, config.levels + 1):
        if config.kind == "mlp":
            order += [
                ("phi", level, "w1", (hidden, d)),
                ("phi", level, "b1", (hidden,)),
                ("phi", level, "w2", (d, hidden)),
                ("phi", level, "b2", (d,)),
            ]
        in_dim = level * d
        if config.kind == "linear_ar":
            order += [("psi", level, "w", (d, in_dim)), ("psi", level, "b", (d,))]
        elif config.kind == "mlp":
            order += [
                ("psi", level, "w1", (hidden, in_dim)),
                ("psi", level, "b1", (hidden,)),
                ("psi", level, "w2", (d, hidden)),
                ("psi", level, "b2", (d,)),
            ]
    return order


def save_checkpoint(
    state: PredictorState,
    path: str | Path | BinaryIO,
    attention: dict[str, np.ndarray] | None = None,
) -> None:
    """Write an EESP checkpoint: 48-byte header, then float32 LE parameter
    blocks in :func:`_block_order`, then optional q/k/v projection matrices."""
    cfg = state.config
    header = _CKPT_STRUCT.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        _KIND_CODES[cfg.kind],
        cfg.dim,
        cfg.levels,
        cfg.window_cap,
        cfg.hidden,
        cfg.seed,
        cfg.learning_rate,
        1 if attention else 0,
    )
    own = isinstance(path, (str, Path))
    fp: BinaryIO = open(path, "wb") if own else path  # type: ignore[assignment]
    try:
        fp.write(header)
        for group, level, name, shape in _block_order(cfg):
            block = (state.phi if group == "phi" else state.psi)[level - 1][name]
            assert block.shape == shape
            fp.write(block.astype("<f4").tobytes())
        if attention:
            for key in ("wq", "wk", "wv"):
                mat = np.asarray(attention[key], dtype=np.float64)
                if mat.shape != (cfg.dim, cfg.dim):
                    raise ConfigError(f"attention matrix {key} must be {cfg.dim}x{cfg.dim}")
                fp.write(mat.astype("<f4").tobytes())
    finally:
        if own:
            fp.close()


def load_checkpoint(
    path: str | Path | BinaryIO,
) -> tuple[PredictorState, dict[str, np.ndarray] | None]:
    own = isinstance(path, (str, Path))
    fp: BinaryIO = open(path, "rb") if own else path  # type: ignore[assignment]
    try:
        raw = fp.read(_CKPT_STRUCT.size)
        if len(raw) < _CKPT_STRUCT.size:
            raise StreamFormatError("checkpoint header truncated")
        magic, version, kind_code, dim, levels, window_cap, hidden, seed, lr, has_attn = (
            _CKPT_STRUCT.unpack(raw)
        )
        if magic != CHECKPOINT_MAGIC:
            raise StreamFormatError(f"bad checkpoint magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise StreamFormatError(f"unsupported checkpoint version {version}")
        if kind_code not in _CODE_KINDS:
            raise StreamFormatError(f"unknown predictor kind code {kind_code}")
        config = PredictorConfig(
            kind=_CODE_KINDS[kind_code],
            dim=dim,
            levels=levels,
            window_cap=window_cap,
            hidden=hidden,
            learning_rate=lr,
            seed=seed,
        )
        state = PredictorState.initialize(config)
        for group, level, name, shape in _block_order(config):
            count = int(np.prod(shape))
            chunk = fp.read(count * 4)
            if len(chunk) < count * 4:
                raise StreamFormatError(f"checkpoint truncated in block {group}{level}.{name}")
            block = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
            (state.phi if group == "phi" else state.psi)[level - 1][name] = block
        attention = None
        if has_attn:
            attention = {}
            for key in ("wq", "wk", "wv"):
                chunk = fp.read(dim * dim * 4)
                if len(chunk) < dim * dim * 4:
                    raise StreamFormatError(f"checkpoint truncated in attention block {key}")
                attention[key] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(dim, dim)
        return state, attention
    finally:
        if own:
            fp.close()
