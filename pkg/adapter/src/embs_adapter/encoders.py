"""Image encoders producing per-frame token grids.

Every encoder returns, for one RGB image, a dict with ``patch_tokens``
(shape (n_patches, dim)) and ``cls_token`` (shape (dim,)); pooling to a
single vector happens in the extraction step.

Identifiers:

* ``local`` or ``local-<dim>`` - the built-in deterministic patch-projection
  encoder. It projects each 16x16 patch of the 224x224 input through a
  seeded random matrix; random projections approximately preserve distances,
  so visually distinct content maps to distinct embeddings without any
  pretrained weights. Good enough to demo segmentation on real footage,
  not a semantic model.
* ``hf:<model-id>`` - a transformers vision model from the local cache
  (never downloads). Requires the ``hf`` extra.
"""

from __future__ import annotations

import numpy as np

from .errors import EncoderLoadError

_IMAGE_SIZE = 224
_PATCH = 16


class PatchProjectionEncoder:
    """Seeded random-projection encoder over a 14x14 patch grid."""

    def __init__(self, dim: int = 256, seed: int = 0) -> None:
        if dim < 1:
            raise EncoderLoadError(f"encoder dim must be >= 1, got {dim}")
        self.dim = dim
        rng = np.random.default_rng(seed)
        n_in = _PATCH * _PATCH * 3
        scale = 1.0 / np.sqrt(n_in)
        self._w_patch = rng.normal(0.0, scale, size=(n_in, dim))
        self._w_cls = rng.normal(0.0, scale, size=(n_in, dim))

    def encode(self, image_rgb: np.ndarray) -> dict[str, np.ndarray]:
        import cv2  # noqa: PLC0415 - heavy import kept local

        resized = cv2.resize(image_rgb, (_IMAGE_SIZE, _IMAGE_SIZE), interpolation=cv2.INTER_AREA)
        pixels = resized.astype(np.float64) / 127.5 - 1.0
        grid = _IMAGE_SIZE // _PATCH
        patches = (
            pixels.reshape(grid, _PATCH, grid, _PATCH, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(grid * grid, _PATCH * _PATCH * 3)
        )
        patch_tokens = patches @ self._w_patch
        # global token: the whole image average-pooled down to one patch
        pooled = pixels.reshape(grid, _PATCH, grid, _PATCH, 3).mean(axis=(0, 2)).reshape(-1)
        cls_token = pooled @ self._w_cls
        return {"patch_tokens": patch_tokens, "cls_token": cls_token}


class HfEncoder:
    """Wrapper around a locally cached transformers vision model."""

    def __init__(self, model_id: str) -> None:
        try:
            import torch  # noqa: PLC0415
            from transformers import AutoImageProcessor, AutoModel  # noqa: PLC0415
        except ImportError as exc:
            raise EncoderLoadError(
                f"encoder load failure for {model_id!r}: transformers/torch not installed "
                "(install the 'hf' extra)"
            ) from exc
        try:
            self._processor = AutoImageProcessor.from_pretrained(model_id, local_files_only=True)
            self._model = AutoModel.from_pretrained(model_id, local_files_only=True)
        except Exception as exc:
            raise EncoderLoadError(
                f"encoder load failure for {model_id!r}: {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.hidden_size)

    def encode(self, image_rgb: np.ndarray) -> dict[str, np.ndarray]:
        inputs = self._processor(images=image_rgb, return_tensors="pt")
        with self._torch.no_grad():
            hidden = self._model(**inputs).last_hidden_state[0].numpy().astype(np.float64)
        return {"patch_tokens": hidden[1:], "cls_token": hidden[0]}


def load_encoder(identifier: str):
    """Resolve an encoder identifier; raises :class:`EncoderLoadError` for
    unknown names or models that are not available locally."""
    if identifier == "local":
        return PatchProjectionEncoder()
    if identifier.startswith("local-"):
        try:
            dim = int(identifier.split("-", 1)[1])
        except ValueError as exc:
            raise EncoderLoadError(f"bad local encoder spec {identifier!r}") from exc
        return PatchProjectionEncoder(dim=dim)
    if identifier.startswith("hf:"):
        return HfEncoder(identifier[3:])
    raise EncoderLoadError(
        f"unknown encoder {identifier!r}; expected 'local', 'local-<dim>' or 'hf:<model-id>'"
    )
