"""Deterministic stand-ins for the real models.

Everything is derived from sha256 of the inputs, so responses are
bit-identical across machines and process restarts.  Texture variants
span the refinement filters' dynamic range: flat fields, value noise,
checkerboards, and gratings.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

TEXTURE_VARIANTS = ("grating", "noise", "checker", "flat")


def _hash(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode())
    return int.from_bytes(digest.digest()[:8], "little")


def render_texture(prompt_text: str, seed: int, width: int,
                   height: int) -> np.ndarray:
    h = _hash(prompt_text, seed)
    variant = TEXTURE_VARIANTS[h % len(TEXTURE_VARIANTS)]
    rng = np.random.default_rng(h)
    if variant == "flat":
        level = 1 + (h >> 8) % 255
        return np.full((height, width, 3), level, dtype=np.uint8)
    if variant == "noise":
        return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    if variant == "checker":
        cell = 8 + (h >> 8) % 56
        yy, xx = np.indices((height, width))
        board = ((yy // cell + xx // cell) % 2) * 255
        return np.repeat(board[..., None], 3, axis=2).astype(np.uint8)
    cycles = 2 + (h >> 8) % 30
    angle = ((h >> 16) % 360) * np.pi / 180.0
    yy, xx = np.indices((height, width))
    phase = 2 * np.pi * cycles * (
        np.cos(angle) * xx / width + np.sin(angle) * yy / height)
    wave = (127.5 * (1 + np.cos(phase))).astype(np.uint8)
    return np.stack([wave, np.roll(wave, 1, axis=0),
                     np.roll(wave, 1, axis=1)], axis=2)


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def _pseudo_vector(key: bytes, dim: int) -> np.ndarray:
    """Deterministic float32 vector seeded by a content hash."""
    seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    return rng.standard_normal(dim).astype(np.float32)


def embed_image(png_bytes: bytes, kind: str, dim: int) -> np.ndarray:
    vec = _pseudo_vector(kind.encode() + b":" + png_bytes, dim)
    if kind in ("clip_image", "clip_text"):
        return vec / np.linalg.norm(vec)
    if kind == "classifier_probs":
        exp = np.exp(vec - vec.max())
        return (exp / exp.sum()).astype(np.float32)
    return vec  # inception_pool / inception_logits: any finite values


def embed_text(text: str, dim: int) -> np.ndarray:
    vec = _pseudo_vector(b"clip_text:" + text.encode(), dim)
    return vec / np.linalg.norm(vec)
