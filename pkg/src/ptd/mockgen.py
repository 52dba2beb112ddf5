"""Deterministic in-process procedural backend for tests and dry runs.

Textures deliberately span the filter cascade's dynamic range: flat
fields sit at the low-frequency / low-variance tail, value noise at the
high-frequency tail, gratings and checkerboards in between.  Everything
derives from integer hashes of (prompt, seed), so output is identical
across machines and worker counts.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

from .orchestrate import GenResult

VARIANTS = ("grating", "noise", "checker", "flat")


def _hash(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode())
    return int.from_bytes(digest.digest()[:8], "little")


def render_texture(prompt_text: str, seed: int, width: int,
                   height: int) -> np.ndarray:
    """Procedural RGB texture, uint8 HxWx3."""
    h = _hash(prompt_text, seed)
    variant = VARIANTS[h % len(VARIANTS)]
    rng = np.random.default_rng(h)
    if variant == "flat":
        level = 1 + (h >> 8) % 255  # never all-black: keep DC energy > 0
        img = np.full((height, width, 3), level, dtype=np.uint8)
    elif variant == "noise":
        img = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    elif variant == "checker":
        cell = 8 + (h >> 8) % 56
        yy, xx = np.indices((height, width))
        board = ((yy // cell + xx // cell) % 2) * 255
        img = np.repeat(board[..., None], 3, axis=2).astype(np.uint8)
    else:
        cycles = 2 + (h >> 8) % 30
        angle = ((h >> 16) % 360) * np.pi / 180.0
        yy, xx = np.indices((height, width))
        phase = 2 * np.pi * cycles * (
            np.cos(angle) * xx / width + np.sin(angle) * yy / height)
        wave = (127.5 * (1 + np.cos(phase))).astype(np.uint8)
        img = np.stack([wave, np.roll(wave, 1, axis=0),
                        np.roll(wave, 1, axis=1)], axis=2)
    return img


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


class MockBackend:
    """Procedural generator honoring the backend interface.

    ``flag_schedule(prompt_text, seed, attempt_ordinal) -> bool`` decides
    which outputs carry the safety flag; flagged outputs still include
    their pixels, mirroring a report-only filter.
    """

    def __init__(self, flag_schedule=None):
        self.flag_schedule = flag_schedule or (lambda *a: False)
        # (prompt_text, seed) -> running per-prompt attempt ordinal
        self._counts: dict[str, int] = {}

    def generate(self, prompt_text: str, seeds, width: int,
                 height: int) -> list[GenResult]:
        results = []
        for seed in seeds:
            pixels = render_texture(prompt_text, seed, width, height)
            flagged = bool(self.flag_schedule(prompt_text, seed,
                                              self._ordinal(prompt_text)))
            results.append(GenResult(seed=seed,
                                     png_bytes=encode_png(pixels),
                                     flagged=flagged))
        return results

    def _ordinal(self, prompt_text: str) -> int:
        n = self._counts.get(prompt_text, 0)
        self._counts[prompt_text] = n + 1
        return n


def flag_odd_seeds(prompt_text, seed, ordinal) -> bool:
    return seed % 2 == 1


def flag_words(*words):
    """Schedule flagging the first attempt of prompts containing a word."""
    wordset = set(words)

    def schedule(prompt_text, seed, ordinal):
        return ordinal == 0 and bool(wordset & set(prompt_text.split()))
    return schedule
