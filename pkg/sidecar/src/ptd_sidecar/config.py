"""Backend configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class BackendConfig:
    """Server mode and model selection.

    The safety filter is report-only in every mode: flagged results keep
    their pixels and carry ``nsfw_flagged: true``.  In mock mode no model
    weights are ever loaded.
    """

    mode: str = "mock"  # "mock" | "real"
    diffusion_model: str = "stable-diffusion-v1-5"
    clip_model: str = "clip-vit-base-patch32"
    inception_model: str = "inception-v3"
    classifier_model: str = "resnet50"
    device: str = "cpu"
    # mock-only: which generated outputs report a safety flag
    flag_schedule: str = "none"  # "none" | "odd_seeds" | "words:<w1,w2>"
    embed_dim: int = 512
    logit_dim: int = 1000

    def __post_init__(self):
        if self.mode not in ("mock", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_file(cls, path) -> "BackendConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def should_flag(self, prompt_text: str, seed: int) -> bool:
        if self.flag_schedule == "none":
            return False
        if self.flag_schedule == "odd_seeds":
            return seed % 2 == 1
        if self.flag_schedule.startswith("words:"):
            words = set(self.flag_schedule[len("words:"):].split(","))
            return bool(words & set(prompt_text.split()))
        raise ValueError(f"unknown flag schedule {self.flag_schedule!r}")
