"""Generation orchestration: per-prompt retry loop, quarantine, analytics.

The orchestrator asks a backend for images until it holds ``n_keep``
unflagged ones per prompt.  Flagged attempts are appended to the flag
ledger and their pixels quarantined; they never enter the dataset.
"""

from __future__ import annotations

import base64
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, TransportError
from .grammar import PromptRecord
from .store import FlagLedgerEntry, ImageRecord

# Seed schedule: seed = prompt_id * SEED_STRIDE + attempt.  Reruns and
# worker counts cannot change which seed an attempt gets.
SEED_STRIDE = 1_000_003
# image_id = prompt_id * IMAGE_ID_STRIDE + attempt; the attempt budget
# (n_keep * max_attempts) must stay below the stride.
IMAGE_ID_STRIDE = 1_000

DEFAULT_N_KEEP = 5
DEFAULT_MAX_ATTEMPTS = 25
DEFAULT_SIZE = 512


@dataclass
class GenResult:
    seed: int
    png_bytes: bytes
    flagged: bool


class HttpBackend:
    """Client for the JSON-over-HTTP generation protocol."""

    def __init__(self, base_url: str, retries: int = 3,
                 timeout: float = 120.0):
        import httpx
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self._client = httpx.Client(timeout=timeout)

    def generate(self, prompt_text: str, seeds: list[int], width: int,
                 height: int) -> list[GenResult]:
        import httpx
        payload = {"prompt_text": prompt_text, "seeds": seeds,
                   "width": width, "height": height}
        last_exc = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(f"{self.base_url}/v1/generate",
                                         json=payload)
                resp.raise_for_status()
                break
            except httpx.HTTPError as exc:
                last_exc = exc
                time.sleep(min(2.0 ** attempt, 10.0))
        else:
            raise TransportError(
                f"backend {self.base_url} unreachable after "
                f"{self.retries} tries: {last_exc}")
        results = resp.json()["results"]
        return [GenResult(seed=r["seed"],
                          png_bytes=base64.b64decode(r["png_base64"]),
                          flagged=bool(r["nsfw_flagged"]))
                for r in results]


@dataclass
class PromptOutcome:
    records: list[ImageRecord]
    ledger: list[FlagLedgerEntry]
    incomplete: bool


def generate_for_prompt(prompt: PromptRecord, backend, n_keep: int =
                        DEFAULT_N_KEEP,
                        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                        width: int = DEFAULT_SIZE,
                        height: int = DEFAULT_SIZE,
                        out_dir=None, quarantine_dir=None) -> PromptOutcome:
    """Generate until n_keep unflagged images exist for one prompt.

    The attempt budget is ``n_keep * max_attempts``; if it runs out the
    prompt is marked incomplete rather than silently short.
    """
    if n_keep < 1:
        raise ConfigError("n_keep must be >= 1")
    budget = n_keep * max_attempts
    if budget >= IMAGE_ID_STRIDE:
        raise ConfigError(
            f"attempt budget {budget} exceeds image id stride")

    kept: list[ImageRecord] = []
    ledger: list[FlagLedgerEntry] = []
    attempt = 0
    while len(kept) < n_keep and attempt < budget:
        batch = min(n_keep - len(kept), budget - attempt)
        seeds = [prompt.prompt_id * SEED_STRIDE + attempt + i + 1
                 for i in range(batch)]
        results = backend.generate(prompt.text, seeds, width, height)
        for offset, result in enumerate(results):
            this_attempt = attempt + offset + 1
            image_id = prompt.prompt_id * IMAGE_ID_STRIDE + this_attempt
            if result.flagged:
                ledger.append(FlagLedgerEntry(
                    prompt_id=prompt.prompt_id, seed=result.seed,
                    attempt=this_attempt, timestamp=time.time()))
                if quarantine_dir is not None:
                    _save_png(result.png_bytes, Path(quarantine_dir),
                              prompt.texture_class, image_id)
                continue
            rel_path = ""
            if out_dir is not None:
                rel_path = _save_png(result.png_bytes, Path(out_dir),
                                     prompt.texture_class, image_id)
            kept.append(ImageRecord(
                image_id=image_id, prompt_id=prompt.prompt_id,
                seed=result.seed, attempt=this_attempt, flagged=False,
                file_path=rel_path, width=width, height=height,
                texture_class=prompt.texture_class, slots=prompt.slots(),
                prompt_text=prompt.text))
        attempt += batch

    incomplete = len(kept) < n_keep
    if incomplete:
        kept.append(ImageRecord(
            image_id=prompt.prompt_id * IMAGE_ID_STRIDE,
            prompt_id=prompt.prompt_id, seed=-1, attempt=attempt,
            flagged=False, file_path="", width=width, height=height,
            texture_class=prompt.texture_class, slots=prompt.slots(),
            prompt_text=prompt.text, status="incomplete",
            exclude_reason=f"attempt budget {budget} exhausted"))
    return PromptOutcome(records=kept, ledger=ledger, incomplete=incomplete)


def _save_png(png_bytes: bytes, root: Path, texture_class: str,
              image_id: int) -> str:
    rel = Path(texture_class) / f"{image_id}.png"
    target = root / rel
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(png_bytes)
    return str(rel)


def run_generation(prompts, backend, n_keep: int = DEFAULT_N_KEEP,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                   width: int = DEFAULT_SIZE, height: int = DEFAULT_SIZE,
                   out_dir=None, quarantine_dir=None, workers: int = 1):
    """Generate for many prompts; output order is by prompt, not worker.

    Returns ``(records, ledger_entries)`` sorted by (prompt_id, attempt),
    so manifests are byte-identical for any worker count.
    """
    prompts = sorted(prompts, key=lambda p: p.prompt_id)

    def run_one(prompt):
        return generate_for_prompt(
            prompt, backend, n_keep=n_keep, max_attempts=max_attempts,
            width=width, height=height, out_dir=out_dir,
            quarantine_dir=quarantine_dir)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, prompts))
    else:
        outcomes = [run_one(p) for p in prompts]

    records: list[ImageRecord] = []
    ledger: list[FlagLedgerEntry] = []
    for outcome in outcomes:
        records.extend(outcome.records)
        ledger.extend(outcome.ledger)
    records.sort(key=lambda r: (r.prompt_id, r.attempt, r.image_id))
    ledger.sort(key=lambda e: (e.prompt_id, e.attempt))
    return records, ledger


def flag_rates_by_word(records, ledger) -> list[dict]:
    """Per-descriptor-word flag ratios, sorted worst-first.

    image_flag_ratio: flagged attempts containing the word over all
    attempts containing it.  prompt_flag_ratio: prompts containing the
    word with at least one flag over all prompts containing it.
    """
    words_by_prompt: dict[int, list[str]] = {}
    kept_by_prompt: dict[int, int] = {}
    for rec in records:
        if rec.prompt_id not in words_by_prompt:
            words_by_prompt[rec.prompt_id] = [
                w for w in rec.slots.values() if w]
        if rec.status == "kept":
            kept_by_prompt[rec.prompt_id] = (
                kept_by_prompt.get(rec.prompt_id, 0) + 1)

    flags_by_prompt: dict[int, int] = {}
    for entry in ledger:
        if entry.prompt_id not in words_by_prompt:
            raise ConfigError(
                f"ledger prompt_id {entry.prompt_id} missing from manifest")
        flags_by_prompt[entry.prompt_id] = (
            flags_by_prompt.get(entry.prompt_id, 0) + 1)

    stats: dict[str, dict] = {}
    for prompt_id, words in words_by_prompt.items():
        flags = flags_by_prompt.get(prompt_id, 0)
        attempts = kept_by_prompt.get(prompt_id, 0) + flags
        for word in words:
            s = stats.setdefault(word, {"attempts": 0, "flagged": 0,
                                        "prompts": 0, "flagged_prompts": 0})
            s["attempts"] += attempts
            s["flagged"] += flags
            s["prompts"] += 1
            s["flagged_prompts"] += 1 if flags else 0

    rows = []
    for word, s in stats.items():
        rows.append({
            "word": word,
            "image_flag_ratio": (s["flagged"] / s["attempts"]
                                 if s["attempts"] else 0.0),
            "prompt_flag_ratio": s["flagged_prompts"] / s["prompts"],
            "attempts": s["attempts"],
            "flagged_attempts": s["flagged"],
            "prompts": s["prompts"],
            "flagged_prompts": s["flagged_prompts"],
        })
    rows.sort(key=lambda r: (-r["prompt_flag_ratio"], r["word"]))
    return rows
