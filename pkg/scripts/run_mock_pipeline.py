#!/usr/bin/env python3
"""End-to-end dry run on the procedural mock backend.

Enumerates a reduced prompt table, generates images with a scripted flag
schedule, refines with the standard 0.8/0.8/0.8 cascade over synthetic
CLIP embeddings, and prints the stage reports plus flag analytics.

Usage: python3 scripts/run_mock_pipeline.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from ptd import mockgen, orchestrate, refine, store
from ptd.grammar import DescriptorTable, enumerate_prompts


def main(out_dir="mock_run"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    table = DescriptorTable(
        textures=("woven", "paisley", "scaly", "striped"),
        artistic=("", "minimal"), spatial=("",),
        enhancer=("", "vivid"), color=("", "red"))
    prompts = list(enumerate_prompts(table))
    print(f"{len(prompts)} prompts")

    backend = mockgen.MockBackend(
        flag_schedule=mockgen.flag_words("paisley"))
    records, ledger = orchestrate.run_generation(
        prompts, backend, n_keep=5, width=128, height=128,
        out_dir=out / "images", quarantine_dir=out / "quarantine",
        workers=4)
    kept = [r for r in records if r.status == "kept"]
    print(f"kept {len(kept)} images, {len(ledger)} flagged attempts")

    rng = np.random.default_rng(0)
    img_rows = rng.normal(size=(len(kept), 16))
    img_rows /= np.linalg.norm(img_rows, axis=1, keepdims=True)
    txt_rows = rng.normal(size=(len(prompts), 16))
    txt_rows /= np.linalg.norm(txt_rows, axis=1, keepdims=True)
    features = out / "features"
    features.mkdir(exist_ok=True)
    store.write_features(
        "clip_image", img_rows.astype(np.float32),
        {r.image_id: i for i, r in enumerate(kept)},
        features / "clip_image.ptdf")
    store.write_features(
        "clip_text", txt_rows.astype(np.float32),
        {p.prompt_id: i for i, p in enumerate(prompts)},
        features / "clip_text.ptdf")

    reports = refine.refine_all(
        records, root=out / "images",
        clip_image=store.load_features(features / "clip_image.ptdf"),
        clip_text=store.load_features(features / "clip_text.ptdf"),
        workers=4)
    for report in reports:
        print()
        print(report.to_table())

    store.write_manifest(records, out / "manifest.jsonl")
    store.write_ledger(ledger, out / "flag_ledger.jsonl")

    print("\nworst flagged descriptor words:")
    for row in orchestrate.flag_rates_by_word(records, ledger)[:5]:
        print(f"  {row['word']:<12} prompt ratio "
              f"{row['prompt_flag_ratio']:.2f}  image ratio "
              f"{row['image_flag_ratio']:.2f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
