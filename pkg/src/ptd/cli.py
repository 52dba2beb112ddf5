"""Command-line interface: prompts, generate, refine, metrics, tav, eval."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import evalsvc, grammar, metrics, orchestrate, refine, spectra, store
from .errors import PtdError


@click.group()
def main():
    """Texture dataset synthesis and curation toolkit."""


# ---------------------------------------------------------------- prompts

@main.group()
def prompts():
    """Descriptor grammar commands."""


@prompts.command("emit")
@click.option("--table", "table_file", type=click.Path(exists=True),
              default=None, help="JSON/TOML descriptor table; defaults to "
              "the built-in categories.")
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--templates", "n_templates", type=int, default=None,
              help="Replicate the default template N times (paper count "
              "needs 2).")
def prompts_emit(table_file, out_file, n_templates):
    """Enumerate every prompt to a JSON-lines manifest."""
    if table_file:
        table = grammar.DescriptorTable.from_file(table_file)
    else:
        table = grammar.DescriptorTable()
    if n_templates:
        base = table.templates[0]
        table = grammar.DescriptorTable(
            textures=table.textures, artistic=table.artistic,
            spatial=table.spatial, enhancer=table.enhancer,
            color=table.color,
            templates=tuple(base if i == 0 else base + " " * i
                            for i in range(n_templates)))
    n = grammar.write_prompt_manifest(grammar.enumerate_prompts(table),
                                      out_file)
    click.echo(f"wrote {n} prompts to {out_file}")


# --------------------------------------------------------------- generate

@main.command()
@click.option("--manifest", "prompt_file", required=True,
              type=click.Path(exists=True))
@click.option("--backend", "backend_url", default=None,
              help="Backend base URL; omit for the built-in mock.")
@click.option("--n", "n_keep", type=int, default=5)
@click.option("--max-attempts", type=int, default=25)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--workers", type=int, default=4)
@click.option("--size", type=int, default=512)
def generate(prompt_file, backend_url, n_keep, max_attempts, out_dir,
             workers, size):
    """Generate n unflagged images per prompt, retrying flagged outputs."""
    prompt_records = grammar.read_prompt_manifest(prompt_file)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if backend_url:
        backend = orchestrate.HttpBackend(backend_url)
    else:
        from .mockgen import MockBackend
        backend = MockBackend()
    records, ledger = orchestrate.run_generation(
        prompt_records, backend, n_keep=n_keep, max_attempts=max_attempts,
        width=size, height=size, out_dir=out / "images",
        quarantine_dir=out / "quarantine", workers=workers)
    store.write_manifest(records, out / "manifest.jsonl")
    store.write_ledger(ledger, out / "flag_ledger.jsonl")
    incomplete = sum(1 for r in records if r.status == "incomplete")
    click.echo(f"kept {sum(1 for r in records if r.status == 'kept')} "
               f"images, {len(ledger)} flags, {incomplete} incomplete "
               f"prompts")


@main.command("flagstats")
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", default=None, type=click.Path())
def flagstats(root, out_file):
    """Per-descriptor-word flag ratios from manifest + ledger."""
    root = Path(root)
    records = store.read_manifest(root / "manifest.jsonl")
    ledger_file = root / "flag_ledger.jsonl"
    ledger = store.read_ledger(ledger_file) if ledger_file.exists() else []
    rows = orchestrate.flag_rates_by_word(records, ledger)
    payload = json.dumps(rows, indent=2, ensure_ascii=False)
    if out_file:
        Path(out_file).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


# ----------------------------------------------------------------- verify

@main.command()
@click.option("--root", required=True, type=click.Path(exists=True))
def verify(root):
    """Cross-check manifest, ledger, features, and image files."""
    problems = store.verify_tree(root)
    for p in problems:
        click.echo(p, err=True)
    if problems:
        sys.exit(1)
    click.echo("ok")


# ----------------------------------------------------------------- refine

@main.command("refine")
@click.argument("stage", type=click.Choice(["freq", "patchvar", "clip",
                                            "all"]))
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--root", "image_root", default=None, type=click.Path(),
              help="Image root (defaults to the manifest's directory).")
@click.option("--features", "features_dir", default=None, type=click.Path(),
              help="Directory with clip_image.ptdf / clip_text.ptdf.")
@click.option("--keep", type=float, default=0.8)
@click.option("--workers", type=int, default=4)
@click.option("--balance", is_flag=True,
              help="Truncate every class to the smallest class size.")
def refine_cmd(stage, manifest_file, image_root, features_dir, keep,
               workers, balance):
    """Apply one refinement stage (or the whole cascade) in place."""
    manifest_path = Path(manifest_file)
    records = store.read_manifest(manifest_path)
    root = Path(image_root) if image_root else manifest_path.parent
    clip_image = clip_text = None
    if stage in ("clip", "all"):
        if not features_dir:
            raise click.UsageError("--features is required for CLIP "
                                   "filtering")
        clip_image = store.load_features(Path(features_dir)
                                         / "clip_image.ptdf")
        clip_text = store.load_features(Path(features_dir)
                                        / "clip_text.ptdf")
    try:
        if stage == "all":
            reports = refine.refine_all(
                records, root=root, clip_image=clip_image,
                clip_text=clip_text,
                fractions={s: keep for s in ("freq", "patchvar", "clip")},
                workers=workers)
        else:
            reports = [refine.run_stage(
                records, stage, keep, root=root, clip_image=clip_image,
                clip_text=clip_text, workers=workers)]
    except PtdError as exc:
        raise click.ClickException(str(exc))
    if balance:
        floor = refine.balance_classes(records)
        click.echo(f"balanced every class to {floor} images")
    store.write_manifest(records, manifest_path)
    for report in reports:
        click.echo(report.to_table())
        report_file = manifest_path.with_name(
            f"stage_report_{report.stage}.json")
        report_file.write_text(report.to_json() + "\n", encoding="utf-8")


# ---------------------------------------------------------------- metrics

@main.group("metrics")
def metrics_group():
    """Dataset quality metrics."""


def _load_manifest_opt(manifest_file):
    return store.read_manifest(manifest_file)


@metrics_group.command("is")
@click.option("--features", "features_file", required=True,
              type=click.Path(exists=True),
              help="inception_logits.ptdf file.")
@click.option("--splits", type=int, default=10)
def metrics_is(features_file, splits):
    logits = store.load_features(features_file)
    result = metrics.inception_score(logits.values, n_splits=splits)
    click.echo(json.dumps({"mean": result.mean, "std": result.std,
                           "n_splits": result.n_splits,
                           "scores": result.scores}))


@metrics_group.command("fid")
@click.option("--features", "features_file", required=True,
              type=click.Path(exists=True),
              help="inception_pool.ptdf for the dataset under test.")
@click.option("--reference", "reference_file", required=True,
              type=click.Path(exists=True),
              help="inception_pool.ptdf for the reference dataset.")
def metrics_fid(features_file, reference_file):
    a = metrics.FeatureStats.from_rows(
        store.load_features(features_file).values)
    b = metrics.FeatureStats.from_rows(
        store.load_features(reference_file).values)
    click.echo(json.dumps({"fid": metrics.fid(a, b)}))


@metrics_group.command("spectrum")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--root", "image_root", default=None, type=click.Path())
@click.option("--reference", "reference_dir", default=None,
              type=click.Path(exists=True),
              help="Directory of reference images for spectral distance.")
@click.option("--size", type=int, default=224,
              help="Common side length before the FFT.")
@click.option("--out", "out_prefix", required=True, type=click.Path())
def metrics_spectrum(manifest_file, image_root, reference_dir, size,
                     out_prefix):
    """Mean log-power map (PNG) and radial profile (CSV)."""
    from PIL import Image

    manifest_path = Path(manifest_file)
    root = Path(image_root) if image_root else manifest_path.parent
    records = store.read_manifest(manifest_path)
    paths = [root / r.file_path for r in records
             if r.is_live() and r.file_path]
    mean_map, profile, n = spectra.mean_log_power_map(paths, resize_to=size)

    out_prefix = Path(out_prefix)
    lo, hi = mean_map.min(), mean_map.max()
    scaled = ((mean_map - lo) / (hi - lo) * 255 if hi > lo
              else np.zeros_like(mean_map))
    Image.fromarray(scaled.astype(np.uint8)).save(
        out_prefix.with_suffix(".png"))
    with open(out_prefix.with_suffix(".csv"), "w", newline="\n") as fh:
        fh.write("k,power\n")
        for k, p in enumerate(profile):
            fh.write(f"{k},{p!r}\n")
    result = {"n_images": n}
    if reference_dir:
        ref_paths = sorted(p for p in Path(reference_dir).rglob("*")
                           if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
        _, ref_profile, _ = spectra.mean_log_power_map(ref_paths,
                                                       resize_to=size)
        result["spectral_distance"] = spectra.spectral_distance(profile,
                                                                ref_profile)
    click.echo(json.dumps(result))


@metrics_group.command("clipstats")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--k", type=int, default=5)
def metrics_clipstats(manifest_file, k):
    records = store.read_manifest(manifest_file)
    pairs = [(r.slots, r.stage_scores["clip"]) for r in records
             if r.status == "kept" and "clip" in r.stage_scores]
    rows = metrics.clip_stats_by_pair(pairs)
    click.echo(json.dumps(metrics.top_bottom_pairs(rows, k=k),
                          ensure_ascii=False, indent=2))


@metrics_group.command("curve")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--ratings", "ratings_file", required=True,
              type=click.Path(exists=True))
def metrics_curve(manifest_file, ratings_file):
    records = store.read_manifest(manifest_file)
    by_id = {r.image_id: r for r in records}
    log = evalsvc.RatingLog(ratings_file)
    effective = log.latest().values()
    pairs = [(r.image_id, r.representativeness) for r in effective]
    scores = {r.image_id: by_id[r.image_id].stage_scores["clip"]
              for r in effective}
    grid = [i / 20 for i in range(1, 21)]
    click.echo(json.dumps(
        {"points": metrics.human_vs_clip_curve(pairs, scores, grid)}))


# -------------------------------------------------------------------- tav

@main.command("tav")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--probs", "probs_file", required=True,
              type=click.Path(exists=True))
@click.option("--labels", "labels_file", required=True,
              type=click.Path(exists=True),
              help="One object label per line.")
@click.option("--top", "top_k", type=int, default=3)
@click.option("--out", "out_prefix", default=None, type=click.Path())
def tav_cmd(manifest_file, probs_file, labels_file, top_k, out_prefix):
    """Texture-object association table and top-k report."""
    from .tav import compute_tav, top_k_associations
    records = store.read_manifest(manifest_file)
    probs = store.load_features(probs_file)
    labels = [line.strip() for line in
              open(labels_file, encoding="utf-8") if line.strip()]
    table = compute_tav(records, probs, labels)
    top = top_k_associations(table, k=top_k)
    click.echo(json.dumps(top, ensure_ascii=False, indent=2))
    if out_prefix:
        prefix = Path(out_prefix)
        with open(prefix.with_suffix(".csv"), "w", newline="\n") as fh:
            fh.write("texture_class,object,value\n")
            for name, pairs in top.items():
                for label, value in pairs:
                    fh.write(f"{name},{label},{value!r}\n")
        prefix.with_suffix(".json").write_text(
            json.dumps(top, ensure_ascii=False) + "\n", encoding="utf-8")


# ------------------------------------------------------------------- eval

@main.group("eval")
def eval_group():
    """Human evaluation commands."""


@eval_group.command("assign")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--n", "n_participants", type=int, default=9)
@click.option("--per", "images_per", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_file", required=True, type=click.Path())
def eval_assign(manifest_file, n_participants, images_per, seed, out_file):
    """Create disjoint rater assignments from the pre-refinement pool."""
    records = store.read_manifest(manifest_file)
    pool = [r.image_id for r in records if r.status == "kept"]
    sessions = evalsvc.create_sessions(pool, n_participants, images_per,
                                       seed=seed)
    evalsvc.write_sessions(sessions, out_file)
    click.echo(f"wrote {len(sessions)} sessions to {out_file}")


@eval_group.command("serve")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--sessions", "sessions_file", required=True,
              type=click.Path(exists=True))
@click.option("--ratings", "ratings_file", required=True,
              type=click.Path())
@click.option("--root", "image_root", default=None, type=click.Path())
@click.option("--port", type=int, default=8008)
@click.option("--texture-only", is_flag=True,
              help="Show raters the texture class instead of the full "
              "prompt.")
def eval_serve(manifest_file, sessions_file, ratings_file, image_root,
               port, texture_only):
    """Serve the rating API (and session images) over HTTP."""
    import uvicorn
    manifest_path = Path(manifest_file)
    records = store.read_manifest(manifest_path)
    state = evalsvc.EvalState(
        records_by_id={r.image_id: r for r in records},
        sessions={s.session_id: s
                  for s in evalsvc.read_sessions(sessions_file)},
        log=evalsvc.RatingLog(ratings_file),
        image_root=Path(image_root) if image_root else manifest_path.parent,
        show_full_prompt=not texture_only)
    uvicorn.run(evalsvc.build_app(state), host="0.0.0.0", port=port)


@eval_group.command("report")
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True))
@click.option("--ratings", "ratings_file", required=True,
              type=click.Path(exists=True))
def eval_report(manifest_file, ratings_file):
    """Mean scores per cumulative refinement bucket."""
    records = store.read_manifest(manifest_file)
    log = evalsvc.RatingLog(ratings_file)
    rows = evalsvc.aggregate_by_stage(
        log.latest().values(), {r.image_id: r for r in records})
    gains = evalsvc.relative_improvement(rows)
    click.echo(json.dumps({"stages": rows, **gains}, indent=2))
