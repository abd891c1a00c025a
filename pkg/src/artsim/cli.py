"""Command-line interface.

Subcommand groups: gen (particle / coordinate images), filter (filter
libraries applied to photos), corpus (config-driven dataset + index
builds), index (build / query a search index), serve (HTTP service) and
eval (trials, reports, pilot summaries).
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import click

from .corpus import (
    DatasetManifest,
    build_abstract_dataset,
    build_filtered_dataset,
    build_palette_dataset,
    import_external_dataset,
    index_corpus,
    random_palettes,
)
from .features import DescriptorConfig, DescriptorExtractor, load_external_embeddings
from .filtertree import apply_filter, filter_to_sexpr, random_filter_library
from .imagegen import (
    CanvasSpec,
    LineTransform,
    TRANSFORM_KINDS,
    genome_to_text,
    random_coordinate_trees,
    random_genome,
    render_coordinate_image,
    render_particle_image,
    to_sexpr,
)
from .raster import RasterImage


def _parse_size(value: str) -> tuple[int, int]:
    try:
        w, h = value.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise click.BadParameter(f"expected WxH, got {value!r}") from None


def _derive(seed: int, i: int) -> int:
    return (seed * 1_000_003 + i) & (2 ** 63 - 1)


@click.group()
def main():
    """Generative art corpora with visual-similarity retrieval."""


# ----------------------------------------------------------------------
# gen
# ----------------------------------------------------------------------

@main.group()
def gen():
    """Generate abstract images."""


@gen.command("particle")
@click.option("--seed", type=int, required=True)
@click.option("--count", type=int, default=1)
@click.option("--size", default="256x256", help="canvas as WxH")
@click.option("--transform", "transform_kind", default="identity",
              type=click.Choice(TRANSFORM_KINDS))
@click.option("--particles", type=int, default=1000)
@click.option("--timesteps", type=int, default=100)
@click.option("--blur", type=int, default=1)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def gen_particle(seed, count, size, transform_kind, particles, timesteps, blur, out):
    """Render particle-trail images plus genome sidecars."""
    w, h = _parse_size(size)
    canvas = CanvasSpec(w, h, particle_count=particles, timesteps=timesteps, blur_radius=blur)
    transform = LineTransform(transform_kind)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        genome = random_genome(_derive(seed, i))
        img = render_particle_image(genome, canvas, transform)
        stem = f"particle_{seed}_{i:05d}"
        img.save(out_dir / f"{stem}.png")
        (out_dir / f"{stem}.genome").write_text(genome_to_text(genome), encoding="utf-8")
        click.echo(f"{stem}.png")


@gen.command("coord")
@click.option("--seed", type=int, required=True)
@click.option("--count", type=int, default=1)
@click.option("--size", default="256x256", help="canvas as WxH")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def gen_coord(seed, count, size, out):
    """Render per-pixel coordinate-function images plus tree sidecars."""
    w, h = _parse_size(size)
    canvas = CanvasSpec(w, h, particle_count=1, timesteps=1)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        trees = random_coordinate_trees(_derive(seed, i))
        img = render_coordinate_image(*trees, canvas)
        stem = f"coord_{seed}_{i:05d}"
        img.save(out_dir / f"{stem}.png")
        sidecar = "".join(f"{ch} {to_sexpr(t)}\n" for ch, t in zip("rgb", trees))
        (out_dir / f"{stem}.trees").write_text(sidecar, encoding="utf-8")
        click.echo(f"{stem}.png")


# ----------------------------------------------------------------------
# filter
# ----------------------------------------------------------------------

@main.group("filter")
def filter_group():
    """Generate and apply image filter libraries."""


@filter_group.command("build")
@click.option("--seed", type=int, required=True)
@click.option("--count", type=int, default=1000)
@click.option("--max-depth", type=int, default=8)
@click.option("--sources", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def filter_build(seed, count, max_depth, sources, out):
    """Apply a generated filter library to every image under --sources."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    library = random_filter_library(seed, count, max_depth)
    for j, node in enumerate(library.filters):
        (out_dir / f"filter_{j:04d}.filter").write_text(
            filter_to_sexpr(node) + "\n", encoding="utf-8")
    paths = sorted(p for p in Path(sources).iterdir() if p.is_file())
    n = 0
    for path in paths:
        try:
            img = RasterImage.load(path)
        except Exception:
            click.echo(f"skipping undecodable {path.name}", err=True)
            continue
        for j, node in enumerate(library.filters):
            apply_filter(node, img).save(out_dir / f"{path.stem}_{j:04d}.png")
            n += 1
    click.echo(f"wrote {n} filtered images")


# ----------------------------------------------------------------------
# corpus
# ----------------------------------------------------------------------

@main.group()
def corpus():
    """Build the multi-dataset corpus described by a JSON config."""


@corpus.command("build")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def corpus_build(config_path, out):
    """Render/import every configured dataset, then embed and index it."""
    cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest()
    datasets = cfg.get("datasets", {})

    if "abstract" in datasets:
        a = datasets["abstract"]
        canvas = CanvasSpec(**a.get("canvas", {"width": 256, "height": 256}))
        transforms = [(LineTransform(t["kind"]), t.get("weight", 1.0))
                      for t in a.get("transforms", [{"kind": "identity"}])]
        manifest.extend(build_abstract_dataset(
            a["count"], a["seed"], transforms, out_dir, canvas=canvas,
            bordered=a.get("bordered", False)))
        manifest.seeds["abstract"] = a["seed"]
    if "filtered" in datasets:
        f = datasets["filtered"]
        sources = sorted(p for p in Path(f["source_dir"]).iterdir() if p.is_file())
        manifest.extend(build_filtered_dataset(
            sources, f["filter_count"], f["seed"], out_dir))
        manifest.seeds["filtered"] = f["seed"]
    if "palette" in datasets:
        p = datasets["palette"]
        manifest.extend(build_palette_dataset(
            random_palettes(p["count"], p["seed"]), out_dir))
        manifest.seeds["palette"] = p["seed"]
    for tag in ("wikiart-like-external", "archive-like-external"):
        if tag in datasets:
            records, skipped = import_external_dataset(datasets[tag]["dir"], tag, out_dir)
            manifest.extend(records)
            if skipped:
                click.echo(f"{tag}: skipped {skipped} undecodable files", err=True)

    descriptor = DescriptorConfig(**cfg.get("descriptor", {}))
    forest_cfg = cfg.get("forest", {})
    index_corpus(
        manifest, out_dir, out_dir / "index.cobs", descriptor=descriptor,
        n_trees=forest_cfg.get("n_trees", 50), leaf_size=forest_cfg.get("leaf_size", 16),
        search_k=forest_cfg.get("search_k", 2000), seed=forest_cfg.get("seed", 0),
        manifest_path=out_dir / "manifest.txt")
    counts = ", ".join(f"{tag}={n}" for tag, n in sorted(manifest.counts.items()))
    click.echo(f"indexed {len(manifest.records)} records ({counts})")


# ----------------------------------------------------------------------
# index
# ----------------------------------------------------------------------

@main.group()
def index():
    """Build and query search indexes."""


@index.command("build")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--trees", type=int, default=50)
@click.option("--leaf", type=int, default=16)
@click.option("--search-k", type=int, default=2000)
@click.option("--seed", type=int, default=0)
@click.option("--embeddings", type=click.Path(exists=True, dir_okay=False),
              help="external embedding file instead of the built-in descriptor")
def index_build(manifest_path, out, trees, leaf, search_k, seed, embeddings):
    manifest = DatasetManifest.load(manifest_path)
    external = load_external_embeddings(embeddings) if embeddings else None
    index_corpus(manifest, Path(manifest_path).parent, out,
                 external_embeddings=external, n_trees=trees, leaf_size=leaf,
                 search_k=search_k, seed=seed, manifest_path=manifest_path)
    click.echo(f"indexed {len(manifest.records)} records -> {out}")


@index.command("query")
@click.option("--idx", "index_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--image", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=int, default=10)
@click.option("--search-k", type=int, default=2000)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False))
def index_query(index_path, image, k, search_k, manifest_path):
    from .annforest import load_index

    forest, ref = load_index(index_path)
    if manifest_path is None:
        candidate = Path(index_path).parent / ref
        manifest_path = candidate if candidate.exists() else None
    manifest = DatasetManifest.load(manifest_path) if manifest_path else None
    cfg = manifest.descriptor if manifest and manifest.descriptor else DescriptorConfig()
    vec = DescriptorExtractor.from_config(cfg).extract(RasterImage.load(image))
    id_by_offset = {r.offset: r.id for r in manifest.records} if manifest else {}
    for r in forest.query(vec, k=k, search_k=search_k):
        label = id_by_offset.get(r.item, f"#{r.item}")
        click.echo(f"{r.rank:>3} {label} {r.distance:.6f}")


# ----------------------------------------------------------------------
# serve
# ----------------------------------------------------------------------

@main.command("serve")
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--boards-dir", type=click.Path(file_okay=False), required=True)
@click.option("--static", "static_dir", type=click.Path(exists=True, file_okay=False),
              help="directory with the browser client bundle")
def serve(index_path, manifest_path, port, host, boards_dir, static_dir):
    """Run the retrieval HTTP service."""
    import uvicorn

    from .service import create_app, load_service

    Path(boards_dir).mkdir(parents=True, exist_ok=True)
    app = create_app(load_service(index_path, manifest_path, boards_dir), static_dir)
    uvicorn.run(app, host=host, port=port)


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------

@main.group("eval")
def eval_group():
    """Evaluation statistics."""


@eval_group.command("trials")
@click.option("--idx", "index_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--seeds", "seeds_file", type=click.Path(exists=True, dir_okay=False),
              help="file with one seed image id per line (default: --sample)")
@click.option("--sample", type=int, default=32, help="seeds sampled per dataset")
@click.option("--rng-seed", type=int, default=0)
@click.option("--controls", type=int, default=4, help="controls per 100 trials")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def eval_trials(index_path, manifest_path, seeds_file, sample, rng_seed, controls, out):
    from .annforest import load_index
    from .evalkit import generate_trials, trials_to_jsonl

    forest, _ = load_index(index_path)
    manifest = DatasetManifest.load(manifest_path)
    if seeds_file:
        seed_ids = [line.strip() for line in
                    Path(seeds_file).read_text(encoding="utf-8").splitlines()
                    if line.strip()]
    else:
        rng = random.Random(rng_seed)
        seed_ids = []
        for tag in sorted(manifest.counts):
            pool = sorted(r.id for r in manifest.records if r.dataset == tag)
            seed_ids.extend(rng.sample(pool, min(sample, len(pool))))
    trials = generate_trials(seed_ids, forest, manifest, rng_seed, controls)
    trials_to_jsonl(trials, out)
    n_controls = sum(t.is_control for t in trials)
    click.echo(f"wrote {len(trials)} trials ({n_controls} controls) -> {out}")


@eval_group.command("proxy")
@click.option("--trials", "trials_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def eval_proxy(trials_path, manifest_path, out):
    """Answer trials with the machine-proxy judge (not human data)."""
    from .evalkit import machine_proxy_responses, responses_to_csv, trials_from_jsonl

    manifest = DatasetManifest.load(manifest_path)
    trials = trials_from_jsonl(trials_path)
    responses = machine_proxy_responses(trials, manifest, Path(manifest_path).parent)
    responses_to_csv(responses, out)
    click.echo(f"wrote {len(responses)} machine-proxy responses -> {out}")


@eval_group.command("report")
@click.option("--trials", "trials_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--responses", "responses_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
def eval_report(trials_path, responses_path):
    from .evalkit import accuracy_report, responses_from_csv, trials_from_jsonl

    report = accuracy_report(trials_from_jsonl(trials_path),
                             responses_from_csv(responses_path))
    click.echo(report.format_table())


@eval_group.command("pilot")
@click.option("--logs", "logs_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
def eval_pilot(logs_path):
    from .evalkit import logs_from_csv, pilot_summary

    click.echo(pilot_summary(logs_from_csv(logs_path)).format_table())


if __name__ == "__main__":
    main()
