"""Dataset building and cataloging.

A corpus is a directory of PNG files described by a line-oriented manifest.
Five dataset tags exist: generated particle art ("abstract"), filtered
photographs ("filtered"), two user-supplied archives ("wikiart-like-external",
"archive-like-external") and color-palette thumbnails ("palette").

Indexing computes one descriptor per record on the border-cropped analysis
image (crop_fraction is a per-record analysis policy; the stored file keeps
its full border and is what retrieval serves), stacks them in manifest
order — so forest item ids are manifest row offsets — and persists the
forest next to the manifest.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .annforest import RPForestIndex, build_forest, save_index
from .errors import BudgetExhausted, ManifestError, MissingEmbedding
from .features import DescriptorConfig, DescriptorExtractor
from .filtertree import FilterLibrary, apply_filter, filter_to_sexpr, random_filter_library
from .imagegen import (
    CanvasSpec,
    Grammar,
    genome_to_text,
    random_genome,
    render_particle_image,
)
from .imagegen.particles import background_color
from .raster import RasterImage, coverage_score, crop_border

__all__ = [
    "DATASET_TAGS",
    "PAPER_SCALE",
    "ImageRecord",
    "DatasetManifest",
    "build_abstract_dataset",
    "build_filtered_dataset",
    "build_palette_dataset",
    "random_palettes",
    "import_external_dataset",
    "index_corpus",
    "crop_border",
]

DATASET_TAGS = (
    "abstract", "filtered", "wikiart-like-external", "archive-like-external", "palette",
)

# Corpus sizes used for the full-scale build (the desk-scale test configs
# shrink the counts but run the same code).
PAPER_SCALE = {
    "abstract": 9519,
    "filtered_sources": 20,
    "filtered_filters": 1000,
    "palette": 5000,
    "wikiart-like-external": 10000,
    "archive-like-external": 10000,
}

COVERAGE_MIN = 0.02
COVERAGE_MAX = 0.90
BORDERED_CROP_FRACTION = 0.08


@dataclass(frozen=True)
class ImageRecord:
    id: str
    dataset: str
    path: str          # relative to the manifest directory
    crop_fraction: float = 0.0
    offset: int = -1   # embedding row, -1 before indexing

    def __post_init__(self):
        if self.dataset not in DATASET_TAGS:
            raise ManifestError(f"unknown dataset tag {self.dataset!r}")
        if not 0.0 <= self.crop_fraction <= 0.25:
            raise ManifestError("crop_fraction must be in [0, 0.25]")
        for value in (self.id, self.path):
            if "\t" in value or "\n" in value:
                raise ManifestError("ids and paths must not contain tabs or newlines")


@dataclass
class DatasetManifest:
    records: list[ImageRecord] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)
    descriptor: DescriptorConfig | None = None

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for rec in self.records:
            out[rec.dataset] = out.get(rec.dataset, 0) + 1
        return out

    def by_id(self) -> dict[str, ImageRecord]:
        out = {}
        for rec in self.records:
            if rec.id in out:
                raise ManifestError(f"duplicate record id {rec.id!r}")
            out[rec.id] = rec
        return out

    def extend(self, fragment: list[ImageRecord]) -> None:
        self.records.extend(fragment)
        self.by_id()  # re-validate uniqueness

    # -- serialization: header lines start with '!', records are
    #    tab-separated key=value pairs; byte-stable round trip. ----------

    def to_text(self) -> str:
        lines = ["!manifest 1"]
        if self.descriptor is not None:
            d = self.descriptor
            lines.append(f"!descriptor {d.grid} {d.color_bins} {d.gradient_bins} {d.resize_edge}")
        for name in sorted(self.seeds):
            lines.append(f"!seed {name} {self.seeds[name]}")
        for tag in sorted(self.counts):
            lines.append(f"!count {tag} {self.counts[tag]}")
        for rec in self.records:
            lines.append("\t".join([
                f"id={rec.id}",
                f"dataset={rec.dataset}",
                f"path={rec.path}",
                f"crop={rec.crop_fraction!r}",
                f"offset={rec.offset}",
            ]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        manifest = cls()
        declared: dict[str, int] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("!"):
                parts = line[1:].split()
                if parts[0] == "manifest":
                    if parts[1:] != ["1"]:
                        raise ManifestError(f"unsupported manifest version {parts[1:]}")
                elif parts[0] == "descriptor":
                    manifest.descriptor = DescriptorConfig(*(int(v) for v in parts[1:5]))
                elif parts[0] == "seed":
                    manifest.seeds[parts[1]] = int(parts[2])
                elif parts[0] == "count":
                    declared[parts[1]] = int(parts[2])
                else:
                    raise ManifestError(f"line {lineno}: unknown header {parts[0]!r}")
                continue
            fields = {}
            for item in line.split("\t"):
                key, eq, value = item.partition("=")
                if not eq:
                    raise ManifestError(f"line {lineno}: bad field {item!r}")
                fields[key] = value
            try:
                manifest.records.append(ImageRecord(
                    id=fields["id"], dataset=fields["dataset"], path=fields["path"],
                    crop_fraction=float(fields["crop"]), offset=int(fields["offset"])))
            except KeyError as exc:
                raise ManifestError(f"line {lineno}: missing field {exc}") from None
        if declared and declared != manifest.counts:
            raise ManifestError(f"declared counts {declared} != records {manifest.counts}")
        manifest.by_id()
        return manifest

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _derive_seed(seed: int, i: int) -> int:
    return (seed * 1_000_003 + i) & (2 ** 63 - 1)


# ----------------------------------------------------------------------
# Builders: each writes PNGs under out_dir and returns a record fragment
# with paths relative to out_dir.
# ----------------------------------------------------------------------

def build_abstract_dataset(n: int, seed: int, transforms, out_dir,
                           canvas: CanvasSpec = CanvasSpec(256, 256),
                           grammar: Grammar = Grammar(),
                           bordered: bool = False,
                           coverage_bounds: tuple[float, float] = (COVERAGE_MIN, COVERAGE_MAX),
                           attempt_budget_factor: int = 20) -> list[ImageRecord]:
    """Render particle images until n pass the coverage curation thresholds.

    transforms is a list of (LineTransform, weight) pairs; each attempt
    draws one. Near-empty (< 2% coverage) and near-saturated (> 90%) images
    are discarded, standing in for the hand curation the corpus originally
    required.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "abstract").mkdir(parents=True, exist_ok=True)
    kinds = [t for t, _ in transforms]
    weights = [w for _, w in transforms]
    records = []
    attempts = 0
    budget = attempt_budget_factor * n
    crop = BORDERED_CROP_FRACTION if bordered else 0.0
    cov_min, cov_max = coverage_bounds
    while len(records) < n:
        if attempts >= budget:
            raise BudgetExhausted(
                f"{len(records)}/{n} survivors after {attempts} attempts")
        genome_seed = _derive_seed(seed, attempts)
        attempt_rng = random.Random(genome_seed)
        transform = attempt_rng.choices(kinds, weights=weights)[0]
        attempts += 1
        genome = random_genome(genome_seed, grammar)
        img = render_particle_image(genome, canvas, transform)
        score = coverage_score(img, background_color(canvas, genome))
        if not cov_min <= score <= cov_max:
            continue
        image_id = f"abstract_{seed}_{len(records):05d}"
        rel = f"abstract/{image_id}.png"
        img.save(out_dir / rel)
        (out_dir / "abstract" / f"{image_id}.genome").write_text(
            genome_to_text(genome), encoding="utf-8")
        records.append(ImageRecord(image_id, "abstract", rel, crop_fraction=crop))
    return records


def build_filtered_dataset(sources, filter_count: int, seed: int, out_dir,
                           library: FilterLibrary | None = None) -> list[ImageRecord]:
    """Apply a generated filter library to each source photo.

    sources: list of (name, RasterImage) pairs or file paths. Produces
    len(sources) x filter_count records whose ids encode the pair.
    """
    if not sources:
        raise ValueError("need at least one source image")
    out_dir = Path(out_dir)
    (out_dir / "filtered").mkdir(parents=True, exist_ok=True)
    loaded = []
    for src in sources:
        if isinstance(src, tuple):
            loaded.append(src)
        else:
            loaded.append((Path(src).stem, RasterImage.load(src)))
    if library is None:
        library = random_filter_library(seed, filter_count)
    if len(library.filters) != filter_count:
        raise ValueError("library size does not match filter_count")
    for j, node in enumerate(library.filters):
        (out_dir / "filtered" / f"filter_{j:04d}.filter").write_text(
            filter_to_sexpr(node) + "\n", encoding="utf-8")
    records = []
    for name, img in loaded:
        for j, node in enumerate(library.filters):
            image_id = f"filtered_{name}_{j:04d}"
            rel = f"filtered/{image_id}.png"
            apply_filter(node, img).save(out_dir / rel)
            records.append(ImageRecord(image_id, "filtered", rel))
    return records


def build_palette_dataset(palettes, out_dir) -> list[ImageRecord]:
    """One 100x60 thumbnail of five equal-width vertical stripes per palette."""
    out_dir = Path(out_dir)
    (out_dir / "palette").mkdir(parents=True, exist_ok=True)
    records = []
    for i, palette in enumerate(palettes):
        if len(palette) != 5:
            raise ValueError(f"palette {i} must have exactly 5 colors")
        arr = np.empty((60, 100, 3), dtype=np.uint8)
        for s, color in enumerate(palette):
            arr[:, s * 20:(s + 1) * 20] = np.asarray(color, dtype=np.uint8)
        image_id = f"palette_{i:05d}"
        rel = f"palette/{image_id}.png"
        RasterImage(arr).save(out_dir / rel)
        records.append(ImageRecord(image_id, "palette", rel))
    return records


def random_palettes(count: int, seed: int) -> list[tuple]:
    rng = random.Random(seed)
    return [tuple((rng.randrange(256), rng.randrange(256), rng.randrange(256))
                  for _ in range(5))
            for _ in range(count)]


def import_external_dataset(src_dir, tag: str, out_dir) -> tuple[list[ImageRecord], int]:
    """Catalog every decodable image under src_dir; returns (records, skipped).

    Files are referenced in place (re-encoded to PNG under out_dir only when
    the source is not already a PNG readable by the service).
    """
    if tag not in ("wikiart-like-external", "archive-like-external"):
        raise ValueError(f"external imports must use an external tag, got {tag!r}")
    src_dir = Path(src_dir)
    out_dir = Path(out_dir)
    (out_dir / tag).mkdir(parents=True, exist_ok=True)
    records = []
    skipped = 0
    files = sorted(p for p in src_dir.iterdir() if p.is_file())
    for i, path in enumerate(files):
        try:
            img = RasterImage.load(path)
        except Exception:
            skipped += 1
            continue
        image_id = f"{tag}_{i:05d}"
        rel = f"{tag}/{image_id}.png"
        img.save(out_dir / rel)
        records.append(ImageRecord(image_id, tag, rel))
    return records, skipped


# ----------------------------------------------------------------------
# Indexing
# ----------------------------------------------------------------------

def record_embedding(record: ImageRecord, base_dir, extractor: DescriptorExtractor) -> np.ndarray:
    """The analysis-path embedding: load, border-crop, descriptor."""
    img = RasterImage.load(Path(base_dir) / record.path)
    return extractor.extract(crop_border(img, record.crop_fraction))


def index_corpus(manifest: DatasetManifest, base_dir, index_path,
                 descriptor: DescriptorConfig | None = None,
                 external_embeddings: dict[str, np.ndarray] | None = None,
                 n_trees: int = 50, leaf_size: int = 16,
                 search_k: int = 2000, seed: int = 0,
                 manifest_path=None) -> tuple[RPForestIndex, DatasetManifest]:
    """Embed every record, build the forest, persist both.

    Embeddings come from the built-in descriptor on the border-cropped
    image, or from an external id -> vector map that must cover every
    record. Row offsets follow manifest order.
    """
    if not manifest.records:
        raise ManifestError("cannot index an empty manifest")
    if external_embeddings is not None:
        rows = []
        for rec in manifest.records:
            if rec.id not in external_embeddings:
                raise MissingEmbedding(rec.id)
            rows.append(external_embeddings[rec.id])
        matrix = np.stack(rows)
        descriptor = None
    else:
        cfg = descriptor or manifest.descriptor or DescriptorConfig()
        extractor = DescriptorExtractor.from_config(cfg)
        matrix = np.stack([record_embedding(rec, base_dir, extractor)
                           for rec in manifest.records])
        descriptor = cfg

    forest = build_forest(matrix, n_trees=n_trees, leaf_size=leaf_size,
                          seed=seed, search_k=search_k)
    indexed = DatasetManifest(
        records=[replace(rec, offset=i) for i, rec in enumerate(manifest.records)],
        seeds=dict(manifest.seeds),
        descriptor=descriptor,
    )
    if manifest_path is None:
        manifest_path = Path(base_dir) / "manifest.txt"
    indexed.save(manifest_path)
    save_index(forest, str(Path(manifest_path).name), index_path)
    return forest, indexed
