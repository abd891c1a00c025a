"""Shared fixtures: a small five-dataset corpus with a built index."""

from __future__ import annotations

import numpy as np
import pytest

from artsim.corpus import (
    DatasetManifest,
    build_abstract_dataset,
    build_filtered_dataset,
    build_palette_dataset,
    import_external_dataset,
    index_corpus,
    random_palettes,
)
from artsim.features import DescriptorConfig
from artsim.imagegen import CanvasSpec, LineTransform, random_coordinate_trees, render_coordinate_image
from artsim.raster import RasterImage

DESK_CANVAS = CanvasSpec(64, 64, particle_count=60, timesteps=10, blur_radius=1)


def synthetic_photo(seed: int, size: int = 96) -> RasterImage:
    """A deterministic photo-like test image: gradients plus speckle."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size]
    arr = np.stack([
        (x * 255 // max(size - 1, 1)),
        (y * 255 // max(size - 1, 1)),
        ((x + y) * 255 // max(2 * size - 2, 1)),
    ], axis=2).astype(np.int64)
    arr += rng.integers(-25, 26, size=arr.shape)
    return RasterImage(np.clip(arr, 0, 255).astype(np.uint8))


def build_desk_corpus(root, *, abstract=6, filtered_sources=2, filters=5,
                      palettes=6, coord=5, archive=4, n_trees=10,
                      abstract_seed=7, forest_seed=0):
    """Build a small five-dataset corpus under root; returns (forest, manifest, dir)."""
    out = root / "corpus"
    out.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest()

    transforms = [(LineTransform("identity"), 2.0), (LineTransform("polar"), 1.0)]
    manifest.extend(build_abstract_dataset(
        abstract, abstract_seed, transforms, out, canvas=DESK_CANVAS))
    manifest.seeds["abstract"] = abstract_seed

    sources = [(f"photo{i}", synthetic_photo(100 + i)) for i in range(filtered_sources)]
    manifest.extend(build_filtered_dataset(sources, filters, seed=11, out_dir=out))
    manifest.seeds["filtered"] = 11

    manifest.extend(build_palette_dataset(random_palettes(palettes, seed=13), out))
    manifest.seeds["palette"] = 13

    coord_dir = root / "coord_src"
    coord_dir.mkdir(exist_ok=True)
    canvas = CanvasSpec(64, 64, particle_count=1, timesteps=1)
    for i in range(coord):
        trees = random_coordinate_trees(900 + i)
        render_coordinate_image(*trees, canvas).save(coord_dir / f"c{i:03d}.png")
    records, _ = import_external_dataset(coord_dir, "wikiart-like-external", out)
    manifest.extend(records)

    archive_dir = root / "archive_src"
    archive_dir.mkdir(exist_ok=True)
    for i in range(archive):
        synthetic_photo(500 + i, size=72).save(archive_dir / f"a{i:03d}.png")
    records, _ = import_external_dataset(archive_dir, "archive-like-external", out)
    manifest.extend(records)

    forest, indexed = index_corpus(
        manifest, out, out / "index.cobs", descriptor=DescriptorConfig(),
        n_trees=n_trees, leaf_size=8, search_k=2000, seed=forest_seed,
        manifest_path=out / "manifest.txt")
    return forest, indexed, out


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    return build_desk_corpus(root)
