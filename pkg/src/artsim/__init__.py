"""artsim: generative abstract-art corpora with visual-similarity retrieval.

Pipeline: generate decorative images (particle trails, coordinate
functions, filter trees), embed them with a deterministic grid descriptor
(or ingest external embeddings), index the embeddings in a forest of
randomized partition trees, and serve interactive seed -> 10-results
retrieval with pinning and undo. An evaluation kit reproduces the
retrieved-vs-random trial statistics and pilot-session yield summaries.
"""

from .annforest import (
    QueryResult,
    RPForestIndex,
    brute_force_knn,
    build_forest,
    load_index,
    recall_at_k,
    save_index,
)
from .corpus import DatasetManifest, ImageRecord, index_corpus
from .features import (
    DescriptorConfig,
    DescriptorExtractor,
    cosine_distance,
    extract_descriptor,
    load_external_embeddings,
)
from .raster import RasterImage, box_blur, coverage_score, crop_border

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "DescriptorConfig",
    "DescriptorExtractor",
    "ImageRecord",
    "QueryResult",
    "RPForestIndex",
    "RasterImage",
    "box_blur",
    "brute_force_knn",
    "build_forest",
    "cosine_distance",
    "coverage_score",
    "crop_border",
    "extract_descriptor",
    "index_corpus",
    "load_external_embeddings",
    "load_index",
    "recall_at_k",
    "save_index",
    "__version__",
]
