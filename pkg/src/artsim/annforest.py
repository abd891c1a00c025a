"""Approximate nearest-neighbour search over cosine distance using a
forest of randomized partition trees.

Each tree recursively splits the item set: two distinct items are sampled,
the splitting plane is their perpendicular bisector (normal = difference of
the two vectors, offset = projection of their midpoint), and items are
routed by the sign of (v . normal - offset). Recursion stops at leaf_size
items; a split that puts everything on one side is retried up to 3 times
and then forced into a leaf.

Queries run a single best-first priority queue across all trees' pending
branches: the key of a branch is the smallest absolute margin seen along
its path (roots start at +inf, the far side of a split goes negative), so
leaves near the query are visited first. Leaves are drained until search_k
distinct candidates are collected, then exact cosine distances rank the
candidates and the top k are returned. With search_k >= corpus size the
result equals brute force exactly.

Item ids are dense row offsets 0..n-1; mapping to external image ids is the
manifest's job. Everything is deterministic for a fixed (vectors, params,
seed) and the built forest is immutable, so concurrent queries are safe.
"""

from __future__ import annotations

import heapq
import itertools
import struct
import time
import zlib
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator

from .errors import CorruptIndex, EmptyInput, TruncatedFile
from .validation import as_matrix, as_vector, normalize_rows

__all__ = [
    "QueryResult",
    "RPForestIndex",
    "build_forest",
    "brute_force_knn",
    "recall_at_k",
    "save_index",
    "load_index",
    "mean_query_seconds",
]

_MAGIC = b"COBS"
_VERSION = 1


class QueryResult(NamedTuple):
    item: int
    distance: float
    rank: int


class _Tree:
    """Flat node storage for one randomized partition tree.

    Node codes: code >= 0 is a split (row into normals/offsets/children),
    code < 0 is leaf number -code-1. children[s] = (left, right) where left
    holds items with v.normal - offset < 0.
    """

    __slots__ = ("normals", "offsets", "children", "leaves", "root")

    def __init__(self, normals, offsets, children, leaves, root):
        self.normals = normals    # (n_splits, D) float32
        self.offsets = offsets    # (n_splits,) float32
        self.children = children  # (n_splits, 2) int32
        self.leaves = leaves      # list of int64 arrays
        self.root = root


class RPForestIndex(BaseEstimator):
    """Immutable forest index with a scikit-learn estimator surface.

    Parameters mirror the usual accuracy/latency trade-offs: more trees and
    a larger search_k raise recall, a smaller leaf_size deepens trees.
    """

    def __init__(self, n_trees: int = 50, leaf_size: int = 16,
                 search_k: int = 2000, seed: int = 0):
        self.n_trees = n_trees
        self.leaf_size = leaf_size
        self.search_k = search_k
        self.seed = seed

    # -- fitting ---------------------------------------------------------

    def fit(self, X, y=None):
        if self.n_trees < 1 or self.leaf_size < 1:
            raise ValueError("n_trees and leaf_size must be >= 1")
        M = self._coerce_vectors(X)
        M = normalize_rows(as_matrix(M)).astype(np.float32)
        self.vectors_ = np.ascontiguousarray(M)
        self.n_items_ = M.shape[0]
        self.dim_ = M.shape[1]
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees_ = [self._build_tree(np.random.default_rng(s)) for s in seeds]
        return self

    @staticmethod
    def _coerce_vectors(X) -> np.ndarray:
        if isinstance(X, dict):
            n = len(X)
            if n == 0:
                raise EmptyInput("no vectors")
            if set(X.keys()) != set(range(n)):
                raise ValueError("mapping keys must be the dense row offsets 0..n-1")
            return np.stack([np.asarray(X[i], dtype=np.float64) for i in range(n)])
        arr = np.asarray(X, dtype=np.float64)
        if arr.size == 0:
            raise EmptyInput("no vectors")
        return arr

    def _build_tree(self, rng: np.random.Generator) -> _Tree:
        M = self.vectors_
        normals: list[np.ndarray] = []
        offsets: list[float] = []
        children: list[list[int]] = []
        leaves: list[np.ndarray] = []

        def make_leaf(idx: np.ndarray) -> int:
            leaves.append(np.sort(idx).astype(np.int64))
            return -len(leaves)

        root = 0
        # stack of (parent split row, side, subset); parent -1 = root
        stack: list[tuple[int, int, np.ndarray]] = [(-1, 0, np.arange(M.shape[0]))]
        while stack:
            parent, side, idx = stack.pop()
            code = None
            if idx.shape[0] <= self.leaf_size:
                code = make_leaf(idx)
            else:
                for _ in range(4):  # first try + 3 retries on degenerate splits
                    a, b = rng.choice(idx.shape[0], size=2, replace=False)
                    va = M[idx[a]].astype(np.float64)
                    vb = M[idx[b]].astype(np.float64)
                    normal = va - vb
                    nrm = np.linalg.norm(normal)
                    if nrm < 1e-12:
                        continue
                    normal /= nrm
                    offset = float(normal @ (va + vb) / 2.0)
                    left_mask = (M[idx] @ normal.astype(np.float32)) - np.float32(offset) < 0
                    n_left = int(left_mask.sum())
                    if 0 < n_left < idx.shape[0]:
                        code = len(normals)
                        normals.append(normal.astype(np.float32))
                        offsets.append(offset)
                        children.append([0, 0])
                        stack.append((code, 0, idx[left_mask]))
                        stack.append((code, 1, idx[~left_mask]))
                        break
                if code is None:
                    code = make_leaf(idx)
            if parent < 0:
                root = code
            else:
                children[parent][side] = code

        if normals:
            return _Tree(np.stack(normals), np.asarray(offsets, dtype=np.float32),
                         np.asarray(children, dtype=np.int32), leaves, root)
        return _Tree(np.empty((0, self.dim_), dtype=np.float32),
                     np.empty(0, dtype=np.float32),
                     np.empty((0, 2), dtype=np.int32), leaves, root)

    # -- querying --------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise RuntimeError("index is not fitted")

    def query(self, q, k: int, search_k: int | None = None) -> list[QueryResult]:
        """Top-k items by cosine distance, approximated by the forest."""
        self._check_fitted()
        if search_k is None:
            search_k = self.search_k
        if k < 1:
            raise ValueError("k must be >= 1")
        if search_k < k:
            raise ValueError("search_k must be >= k")
        qv = as_vector(q, dim=self.dim_)

        candidates: set[int] = set()
        counter = itertools.count()
        heap: list[tuple[float, int, int, int]] = []
        for t in range(len(self.trees_)):
            heap.append((-np.inf, next(counter), t, self.trees_[t].root))
        heapq.heapify(heap)

        while heap and len(candidates) < search_k:
            neg_key, _, t, code = heapq.heappop(heap)
            key = -neg_key
            tree = self.trees_[t]
            if code < 0:
                candidates.update(tree.leaves[-code - 1].tolist())
                continue
            margin = float(tree.normals[code] @ qv) - float(tree.offsets[code])
            left, right = tree.children[code]
            near, far = (right, left) if margin >= 0 else (left, right)
            am = abs(margin)
            heapq.heappush(heap, (-min(key, am), next(counter), t, near))
            heapq.heappush(heap, (-min(key, -am), next(counter), t, far))

        idx = np.fromiter(candidates, dtype=np.int64, count=len(candidates))
        return _rank(self.vectors_, idx, qv, k)

    def kneighbors(self, X, n_neighbors: int | None = None,
                   search_k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """scikit-learn style batch query: (distances, indices) matrices."""
        self._check_fitted()
        k = min(n_neighbors if n_neighbors is not None else 10, self.n_items_)
        Q = as_matrix(X)
        dists = np.empty((Q.shape[0], k))
        items = np.empty((Q.shape[0], k), dtype=np.int64)
        for i in range(Q.shape[0]):
            results = self.query(Q[i], k, search_k)
            dists[i] = [r.distance for r in results]
            items[i] = [r.item for r in results]
        return dists, items


def _rank(M: np.ndarray, idx: np.ndarray, qv: np.ndarray, k: int) -> list[QueryResult]:
    if idx.shape[0] == 0:
        return []
    dists = 1.0 - M[idx] @ qv
    order = np.lexsort((idx, dists))[:k]
    return [QueryResult(int(idx[j]), float(dists[j]), rank)
            for rank, j in enumerate(order, start=1)]


def build_forest(vectors, n_trees: int = 50, leaf_size: int = 16,
                 seed: int = 0, search_k: int = 2000) -> RPForestIndex:
    """Build an immutable forest over unit-normalized vectors."""
    return RPForestIndex(n_trees=n_trees, leaf_size=leaf_size,
                         search_k=search_k, seed=seed).fit(vectors)


def brute_force_knn(vectors, q, k: int) -> list[QueryResult]:
    """Exact top-k by cosine distance; ties broken by ascending item id."""
    if isinstance(vectors, RPForestIndex):
        M = vectors.vectors_
    else:
        M = RPForestIndex._coerce_vectors(vectors)
        M = normalize_rows(as_matrix(M)).astype(np.float32)
    if k < 1:
        raise ValueError("k must be >= 1")
    qv = as_vector(q, dim=M.shape[1])
    return _rank(M, np.arange(M.shape[0], dtype=np.int64), qv, k)


def recall_at_k(approx: list[QueryResult], exact: list[QueryResult], k: int) -> float:
    """|approx ids ∩ exact ids| / k over the first k entries of each."""
    a = {r.item for r in approx[:k]}
    e = {r.item for r in exact[:k]}
    return len(a & e) / k


def mean_query_seconds(forest: RPForestIndex, queries, k: int = 10,
                       search_k: int | None = None) -> float:
    """Mean wall-clock seconds per single-threaded query."""
    Q = as_matrix(queries)
    start = time.perf_counter()
    for i in range(Q.shape[0]):
        forest.query(Q[i], k, search_k)
    return (time.perf_counter() - start) / Q.shape[0]


# ----------------------------------------------------------------------
# Persistence: little-endian binary with magic, version and CRC32 trailer
# ----------------------------------------------------------------------

class _Writer:
    def __init__(self):
        self.chunks: list[bytes] = []

    def pack(self, fmt: str, *values):
        self.chunks.append(struct.pack("<" + fmt, *values))

    def raw(self, data: bytes):
        self.chunks.append(data)

    def payload(self) -> bytes:
        return b"".join(self.chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}")
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))


def save_index(forest: RPForestIndex, manifest_ref: str, path) -> None:
    """Write the forest so load_index returns a query-identical copy."""
    forest._check_fitted()
    w = _Writer()
    w.raw(_MAGIC)
    ref = (manifest_ref or "").encode("utf-8")
    w.pack("IIQIIqH", _VERSION, forest.dim_, forest.n_items_, len(forest.trees_),
           forest.leaf_size, forest.seed, len(ref))
    w.raw(ref)
    w.raw(np.ascontiguousarray(forest.vectors_, dtype="<f4").tobytes())
    for tree in forest.trees_:
        n_splits = tree.normals.shape[0]
        w.pack("IIi", n_splits, len(tree.leaves), tree.root)
        for s in range(n_splits):
            w.pack("fii", float(tree.offsets[s]),
                   int(tree.children[s, 0]), int(tree.children[s, 1]))
            w.raw(np.ascontiguousarray(tree.normals[s], dtype="<f4").tobytes())
        for leaf in tree.leaves:
            w.pack("I", leaf.shape[0])
            w.raw(np.ascontiguousarray(leaf, dtype="<u4").tobytes())
    payload = w.payload()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_index(path) -> tuple[RPForestIndex, str]:
    """Read an index file; returns (forest, manifest_ref)."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    if r.take(4) != _MAGIC:
        raise CorruptIndex("bad magic")
    version, dim, count, n_trees, leaf_size, seed, ref_len = r.unpack("IIQIIqH")
    if version != _VERSION:
        raise CorruptIndex(f"unsupported version {version}")
    manifest_ref = r.take(ref_len).decode("utf-8")
    vectors = np.frombuffer(r.take(count * dim * 4), dtype="<f4").reshape(count, dim)
    trees = []
    for _ in range(n_trees):
        n_splits, n_leaves, root = r.unpack("IIi")
        normals = np.empty((n_splits, dim), dtype=np.float32)
        offsets = np.empty(n_splits, dtype=np.float32)
        children = np.empty((n_splits, 2), dtype=np.int32)
        for s in range(n_splits):
            offsets[s], children[s, 0], children[s, 1] = r.unpack("fii")
            normals[s] = np.frombuffer(r.take(dim * 4), dtype="<f4")
        leaves = []
        for _ in range(n_leaves):
            (n_items,) = r.unpack("I")
            leaves.append(np.frombuffer(r.take(n_items * 4), dtype="<u4").astype(np.int64))
        trees.append(_Tree(normals, offsets, children, leaves, root))
    payload_end = r.pos
    (crc,) = r.unpack("I")
    if r.pos != len(data):
        raise CorruptIndex("trailing bytes after checksum")
    if crc != zlib.crc32(data[:payload_end]):
        raise CorruptIndex("checksum mismatch")

    forest = RPForestIndex(n_trees=n_trees, leaf_size=leaf_size, seed=seed)
    forest.vectors_ = np.ascontiguousarray(vectors)
    forest.n_items_ = count
    forest.dim_ = dim
    forest.trees_ = trees
    return forest, manifest_ref
