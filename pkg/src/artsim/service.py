"""Interactive retrieval service: seed search, tap-to-reseed, pin, undo.

The retrieval core is plain Python (RetrievalService) so it can be tested
without HTTP; create_app wraps it in a FastAPI application implementing the
JSON API the browser client consumes.

Retrieval is stateless: a result set depends only on the loaded index and
the seed. Sessions only hold the undo history (a bounded stack of previous
retrieval sets) and boards are append-only JSONL files flushed to disk
before a pin is acknowledged. Uploaded seeds are stored content-addressed
(sha256 of the uploaded bytes) so the seed box itself can be pinned and
served back.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .annforest import RPForestIndex, load_index
from .corpus import DatasetManifest
from .errors import (
    HistoryEmpty,
    IndexUnavailable,
    UndecodableImage,
    UnknownBoard,
    UnknownImage,
)
from .features import DescriptorExtractor
from .raster import RasterImage

__all__ = [
    "RESULTS_PER_SEARCH",
    "HISTORY_CAPACITY",
    "ResultEntry",
    "RetrievalSet",
    "RetrievalService",
    "load_service",
    "create_app",
]

RESULTS_PER_SEARCH = 10
HISTORY_CAPACITY = 50

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


@dataclass(frozen=True)
class ResultEntry:
    id: str
    dataset: str
    distance: float
    url: str


@dataclass(frozen=True)
class RetrievalSet:
    seed_ref: str            # image id or upload:<hash>
    seed_kind: str           # "image" | "upload"
    results: tuple[ResultEntry, ...]
    timestamp: float

    def to_json(self) -> dict:
        return {
            "seed": {"ref": self.seed_ref, "kind": self.seed_kind,
                     "url": f"/api/image/{self.seed_ref}"},
            "results": [vars(r) for r in self.results],
            "timestamp": self.timestamp,
        }


@dataclass
class _Session:
    current: RetrievalSet | None = None
    history: list[RetrievalSet] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class RetrievalService:
    def __init__(self, forest: RPForestIndex, manifest: DatasetManifest,
                 base_dir, boards_dir):
        self.forest = forest
        self.manifest = manifest
        self.base_dir = Path(base_dir)
        self.boards_dir = Path(boards_dir)
        self.uploads_dir = self.boards_dir / "uploads"
        self.uploads_dir.mkdir(parents=True, exist_ok=True)
        self.records = manifest.by_id()
        for rec in manifest.records:
            if rec.offset < 0:
                raise IndexUnavailable(f"record {rec.id} has no embedding offset")
        self._by_offset = {rec.offset: rec for rec in manifest.records}
        self._tags = sorted(manifest.counts)
        self._offsets_by_tag = {
            tag: np.array([r.offset for r in manifest.records if r.dataset == tag],
                          dtype=np.int64)
            for tag in self._tags
        }
        self._extractor = (DescriptorExtractor.from_config(manifest.descriptor)
                           if manifest.descriptor else None)
        self._sessions: dict[str, _Session] = {}
        self._sessions_lock = threading.Lock()
        self._board_lock = threading.Lock()

    # -- searching --------------------------------------------------------

    def search_by_upload(self, session_id: str, image_bytes: bytes) -> RetrievalSet:
        if self._extractor is None:
            raise IndexUnavailable("corpus was indexed with external embeddings; "
                                   "upload search needs the built-in descriptor")
        try:
            img = RasterImage.from_png(image_bytes)
        except Exception:
            raise UndecodableImage("could not decode uploaded image") from None
        digest = hashlib.sha256(image_bytes).hexdigest()
        ref = f"upload:{digest}"
        path = self.uploads_dir / f"{digest}.png"
        if not path.exists():
            img.save(path)
        qv = self._extractor.extract(img)
        result_set = RetrievalSet(ref, "upload", self._retrieve(qv), time.time())
        self._push(session_id, result_set)
        return result_set

    def search_by_image_id(self, session_id: str, image_id: str) -> RetrievalSet:
        rec = self.records.get(image_id)
        if rec is None:
            raise UnknownImage(image_id)
        qv = self.forest.vectors_[rec.offset].astype(np.float64)
        result_set = RetrievalSet(image_id, "image",
                                  self._retrieve(qv, exclude=image_id), time.time())
        self._push(session_id, result_set)
        return result_set

    def _retrieve(self, qv: np.ndarray, exclude: str | None = None) -> tuple[ResultEntry, ...]:
        """Merge per-dataset rankings into RESULTS_PER_SEARCH slots.

        Slots are split evenly across datasets (earlier tags take the
        remainder); datasets with too few images hand their slots to the
        others. Ranked candidates come from the forest; any dataset the
        approximate pass under-covers is topped up exactly.
        """
        n_tags = len(self._tags)
        want = min(RESULTS_PER_SEARCH, self.forest.n_items_)
        base, extra = divmod(RESULTS_PER_SEARCH, n_tags)
        quotas = {tag: base + (1 if i < extra else 0)
                  for i, tag in enumerate(self._tags)}

        approx = self.forest.query(qv, k=min(self.forest.n_items_,
                                             max(50, 3 * RESULTS_PER_SEARCH * n_tags)))
        ranked: dict[str, list[tuple[float, str]]] = {tag: [] for tag in self._tags}
        for r in approx:
            rec = self._by_offset[r.item]
            if rec.id != exclude:
                ranked[rec.dataset].append((r.distance, rec.id))
        for tag in self._tags:
            need = max(quotas[tag], want)  # enough depth for redistribution
            if len(ranked[tag]) < min(need, len(self._offsets_by_tag[tag])):
                ranked[tag] = self._exact_dataset_ranking(tag, qv, exclude)

        taken: dict[str, list[tuple[float, str]]] = {tag: [] for tag in self._tags}
        for tag in self._tags:
            taken[tag] = ranked[tag][:quotas[tag]]
        filled = sum(len(v) for v in taken.values())
        while filled < want:
            progressed = False
            for tag in self._tags:
                if filled >= want:
                    break
                pool = ranked[tag]
                if len(taken[tag]) < len(pool):
                    taken[tag].append(pool[len(taken[tag])])
                    filled += 1
                    progressed = True
            if not progressed:
                break

        entries = []
        for tag in self._tags:
            for distance, image_id in taken[tag]:
                entries.append(ResultEntry(image_id, tag, float(distance),
                                           f"/api/image/{image_id}"))
        return tuple(entries)

    def _exact_dataset_ranking(self, tag: str, qv: np.ndarray,
                               exclude: str | None) -> list[tuple[float, str]]:
        offsets = self._offsets_by_tag[tag]
        dists = 1.0 - self.forest.vectors_[offsets] @ qv
        order = np.lexsort((offsets, dists))
        out = []
        for j in order:
            rec = self._by_offset[int(offsets[j])]
            if rec.id != exclude:
                out.append((float(dists[j]), rec.id))
        return out

    # -- session history --------------------------------------------------

    def _session(self, session_id: str) -> _Session:
        with self._sessions_lock:
            return self._sessions.setdefault(session_id, _Session())

    def _push(self, session_id: str, new_set: RetrievalSet) -> None:
        session = self._session(session_id)
        with session.lock:
            if session.current is not None:
                session.history.append(session.current)
                if len(session.history) > HISTORY_CAPACITY:
                    session.history.pop(0)
            session.current = new_set

    def undo(self, session_id: str) -> RetrievalSet:
        session = self._session(session_id)
        with session.lock:
            if not session.history:
                raise HistoryEmpty(session_id)
            session.current = session.history.pop()
            return session.current

    def history_depth(self, session_id: str) -> int:
        return len(self._session(session_id).history)

    # -- boards ------------------------------------------------------------

    def _board_path(self, board_id: str) -> Path:
        if not _NAME_RE.match(board_id):
            raise UnknownBoard(board_id)
        return self.boards_dir / f"{board_id}.jsonl"

    def pin(self, session_id: str, board_id: str, ref: str) -> dict:
        if ref not in self.records and not self._upload_path(ref):
            raise UnknownImage(ref)
        entry = {"ref": ref, "timestamp": time.time(), "session": session_id}
        path = self._board_path(board_id)
        with self._board_lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return self.board(board_id)

    def board(self, board_id: str) -> dict:
        path = self._board_path(board_id)
        if not path.exists():
            raise UnknownBoard(board_id)
        pins = [json.loads(line) for line in
                path.read_text(encoding="utf-8").splitlines() if line.strip()]
        return {"board": board_id, "pins": pins}

    # -- images and metadata ------------------------------------------------

    def _upload_path(self, ref: str) -> Path | None:
        if not ref.startswith("upload:"):
            return None
        digest = ref.split(":", 1)[1]
        if not re.fullmatch(r"[0-9a-f]{64}", digest):
            return None
        path = self.uploads_dir / f"{digest}.png"
        return path if path.exists() else None

    def image_bytes(self, ref: str) -> bytes:
        """Full stored bytes (uncropped original) for an id or upload ref."""
        rec = self.records.get(ref)
        if rec is not None:
            return (self.base_dir / rec.path).read_bytes()
        upload = self._upload_path(ref)
        if upload is not None:
            return upload.read_bytes()
        raise UnknownImage(ref)

    def datasets(self) -> list[dict]:
        counts = self.manifest.counts
        return [{"tag": tag, "count": counts[tag]} for tag in self._tags]


def load_service(index_path, manifest_path, boards_dir) -> RetrievalService:
    forest, _ref = load_index(index_path)
    manifest = DatasetManifest.load(manifest_path)
    return RetrievalService(forest, manifest, Path(manifest_path).parent, boards_dir)


# ----------------------------------------------------------------------
# FastAPI wiring
# ----------------------------------------------------------------------

def create_app(service: RetrievalService, static_dir=None) -> FastAPI:
    app = FastAPI(title="artsim retrieval service")

    @app.exception_handler(UndecodableImage)
    async def _bad_image(request, exc):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.exception_handler(UnknownImage)
    @app.exception_handler(UnknownBoard)
    async def _not_found(request, exc):
        return JSONResponse({"error": str(exc)}, status_code=404)

    @app.exception_handler(HistoryEmpty)
    async def _history_empty(request, exc):
        return JSONResponse({"error": "history is empty"}, status_code=409)

    @app.exception_handler(IndexUnavailable)
    async def _index_unavailable(request, exc):
        return JSONResponse({"error": str(exc)}, status_code=503)

    @app.post("/api/search")
    async def search(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("image")
            if upload is None:
                return JSONResponse({"error": "missing image field"}, status_code=422)
            session_id = str(form.get("session", "default"))
            data = await upload.read()
            result = service.search_by_upload(session_id, data)
        else:
            body = await request.json()
            image_id = body.get("image_id")
            if not image_id:
                return JSONResponse({"error": "missing image_id"}, status_code=422)
            session_id = str(body.get("session", "default"))
            result = service.search_by_image_id(session_id, image_id)
        payload = result.to_json()
        payload["history_depth"] = service.history_depth(session_id)
        return payload

    @app.post("/api/session/{session_id}/undo")
    async def undo(session_id: str):
        result = service.undo(session_id)
        payload = result.to_json()
        payload["history_depth"] = service.history_depth(session_id)
        return payload

    @app.get("/api/image/{ref}")
    async def image(ref: str):
        return Response(content=service.image_bytes(ref), media_type="image/png")

    @app.post("/api/boards/{board_id}/pins")
    async def pin(board_id: str, request: Request):
        body = await request.json()
        ref = body.get("ref")
        if not ref:
            return JSONResponse({"error": "missing ref"}, status_code=422)
        return service.pin(str(body.get("session", "default")), board_id, ref)

    @app.get("/api/boards/{board_id}")
    async def board(board_id: str):
        return service.board(board_id)

    @app.get("/api/datasets")
    async def datasets():
        return service.datasets()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
