"""Local HTTP service backing the annotation tool.

Serves chats, stored annotations, optional model predictions, and
per-chat agreement statistics over a JSON API, plus the static files of
the browser UI.  Annotation writes are whole-vector PUTs, validated
against the link-window invariants, serialized under a lock, and
persisted with an atomic file replace (last write wins).
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path
from urllib.parse import quote

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import (
    AnnotationSet,
    Chat,
    DEFAULT_WINDOW,
    LinkLabel,
    labels_from_distances,
    load_corpus,
)
from .evaluation import fleiss_kappa
from .model import load_model, predict_links
from .features import annotate_features
from .topics import load_lda, topic_dist_map


class DistanceVector(BaseModel):
    distances: list[int]


def _annotation_filename(chat_id: str, annotator_id: str) -> str:
    return f"{quote(chat_id, safe='')}__{quote(annotator_id, safe='')}.json"


def _atomic_write_json(path: Path, payload: dict) -> None:
    handle = tempfile.NamedTemporaryFile(
        "w",
        encoding="utf-8",
        dir=path.parent,
        prefix=path.name,
        suffix=".tmp",
        delete=False,
    )
    try:
        json.dump(payload, handle, ensure_ascii=False)
        handle.flush()
        os.fsync(handle.fileno())
        handle.close()
        os.replace(handle.name, path)
    except BaseException:
        handle.close()
        os.unlink(handle.name)
        raise


class AnnotationStore:
    """Per-(chat, annotator) annotation records, memory plus one file each."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], list[int]] = {}
        for path in sorted(self.directory.glob("*.json")):
            record = json.loads(path.read_text(encoding="utf-8"))
            key = (record["chat_id"], record["annotator_id"])
            self._records[key] = [int(m) for m in record["distances"]]

    def seed(self, annotation_sets: list[AnnotationSet]) -> None:
        """Pre-populate with corpus-provided annotations (no files written)."""
        with self._lock:
            for annots in annotation_sets:
                for annotator, labels in annots.entries.items():
                    key = (annots.chat_id, annotator)
                    self._records.setdefault(
                        key, [label.distance for label in labels]
                    )

    def put(self, chat_id: str, annotator_id: str, distances: list[int]) -> None:
        record = {
            "chat_id": chat_id,
            "annotator_id": annotator_id,
            "distances": distances,
        }
        path = self.directory / _annotation_filename(chat_id, annotator_id)
        with self._lock:
            _atomic_write_json(path, record)
            self._records[(chat_id, annotator_id)] = list(distances)

    def for_chat(self, chat_id: str) -> dict[str, list[int]]:
        with self._lock:
            return {
                annotator: list(distances)
                for (cid, annotator), distances in self._records.items()
                if cid == chat_id
            }


def _validate_distances(chat: Chat, distances: list[int], window: int) -> None:
    if len(distances) != len(chat):
        raise HTTPException(
            status_code=422,
            detail=f"expected {len(chat)} distances, got {len(distances)}",
        )
    for i, m in enumerate(distances):
        try:
            LinkLabel(i, int(m)).check_range(window)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None


def create_app(
    corpus_path: str | Path,
    annotations_dir: str | Path,
    model_path: str | Path | None = None,
    lda_path: str | Path | None = None,
    static_dir: str | Path | None = None,
    window: int = DEFAULT_WINDOW,
) -> FastAPI:
    chats, embedded = load_corpus(corpus_path, window=window)
    chats = annotate_features(chats)
    by_id = {chat.chat_id: chat for chat in chats}
    store = AnnotationStore(Path(annotations_dir))
    store.seed(embedded)

    predictions: dict[str, list[int]] = {}
    if model_path is not None:
        params, _ = load_model(model_path)
        phi_map = None
        if params.indexer.with_cross:
            if lda_path is None:
                raise ValueError("with-lda model requires a topic model file")
            phi_map = topic_dist_map(load_lda(lda_path))
        for chat in chats:
            phi = phi_map[chat.chat_id] if phi_map is not None else None
            predictions[chat.chat_id] = [
                label.distance for label in predict_links(chat, params, phi)
            ]

    app = FastAPI(title="chatlinks annotation service")

    @app.get("/api/chats")
    def list_chats():
        return {
            "window": window,
            "chats": [
                {
                    "chat_id": chat.chat_id,
                    "n_messages": len(chat),
                    "annotators": sorted(store.for_chat(chat.chat_id)),
                }
                for chat in chats
            ],
        }

    @app.get("/api/chats/{chat_id}")
    def get_chat(chat_id: str):
        chat = by_id.get(chat_id)
        if chat is None:
            raise HTTPException(status_code=404, detail=f"unknown chat {chat_id!r}")
        return {
            "chat_id": chat.chat_id,
            "window": window,
            "messages": [
                {
                    "index": m.index,
                    "speaker": m.speaker.value,
                    "text": m.raw_text,
                    "tokens": list(m.tokens),
                }
                for m in chat.messages
            ],
            "annotations": store.for_chat(chat_id),
            "predictions": predictions.get(chat_id),
        }

    @app.put("/api/annotations/{chat_id}/{annotator_id}")
    def put_annotation(chat_id: str, annotator_id: str, body: DistanceVector):
        chat = by_id.get(chat_id)
        if chat is None:
            raise HTTPException(status_code=404, detail=f"unknown chat {chat_id!r}")
        _validate_distances(chat, body.distances, window)
        store.put(chat_id, annotator_id, [int(m) for m in body.distances])
        return {
            "chat_id": chat_id,
            "annotator_id": annotator_id,
            "distances": body.distances,
        }

    @app.get("/api/agreement/{chat_id}")
    def get_agreement(chat_id: str):
        chat = by_id.get(chat_id)
        if chat is None:
            raise HTTPException(status_code=404, detail=f"unknown chat {chat_id!r}")
        records = store.for_chat(chat_id)
        per_message = []
        for i in range(len(chat)):
            labels = {a: d[i] for a, d in records.items()}
            agreement = None
            if labels:
                counts: dict[int, int] = {}
                for value in labels.values():
                    counts[value] = counts.get(value, 0) + 1
                agreement = max(counts.values()) / len(labels)
            per_message.append(
                {"index": i, "labels": labels, "agreement": agreement}
            )
        kappa = None
        if len(records) >= 2:
            annots = AnnotationSet(
                chat_id=chat_id,
                entries={
                    a: labels_from_distances(d) for a, d in sorted(records.items())
                },
            )
            kappa = fleiss_kappa([annots], window=window)
        return {"chat_id": chat_id, "kappa": kappa, "per_message": per_message}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
