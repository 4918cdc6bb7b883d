"""HTTP service exposing search, classification and annotation over
trained artifacts.  All bodies are JSON with an explicit "version" field.

The annotation log is append-only JSON Lines; a later record for the same
(item, coder) supersedes earlier ones when agreement is computed.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import classifiers as clf
from . import corpus, embedding
from .errors import AllTokensUnknownError, DataError, DimensionMismatchError
from .metrics import AnnotationRecord, icr

API_VERSION = 1


class SearchRequest(BaseModel):
    query: str
    k: int = 10
    version: int = API_VERSION


class ClassifyRequest(BaseModel):
    id: str | None = None
    features: list[float] | None = None
    version: int = API_VERSION


class AnnotationRequest(BaseModel):
    item_id: str
    coder_id: str
    label: str
    version: int = API_VERSION


class ServiceState:
    def __init__(self, model, table, entries, features, classifier, annotations_path):
        self.model = model
        self.table = table
        self.entries = {e.id: e for e in entries}
        self.features = features
        self.classifier = classifier
        self.annotations_path = Path(annotations_path)
        self.items = [(e.id, features[e.id]) for e in entries if e.id in features]
        self.started = time.time()
        self._write_lock = threading.Lock()

    def append_annotation(self, record: AnnotationRecord):
        line = json.dumps(
            {
                "item_id": record.item_id,
                "coder_id": record.coder_id,
                "label": record.label,
                "timestamp": record.timestamp,
            },
            ensure_ascii=False,
        )
        with self._write_lock:
            with open(self.annotations_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")

    def read_annotations(self):
        if not self.annotations_path.exists():
            return []
        records = []
        with open(self.annotations_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                records.append(
                    AnnotationRecord(
                        item_id=doc["item_id"],
                        coder_id=doc["coder_id"],
                        label=doc["label"],
                        timestamp=doc.get("timestamp", 0.0),
                    )
                )
        return records


def build_app(model_path, manifest_path, features_path, word_vectors_path,
              classifier_path=None, annotations_path="annotations.jsonl",
              static_dir=None) -> FastAPI:
    model = embedding.EmbeddingModel.from_json(Path(model_path).read_text(encoding="utf-8"))
    entries = corpus.load_manifest(manifest_path)
    features = corpus.load_feature_file(features_path)
    table = embedding.WordVectorTable.from_feature_map(
        corpus.load_feature_file(word_vectors_path)
    )
    classifier = None
    if classifier_path is not None:
        classifier = clf.from_json(Path(classifier_path).read_text(encoding="utf-8"))
    state = ServiceState(model, table, entries, features, classifier, annotations_path)

    app = FastAPI(title="memesearch", version=str(API_VERSION))
    app.state.service = state

    @app.get("/health")
    def health():
        return {
            "version": API_VERSION,
            "model_format_version": embedding.MODEL_FORMAT_VERSION,
            "item_count": len(state.items),
            "classifier": state.classifier.kind if state.classifier else None,
            "uptime_seconds": time.time() - state.started,
        }

    @app.post("/search")
    def search(req: SearchRequest):
        if not req.query.strip():
            raise HTTPException(status_code=400, detail="empty query")
        if req.k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        try:
            ranked = embedding.rank_memes(state.model, req.query, state.items, state.table, k=req.k)
        except AllTokensUnknownError as exc:
            return JSONResponse(
                status_code=422,
                content={
                    "version": API_VERSION,
                    "error": "all_tokens_unknown",
                    "dropped_tokens": exc.tokens,
                },
            )
        results = []
        for item_id, distance, rank in ranked.results:
            entry = state.entries.get(item_id)
            results.append(
                {
                    "id": item_id,
                    "distance": distance,
                    "rank": rank,
                    "caption": entry.caption if entry else None,
                    "image_path": entry.image_path if entry else None,
                }
            )
        return {
            "version": API_VERSION,
            "results": results,
            "dropped_tokens": list(ranked.dropped_tokens),
        }

    @app.post("/classify")
    def classify(req: ClassifyRequest):
        if state.classifier is None:
            raise HTTPException(status_code=409, detail="no classifier loaded")
        if req.id is not None:
            if req.id not in state.features:
                raise HTTPException(status_code=404, detail=f"unknown item id {req.id!r}")
            vector = state.features[req.id].values
        elif req.features is not None:
            vector = np.asarray(req.features, dtype=np.float64)
        else:
            raise HTTPException(status_code=400, detail="provide 'id' or 'features'")
        try:
            label = state.classifier.predict(vector)
            scores = state.classifier.predict_scores(vector)
        except DimensionMismatchError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"version": API_VERSION, "label": label, "scores": scores}

    @app.post("/annotations")
    def annotate(req: AnnotationRequest):
        if req.label not in corpus.CLASS_LABELS:
            raise HTTPException(
                status_code=400,
                detail=f"unknown label {req.label!r}; expected one of {list(corpus.CLASS_LABELS)}",
            )
        if req.item_id not in state.entries:
            raise HTTPException(status_code=404, detail=f"unknown item id {req.item_id!r}")
        record = AnnotationRecord(
            item_id=req.item_id, coder_id=req.coder_id, label=req.label, timestamp=time.time()
        )
        state.append_annotation(record)
        return {"version": API_VERSION, "status": "recorded"}

    @app.get("/icr")
    def icr_endpoint():
        records = state.read_annotations()
        try:
            pairs, mean = icr(records)
        except DataError:
            return {"version": API_VERSION, "pairs": [], "mean": None}
        latest = {}
        for rec in records:
            latest[(rec.item_id, rec.coder_id)] = rec.label
        by_coder = {}
        for (item, coder), _ in latest.items():
            by_coder.setdefault(coder, set()).add(item)
        return {
            "version": API_VERSION,
            "pairs": [
                {
                    "coders": [a, b],
                    "agreement": agreement,
                    "co_annotated": len(by_coder[a] & by_coder[b]),
                }
                for (a, b), agreement in sorted(pairs.items())
            ],
            "mean": mean,
        }

    @app.get("/memes/{item_id}/image")
    def meme_image(item_id: str):
        entry = state.entries.get(item_id)
        if entry is None or entry.image_path is None:
            raise HTTPException(status_code=404, detail=f"no image for item {item_id!r}")
        path = Path(entry.image_path)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"image file missing for {item_id!r}")
        return FileResponse(path)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
