"""HTTP surface: POST /embed, POST /score, GET /health, GET /spec."""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .encoder import ModelConfig, load_encoder

logger = logging.getLogger(__name__)

MAX_INTERNAL_BATCH = 16


class EmbedRequest(BaseModel):
    texts: list[str]


class ScoreDoc(BaseModel):
    url: str = ""
    title: str = ""
    body: str = ""


class ScoreRequest(BaseModel):
    query: str
    docs: list[ScoreDoc]


def create_app(cfg: ModelConfig = ModelConfig(), encoder: Any = None) -> FastAPI:
    state = {"encoder": encoder}

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if state["encoder"] is None:
            try:
                state["encoder"] = load_encoder(cfg)
            except Exception:
                logger.exception("model load failed; serving 503s")
        yield

    app = FastAPI(title="modelserver", lifespan=lifespan)

    def encoder_or_503():
        if state["encoder"] is None:
            raise HTTPException(503, "model not loaded")
        return state["encoder"]

    @app.post("/embed")
    def embed(request: EmbedRequest):
        model = encoder_or_503()
        for i, text in enumerate(request.texts):
            if not model.can_embed(text):
                raise HTTPException(400, f"text at index {i} is empty")
        vectors: list[list[float]] = []
        for start in range(0, len(request.texts), MAX_INTERNAL_BATCH):
            chunk = request.texts[start : start + MAX_INTERNAL_BATCH]
            try:
                embedded = model.embed_batch(chunk)
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from exc
            vectors.extend([float(v) for v in vec] for vec in embedded)
        return {"vectors": vectors}

    @app.post("/score")
    def score(request: ScoreRequest):
        model = encoder_or_503()
        scores: list[float] = []
        docs = [doc.model_dump() for doc in request.docs]
        for start in range(0, len(docs), MAX_INTERNAL_BATCH):
            chunk = docs[start : start + MAX_INTERNAL_BATCH]
            try:
                scores.extend(model.score_batch(request.query, chunk))
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from exc
        return {"scores": scores}

    @app.get("/spec")
    def spec():
        model = encoder_or_503()
        return {
            "dim": model.dim,
            "max_tokens": model.max_tokens,
            "uses_url": model.uses_url,
        }

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app
