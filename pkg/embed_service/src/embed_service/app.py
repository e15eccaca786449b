"""FastAPI application implementing the embedding wire protocol.

GET /health -> {"model_id", "dimension"}
POST /embed {"texts": [...]} -> {"model_id", "dimension", "vectors"}
Batches over the limit are rejected with a structured error and no
partial results.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoder import Encoder


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(encoder: Encoder, batch_limit: int = 64) -> FastAPI:
    app = FastAPI(title="embed-service", version="0.1.0")

    @app.get("/health")
    def health():
        return {"model_id": encoder.model_id, "dimension": encoder.dimension}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if len(request.texts) > batch_limit:
            return JSONResponse(
                status_code=413,
                content={
                    "error": {
                        "code": "batch_too_large",
                        "message": f"batch of {len(request.texts)} exceeds "
                        f"limit {batch_limit}",
                        "batch_limit": batch_limit,
                    }
                },
            )
        vectors = encoder.encode(request.texts)
        return {
            "model_id": encoder.model_id,
            "dimension": encoder.dimension,
            "vectors": [[float(x) for x in row] for row in vectors],
        }

    return app
