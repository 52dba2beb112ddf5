"""HTTP service exposing generation and embedding endpoints.

Wire protocol:

POST /v1/generate
    {"prompt_text": str, "seeds": [int], "width": int, "height": int}
    -> {"results": [{"seed": int, "png_base64": str, "nsfw_flagged": bool}]}
    Flags are report-only: pixels are always returned.

POST /v1/embed
    {"kind": str, "images": [{"id", "png_base64"}]} or
    {"kind": "clip_text", "texts": [{"id", "text"}]}
    -> inline {"kind", "dim", "ids", "rows"} by default, or written to a
    feature-cache file on the server when "output_path" is given.
"""

import base64
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import mock_models, ptdf
from .config import BackendConfig

IMAGE_KINDS = ("clip_image", "inception_pool", "inception_logits",
               "classifier_probs")
TEXT_KINDS = ("clip_text",)


class GenerateRequest(BaseModel):
    prompt_text: str
    seeds: List[int]
    width: int = 512
    height: int = 512


class ImageItem(BaseModel):
    id: str
    png_base64: str


class TextItem(BaseModel):
    id: str
    text: str


class EmbedRequest(BaseModel):
    kind: str
    images: Optional[List[ImageItem]] = None
    texts: Optional[List[TextItem]] = None
    output_path: Optional[str] = None


def _dim_for(config: BackendConfig, kind: str) -> int:
    if kind in ("clip_image", "clip_text"):
        return config.embed_dim
    if kind == "inception_pool":
        return 2048
    return config.logit_dim  # inception_logits / classifier_probs


def build_app(config: Optional[BackendConfig] = None) -> FastAPI:
    config = config or BackendConfig()
    app = FastAPI(title="ptd-sidecar")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "mode": config.mode}

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        if config.mode == "real":
            raise HTTPException(
                status_code=503,
                detail={"error": "model_unavailable",
                        "message": f"diffusion weights for "
                                   f"{config.diffusion_model!r} are not "
                                   f"loaded on this host"})
        results = []
        for seed in req.seeds:
            pixels = mock_models.render_texture(
                req.prompt_text, seed, req.width, req.height)
            png = mock_models.encode_png(pixels)
            results.append({
                "seed": seed,
                "png_base64": base64.b64encode(png).decode("ascii"),
                "nsfw_flagged": config.should_flag(req.prompt_text, seed),
            })
        return {"results": results}

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        if req.kind not in IMAGE_KINDS + TEXT_KINDS:
            raise HTTPException(status_code=400,
                                detail=f"unknown kind {req.kind!r}")
        if config.mode == "real":
            raise HTTPException(
                status_code=503,
                detail={"error": "model_unavailable",
                        "message": "embedding weights are not loaded "
                                   "on this host"})
        dim = _dim_for(config, req.kind)
        ids: List[str] = []
        rows: List[np.ndarray] = []
        if req.kind in TEXT_KINDS:
            if not req.texts:
                raise HTTPException(status_code=400,
                                    detail="kind clip_text requires 'texts'")
            for item in req.texts:
                ids.append(item.id)
                rows.append(mock_models.embed_text(item.text, dim))
        else:
            if not req.images:
                raise HTTPException(
                    status_code=400,
                    detail=f"kind {req.kind!r} requires 'images'")
            for item in req.images:
                try:
                    png = base64.b64decode(item.png_base64, validate=True)
                except Exception:
                    raise HTTPException(
                        status_code=400,
                        detail=f"invalid base64 for id {item.id!r}")
                ids.append(item.id)
                rows.append(mock_models.embed_image(png, req.kind, dim))
        matrix = np.stack(rows) if rows else np.zeros((0, dim), np.float32)
        if req.output_path:
            path = ptdf.write(req.kind, matrix, ids, req.output_path)
            return {"kind": req.kind, "n_rows": len(ids), "dim": dim,
                    "path": str(path),
                    "index_path": str(path) + ".index.jsonl"}
        return {"kind": req.kind, "dim": dim, "ids": ids,
                "rows": [row.tolist() for row in matrix]}

    return app
