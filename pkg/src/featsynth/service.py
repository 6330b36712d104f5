"""HTTP inference service backing the mask-studio UI.

All endpoints live under /v1.  The checkpoint is loaded once at startup and
never mutated, so concurrent requests are safe and identical requests return
byte-identical payloads.
"""

from __future__ import annotations

import base64
import io
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .checkpoint import PipelineState, load_checkpoint
from .cluster_proxy import PROXY_PALETTE
from .semantic_mapper import ConditionRaster
from .synthesis import synthesize
from .toydata import CLASS_NAMES, SEG_PALETTE, image_to_pil, mask_to_indexed_png


class SynthesizeRequest(BaseModel):
    mask: str                    # base64 PNG (indexed for segmentation)
    kind: str = "segmentation"
    style_seed: int = 0


def _png_to_condition(payload: str, kind: str, img_res: int,
                      num_classes: int) -> ConditionRaster:
    try:
        raw = base64.b64decode(payload, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as e:  # noqa: BLE001 - any decode failure is a client error
        raise HTTPException(status_code=400, detail=f"malformed mask payload: {e}") from e
    if img.size != (img_res, img_res):
        raise HTTPException(
            status_code=422,
            detail=f"mask is {img.size[0]}x{img.size[1]}, expected {img_res}x{img_res}",
        )
    if kind == "segmentation":
        if img.mode != "P":
            img = img.convert("P")
        labels = np.asarray(img, dtype=np.int64)
        if labels.max() >= num_classes:
            raise HTTPException(
                status_code=422,
                detail=f"mask labels must be < {num_classes}, got {int(labels.max())}",
            )
        return ConditionRaster(kind="segmentation", data=torch.from_numpy(labels),
                               num_classes=num_classes)
    gray = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return ConditionRaster(kind=kind, data=torch.from_numpy(gray))


def _pil_to_b64(img: Image.Image) -> str:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(checkpoint_path: str | Path | None = None,
               state: PipelineState | None = None,
               defer_load: bool = False) -> FastAPI:
    app = FastAPI(title="featsynth inference service")
    app.state.model = state
    app.state.checkpoint_path = checkpoint_path

    def load_model() -> None:
        if app.state.model is None:
            app.state.model = load_checkpoint(app.state.checkpoint_path)

    app.state.load_model = load_model
    if not defer_load and state is None and checkpoint_path is not None:
        app.add_event_handler("startup", load_model)

    @app.get("/v1/health")
    def health():
        if app.state.model is None:
            return JSONResponse(status_code=503,
                                content={"status": "loading", "checkpoint_id": None})
        return {"status": "ok", "checkpoint_id": app.state.model.checkpoint_id}

    @app.get("/v1/classes")
    def classes():
        model: PipelineState = _model()
        kind = model.cfg.mapper.condition_kind
        k = model.cfg.cluster.k
        return {
            "kind": kind,
            "labels": CLASS_NAMES[: model.cfg.mapper.seg_classes],
            "palette": [list(c) for c in SEG_PALETTE[: model.cfg.mapper.seg_classes]],
            "proxy_palette": [list(PROXY_PALETTE[i % len(PROXY_PALETTE)]) for i in range(k)],
            "mask_size": model.cfg.gan.img_res,
        }

    def _model() -> PipelineState:
        if app.state.model is None:
            raise HTTPException(status_code=503, detail="model not loaded yet")
        return app.state.model

    @app.post("/v1/synthesize")
    def synth(req: SynthesizeRequest):
        model = _model()
        if req.kind != model.cfg.mapper.condition_kind:
            raise HTTPException(
                status_code=422,
                detail=f"loaded mapper handles {model.cfg.mapper.condition_kind!r}, "
                       f"not {req.kind!r}",
            )
        cond = _png_to_condition(req.mask, req.kind, model.cfg.gan.img_res,
                                 model.cfg.mapper.seg_classes)
        t0 = time.perf_counter()
        result = synthesize(model, cond, req.style_seed)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        k = model.cfg.cluster.k
        proxy_png = mask_to_indexed_png(
            result.proxy_mask, [PROXY_PALETTE[i % len(PROXY_PALETTE)] for i in range(k)]
        )
        return {
            "image": _pil_to_b64(image_to_pil(result.image)),
            "proxy_mask": _pil_to_b64(proxy_png),
            "latency_ms": latency_ms,
        }

    return app


def serve(checkpoint_path: str | Path, host: str = "127.0.0.1", port: int = 8008) -> None:
    import uvicorn

    uvicorn.run(create_app(checkpoint_path), host=host, port=port)
