"""FastAPI routes exposing the segmentation pipeline."""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import Response
from pydantic import BaseModel, Field

from core.pipeline import run_pipeline
from core.synthetic import generate_synthetic
from domain.errors import ImageReadError
from domain.models import SyntheticSpec
from persistence.storage import ConfigRepository, decode_image, encode_image

logger = logging.getLogger(__name__)


class SynthRequest(BaseModel):
    seed: int = 0
    spec: Dict[str, Any] = Field(default_factory=dict)


def _config_path() -> Optional[Path]:
    path = Path(os.environ.get("CELLSEG_CONFIG", "data/pipeline.cfg"))
    return path if path.exists() else None


repository = ConfigRepository(config_path=_config_path())

app = FastAPI(
    title="Cell Segmentation",
    description=(
        "API REST minimaliste pour segmenter des micrographies de cellules, "
        "compter les cellules sphériques et non sphériques et générer des "
        "images synthétiques de test."
    ),
    version="0.1.0",
)


@app.get("/config")
def get_config() -> dict:
    return repository.config.to_dict()


@app.post("/segment")
async def post_segment(request: Request, overrides: List[str] = Query(default=[], alias="set")) -> dict:
    payload = await request.body()
    if not payload:
        raise HTTPException(status_code=400, detail="Corps de requête vide: une image est attendue.")
    try:
        image = decode_image(payload).replicate_gray()
        config = repository.load(overrides)
        result = await run_in_threadpool(run_pipeline, image, config)
        logger.info("Segmented %d-byte upload: %s", len(payload), result.counts.to_dict())
    except ImageReadError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return result.to_dict()


@app.post("/synth")
def post_synth(request: SynthRequest) -> Response:
    try:
        spec = SyntheticSpec.from_dict(request.spec)
        image, _ = generate_synthetic(request.seed, spec)
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    expected = spec.expected_counts
    return Response(
        content=encode_image(image, "PPM"),
        media_type="image/x-portable-pixmap",
        headers={"X-Spheric": str(expected.spheric), "X-Nonspheric": str(expected.nonspheric)},
    )
