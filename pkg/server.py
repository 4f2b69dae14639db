"""Point d'entrée pratique pour lancer le service de segmentation avec uvicorn."""
from __future__ import annotations

import logging
import os

import uvicorn


if __name__ == "__main__":
    logging.basicConfig(level=os.environ.get("CELLSEG_LOG_LEVEL", "INFO"))
    uvicorn.run(
        "routes.api:app",
        host=os.environ.get("CELLSEG_HOST", "127.0.0.1"),
        port=int(os.environ.get("CELLSEG_PORT", "8000")),
    )
