from __future__ import annotations

import logging
import math

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from bench.config import BenchConfig
from bench.runner import BenchReport, run_bench
from config.settings import PRESETS, get_settings
from services.errors import EquivalenceError, RopeError

logger = logging.getLogger(__name__)
logging.basicConfig(level=get_settings().log_level)

app = FastAPI(title="RoME Bench")


@app.exception_handler(EquivalenceError)
async def equivalence_failed(request: Request, exc: EquivalenceError):
    return JSONResponse(
        status_code=409,
        content={
            "detail": str(exc),
            "impl": exc.impl,
            "max_abs": exc.max_abs,
            "index": list(exc.index),
        },
    )


@app.exception_handler(RopeError)
async def invalid_input(request: Request, exc: RopeError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.get("/presets")
async def presets():
    return PRESETS


@app.post("/bench", response_model=BenchReport)
def bench(cfg: BenchConfig) -> BenchReport:
    """Run one checked benchmark synchronously and return the report."""
    limit = get_settings().api_max_elements
    if math.prod(cfg.shape) > limit:
        raise HTTPException(status_code=422, detail=f"shape {list(cfg.shape)} exceeds {limit} elements")
    logger.info("Bench request: shape=%s mode=%s impls=%s", list(cfg.shape), cfg.mode.value,
                [i.value for i in cfg.impls])
    return run_bench(cfg)
