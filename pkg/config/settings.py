from __future__ import annotations

import logging
from functools import lru_cache

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    # Benchmark defaults (desk scale)
    shape: tuple[int, int, int, int] = (1, 8, 4096, 128)
    mode: str = "interleave"
    dims: tuple[int, ...] = (128,)
    iters: int = 50
    warmup: int = 5
    seed: int = 42
    precision: str = "32"
    check: bool = True
    base: float = 10000.0

    # Tile pipeline
    tile_rows: int = 128
    queue_depth: int = 4
    workers_stage1: int = 1
    workers_stage2: int = 1

    # Oracle: rows of R materialised at once
    oracle_tile_rows: int = 64

    log_level: str = "INFO"

    # HTTP surface
    web_host: str = "0.0.0.0"
    web_port: int = 8080
    # POST /bench refuses inputs larger than this many elements
    api_max_elements: int = 1 << 24

    model_config = SettingsConfigDict(env_prefix="ROME_", env_file=".env", extra="ignore")


class PipelineConfig(BaseModel):
    """Scheduling knobs of the two-stage tile pipeline."""

    model_config = ConfigDict(frozen=True)

    tile_rows: int = Field(128, ge=1)
    queue_depth: int = Field(4, ge=1)
    workers_stage1: int = Field(1, ge=1)
    workers_stage2: int = Field(1, ge=1)


# Named shape presets. "paper" is the 24-head, 28800-position 3D operator and
# "full-scale" an alias of it; "desk" keeps a full sweep under a minute on a laptop.
_FULL_SCALE = {"shape": (1, 24, 28800, 128), "dims": (44, 44, 40)}
PRESETS: dict[str, dict] = {
    "paper": _FULL_SCALE,
    "full-scale": _FULL_SCALE,
    "desk": {"shape": (1, 8, 4096, 128)},
}


@lru_cache
def get_settings() -> Settings:
    return Settings()


def get_pipeline_config() -> PipelineConfig:
    s = get_settings()
    return PipelineConfig(
        tile_rows=s.tile_rows,
        queue_depth=s.queue_depth,
        workers_stage1=s.workers_stage1,
        workers_stage2=s.workers_stage2,
    )
