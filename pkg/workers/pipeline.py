"""Two-stage tile pipeline: gather tiles on one set of threads, combine on another.

Stage 1 plays the matrix unit (apply M to a tile of rows), stage 2 the vector
unit (mul_add_mul into the output). Tiles are whole rows, so every output
region is written by exactly one stage-2 task and the result does not depend
on scheduling.
"""
from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from config.settings import PipelineConfig, get_pipeline_config
from services.fused import mul_add_mul, rotate_tile
from services.rome import ExtensionMaps, StructuredMap, check_operands
from services.tensor_core import AngleTable

logger = logging.getLogger(__name__)

StageHook = Callable[[str, int], None]

QUIT = None


class TileQueue(queue.Queue):
    """Bounded hand-off queue that remembers the most items it ever held."""

    def __init__(self, maxsize: int):
        super().__init__(maxsize)
        self.high_water = 0

    def _put(self, item):
        super()._put(item)
        self.high_water = max(self.high_water, self._qsize())


@dataclass(frozen=True, eq=False)
class Tile:
    index: int
    start: int
    stop: int
    primary: np.ndarray
    rotated: np.ndarray


@dataclass
class PipelineStats:
    tiles: int = 0
    completed: int = 0
    high_water: int = 0
    queue_depth: int = 0
    errors: list[BaseException] = field(default_factory=list)


def tile_bounds(seq_len: int, tile_rows: int) -> list[tuple[int, int]]:
    return [(r0, min(r0 + tile_rows, seq_len)) for r0 in range(0, seq_len, tile_rows)]


def pipelined_rome(
    x: np.ndarray,
    angles: AngleTable,
    map: StructuredMap | ExtensionMaps,
    cfg: PipelineConfig | None = None,
    stage_hook: StageHook | None = None,
    stats: PipelineStats | None = None,
) -> np.ndarray:
    """RoME forward through the two-stage pipeline.

    ``stage_hook(stage, tile_index)`` runs before each unit of work, with stage
    "rotate" or "combine"; tests use it to inject delays.
    """
    x = np.asarray(x)
    check_operands(x, angles, map)
    cfg = cfg or get_pipeline_config()
    stats = stats if stats is not None else PipelineStats()

    bounds = tile_bounds(x.shape[-2], cfg.tile_rows)
    out = np.empty(x.shape, dtype=x.dtype)
    work: queue.SimpleQueue = queue.SimpleQueue()
    handoff = TileQueue(cfg.queue_depth)
    failed = threading.Event()
    lock = threading.Lock()

    for index, (r0, r1) in enumerate(bounds):
        work.put((index, r0, r1))
    for _ in range(cfg.workers_stage1):
        work.put(QUIT)

    def fail(exc: BaseException) -> None:
        logger.exception("Pipeline stage failed")
        with lock:
            stats.errors.append(exc)
        failed.set()

    def rotate_stage() -> None:
        while True:
            job = work.get()
            if job is QUIT:
                return
            if failed.is_set():
                continue
            index, r0, r1 = job
            try:
                if stage_hook:
                    stage_hook("rotate", index)
                primary, rotated = rotate_tile(x[..., r0:r1, :], map)
                primary.flags.writeable = False
                rotated.flags.writeable = False
                # published only once both operands are complete
                handoff.put(Tile(index, r0, r1, primary, rotated))
            except BaseException as exc:
                fail(exc)

    def combine_stage() -> None:
        # keeps draining after a failure so stage 1 never blocks on a full queue
        while True:
            tile = handoff.get()
            if tile is QUIT:
                return
            if failed.is_set():
                continue
            try:
                if stage_hook:
                    stage_hook("combine", tile.index)
                mul_add_mul(
                    angles.cos_d[tile.start:tile.stop],
                    tile.primary,
                    angles.sin_d[tile.start:tile.stop],
                    tile.rotated,
                    out=out[..., tile.start:tile.stop, :],
                )
                with lock:
                    stats.completed += 1
            except BaseException as exc:
                fail(exc)

    rotators = [
        threading.Thread(target=rotate_stage, name=f"rome-rotate-{i}", daemon=True)
        for i in range(cfg.workers_stage1)
    ]
    combiners = [
        threading.Thread(target=combine_stage, name=f"rome-combine-{i}", daemon=True)
        for i in range(cfg.workers_stage2)
    ]
    for t in rotators + combiners:
        t.start()
    for t in rotators:
        t.join()
    # every tile is enqueued by now, so the sentinels land behind real work
    for _ in combiners:
        handoff.put(QUIT)
    for t in combiners:
        t.join()

    stats.tiles = len(bounds)
    stats.high_water = handoff.high_water
    stats.queue_depth = cfg.queue_depth
    if stats.errors:
        raise stats.errors[0]
    if stats.completed != stats.tiles:
        raise RuntimeError(f"pipeline finished {stats.completed} of {stats.tiles} tiles")
    logger.debug(
        "Pipelined %d tiles (tile_rows=%d, queue_depth=%d, high water %d)",
        stats.tiles, cfg.tile_rows, cfg.queue_depth, stats.high_water,
    )
    return out
