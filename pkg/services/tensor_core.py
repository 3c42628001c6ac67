"""Frequencies, angle tables and the mode-dependent cos/sin layouts.

A tensor here is a C-contiguous ``numpy.ndarray`` whose last axis is the
feature width D. Every operation in ``services`` acts on the last axis only,
so a [B, N, S, D] batch is just a stack of independent [S, D] slabs.
"""
from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from services.errors import InvalidDimensionError, ModeMismatchError, ShapeMismatchError

logger = logging.getLogger(__name__)

DEFAULT_BASE = 10000.0


class Precision(str, enum.Enum):
    FP32 = "32"
    FP64 = "64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.FP32 else np.float64)


class PairingMode(str, enum.Enum):
    HALF = "half"
    INTERLEAVE = "interleave"
    INTERLEAVE_HALF = "interleave-half"
    QUARTER = "quarter"

    @classmethod
    def parse(cls, value: str | PairingMode) -> PairingMode:
        if isinstance(value, PairingMode):
            return value
        try:
            return cls(value.strip().lower().replace("_", "-"))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ModeMismatchError(f"unknown pairing mode {value!r} (choose from {choices})") from None

    @property
    def divisor(self) -> int:
        return 4 if self is PairingMode.QUARTER else 2

    def check_width(self, d: int) -> None:
        if d <= 0 or d % self.divisor:
            raise InvalidDimensionError(
                f"width {d} is invalid for {self.value} mode (needs a positive multiple of {self.divisor})"
            )


def check_dims(mode: PairingMode, dims: Sequence[int], d: int | None = None) -> tuple[int, ...]:
    """Validate a per-axis split of the feature width and return it as a tuple."""
    dims = tuple(int(v) for v in dims)
    if not dims:
        raise InvalidDimensionError("dims must list at least one sub-dimension")
    for sub in dims:
        mode.check_width(sub)
    if d is not None and sum(dims) != d:
        raise InvalidDimensionError(f"dims {list(dims)} sum to {sum(dims)}, expected D={d}")
    return dims


@dataclass(frozen=True)
class FreqSpec:
    per_axis_dims: tuple[int, ...]
    base: float = DEFAULT_BASE

    def __post_init__(self):
        object.__setattr__(self, "per_axis_dims", tuple(int(v) for v in self.per_axis_dims))
        if not self.per_axis_dims:
            raise InvalidDimensionError("per_axis_dims must not be empty")
        for sub in self.per_axis_dims:
            if sub <= 0 or sub % 2:
                raise InvalidDimensionError(f"sub-dimension {sub} must be even and positive")
        if not self.base > 0:
            raise InvalidDimensionError(f"frequency base must be positive, got {self.base}")

    @property
    def d(self) -> int:
        return sum(self.per_axis_dims)


@dataclass
class OpCounter:
    """Tallies multiply-adds so cost claims can be asserted without a clock."""

    macs: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, n: int) -> None:
        with self._lock:
            self.macs += int(n)


def frequencies(d: int, base: float = DEFAULT_BASE) -> np.ndarray:
    if d < 2 or d % 2:
        raise InvalidDimensionError(f"frequency width must be even and >= 2, got {d}")
    if not base > 0:
        raise InvalidDimensionError(f"frequency base must be positive, got {base}")
    # base ** (-2(i-1)/d) for i = 1..d/2
    return float(base) ** (-np.arange(0, d, 2, dtype=np.float64) / d)


def angle_table_1d(positions: Sequence[float] | np.ndarray, freqs: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1)
    return np.outer(positions, np.asarray(freqs, dtype=np.float64))


def angle_table_nd(grids: Sequence[Sequence[float] | np.ndarray], spec: FreqSpec) -> np.ndarray:
    if len(grids) != len(spec.per_axis_dims):
        raise ShapeMismatchError(
            f"got {len(grids)} position grids for {len(spec.per_axis_dims)} axes"
        )
    lengths = {len(g) for g in grids}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"position grids differ in length: {sorted(lengths)}")
    blocks = [
        angle_table_1d(g, frequencies(sub, spec.base))
        for g, sub in zip(grids, spec.per_axis_dims)
    ]
    return np.concatenate(blocks, axis=1)


def expansion_index(mode: PairingMode, dims: Sequence[int]) -> np.ndarray:
    """Column of the theta table feeding each of the D output features."""
    parts = []
    offset = 0
    for sub in dims:
        half = sub // 2
        if mode is PairingMode.INTERLEAVE:
            cols = np.repeat(np.arange(half), 2)
        elif mode is PairingMode.QUARTER:
            q = sub // 4
            cols = np.concatenate([np.arange(q), np.arange(q), np.arange(q, half), np.arange(q, half)])
        else:
            # half and interleave-half share a layout: angles index pairs, not raw features
            cols = np.tile(np.arange(half), 2)
        parts.append(cols + offset)
        offset += half
    return np.concatenate(parts)


def expand_cos_sin(
    theta: np.ndarray,
    mode: PairingMode,
    dims: Sequence[int] | None = None,
    dtype: np.dtype | type = np.float32,
) -> tuple[np.ndarray, np.ndarray]:
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    d = theta.shape[1] * 2
    dims = check_dims(mode, dims if dims is not None else (d,), d)
    idx = expansion_index(mode, dims)
    cos_d = np.ascontiguousarray(np.cos(theta)[:, idx], dtype=dtype)
    sin_d = np.ascontiguousarray(np.sin(theta)[:, idx], dtype=dtype)
    return cos_d, sin_d


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AngleTable:
    theta: np.ndarray
    cos_d: np.ndarray
    sin_d: np.ndarray
    mode: PairingMode
    dims: tuple[int, ...]

    @classmethod
    def build(
        cls,
        theta: np.ndarray,
        mode: PairingMode | str,
        dims: Sequence[int] | None = None,
        dtype: np.dtype | type = np.float32,
    ) -> AngleTable:
        mode = PairingMode.parse(mode)
        theta = np.array(np.atleast_2d(theta), dtype=np.float64)
        dims = check_dims(mode, dims if dims is not None else (theta.shape[1] * 2,), theta.shape[1] * 2)
        cos_d, sin_d = expand_cos_sin(theta, mode, dims, dtype)
        return cls(_frozen(theta), _frozen(cos_d), _frozen(sin_d), mode, dims)

    @property
    def width(self) -> int:
        return self.cos_d.shape[1]

    @property
    def rows(self) -> int:
        return self.cos_d.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.cos_d.dtype

    def check_input(self, x: np.ndarray, mode: PairingMode | None = None) -> None:
        if mode is not None and mode is not self.mode:
            raise ModeMismatchError(
                f"angle table was expanded for {self.mode.value} mode, not {mode.value}"
            )
        if x.ndim < 2 or x.shape[-1] != self.width or x.shape[-2] != self.rows:
            raise ShapeMismatchError(
                f"input shape {x.shape} does not end in [S, D] = [{self.rows}, {self.width}]"
            )


def positions_1d(seq_len: int, offset: int = 0) -> np.ndarray:
    return np.arange(offset, offset + seq_len, dtype=np.int64)


def grid_positions(extents: Sequence[int]) -> list[np.ndarray]:
    """Per-axis positions of a flattened grid, first listed axis varying slowest.

    ``grid_positions((T, H, W))`` gives the t-major order; pass the extents in
    another order for a different flattening.
    """
    extents = tuple(int(e) for e in extents)
    if any(e <= 0 for e in extents):
        raise ShapeMismatchError(f"grid extents must be positive, got {list(extents)}")
    return [axis.reshape(-1) for axis in np.indices(extents, dtype=np.int64)]


def balanced_grid(seq_len: int, n_axes: int) -> tuple[int, ...]:
    """Factor seq_len into n_axes extents that are as even as possible, smallest first."""
    if n_axes < 1 or seq_len < 1:
        raise ShapeMismatchError(f"cannot split S={seq_len} across {n_axes} axes")
    extents = []
    rest = seq_len
    for k in range(n_axes, 1, -1):
        target = int(rest ** (1.0 / k) + 1e-9)
        factor = max(f for f in range(1, max(target, 1) + 1) if rest % f == 0)
        extents.append(factor)
        rest //= factor
    extents.append(rest)
    return tuple(extents)


@dataclass(frozen=True, eq=False)
class RopeTables:
    """Everything position-dependent a run needs, built once outside the hot loop."""

    full: AngleTable
    per_axis: tuple[AngleTable, ...]
    grid: tuple[int, ...]


@lru_cache(maxsize=32)
def build_tables(
    seq_len: int,
    dims: tuple[int, ...],
    mode: PairingMode,
    base: float = DEFAULT_BASE,
    grid: tuple[int, ...] | None = None,
    precision: Precision = Precision.FP32,
) -> RopeTables:
    dims = check_dims(mode, dims)
    if grid is None:
        grid = balanced_grid(seq_len, len(dims))
    if len(grid) != len(dims) or int(np.prod(grid)) != seq_len:
        raise ShapeMismatchError(
            f"grid {list(grid)} does not cover S={seq_len} with {len(dims)} axes"
        )
    grids = grid_positions(grid) if len(dims) > 1 else [positions_1d(seq_len)]
    spec = FreqSpec(dims, base)
    theta = angle_table_nd(grids, spec)
    dtype = precision.dtype
    full = AngleTable.build(theta, mode, dims, dtype)
    per_axis = []
    col = 0
    for sub in dims:
        per_axis.append(AngleTable.build(theta[:, col:col + sub // 2], mode, (sub,), dtype))
        col += sub // 2
    logger.info(
        "Built %s tables: S=%d dims=%s grid=%s precision=%s",
        mode.value, seq_len, list(dims), list(grid), precision.value,
    )
    return RopeTables(full, tuple(per_axis), tuple(grid))
