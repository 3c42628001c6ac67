"""Ground truth: explicit d x d rotation matrices applied by dense matrix product.

Also the direct-rotation arm of the benchmark. It always computes in float64
and pays the full O(S * D^2) cost on purpose.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from services.errors import ShapeMismatchError
from services.rome import ExtensionMaps, StructuredMap, build_extension_maps, build_m
from services.tensor_core import OpCounter, PairingMode, expand_cos_sin

logger = logging.getLogger(__name__)

MapOrMode = Union[StructuredMap, ExtensionMaps, PairingMode, str]

ORACLE_TILE_ROWS = 64


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    d: int
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@lru_cache(maxsize=64)
def densify(map: StructuredMap) -> DenseMatrix:
    entries = np.zeros((map.d, map.d), dtype=np.int64)
    entries[np.arange(map.d), map.src_index] = map.sign_vector
    entries.flags.writeable = False
    return DenseMatrix(map.d, entries)


def dense_apply(matrix: DenseMatrix, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Row-wise ``matrix @ x[s]`` for every row of x, as one matrix product."""
    x = np.asarray(x)
    if x.shape[-1] != matrix.d:
        raise ShapeMismatchError(f"matrix width {matrix.d} does not match input width {x.shape[-1]}")
    if counter is not None:
        counter.add(x.size * matrix.d)
    return x @ matrix.entries.T.astype(x.dtype)


def _operators(
    map_or_mode: MapOrMode, d: int, dims: Sequence[int] | None
) -> tuple[np.ndarray, np.ndarray, PairingMode, tuple[int, ...]]:
    """(primary, rotated) dense operators with the mode and axes they were built for."""
    if isinstance(map_or_mode, (str, PairingMode)):
        mode = PairingMode.parse(map_or_mode)
        dims = tuple(dims) if dims is not None else (d,)
        if mode is PairingMode.INTERLEAVE_HALF:
            map_or_mode = build_extension_maps(d, dims)
        else:
            map_or_mode = build_m(mode, dims)

    if isinstance(map_or_mode, ExtensionMaps):
        ext = map_or_mode
        return (
            densify(ext.m1).entries.astype(np.float64),
            densify(ext.m2).entries.astype(np.float64),
            PairingMode.INTERLEAVE_HALF,
            ext.dims,
        )
    return (
        np.eye(map_or_mode.d),
        densify(map_or_mode).entries.astype(np.float64),
        map_or_mode.mode or PairingMode.INTERLEAVE,
        map_or_mode.dims,
    )


def build_r(
    theta_row: Sequence[float] | np.ndarray,
    map_or_mode: MapOrMode,
    dims: Sequence[int] | None = None,
) -> DenseMatrix:
    """R = diag(cos) P + diag(sin) M, with P = I except for interleave-half (P = M1)."""
    theta_row = np.asarray(theta_row, dtype=np.float64).reshape(1, -1)
    d = theta_row.shape[1] * 2
    primary, rotated, mode, dims = _operators(map_or_mode, d, dims)
    if primary.shape[0] != d:
        raise ShapeMismatchError(f"theta row of {d // 2} angles does not fit a width-{primary.shape[0]} map")
    cos_d, sin_d = expand_cos_sin(theta_row, mode, dims, np.float64)
    entries = cos_d[0][:, None] * primary + sin_d[0][:, None] * rotated
    entries.flags.writeable = False
    return DenseMatrix(d, entries)


def oracle_forward(
    x: np.ndarray,
    thetas: np.ndarray,
    map_or_mode: MapOrMode,
    dims: Sequence[int] | None = None,
    counter: OpCounter | None = None,
    tile_rows: int = ORACLE_TILE_ROWS,
) -> np.ndarray:
    """out[..., s, :] = R(theta_s) @ x[..., s, :] in float64."""
    x = np.asarray(x, dtype=np.float64)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    seq_len, d = x.shape[-2], x.shape[-1]
    if thetas.shape != (seq_len, d // 2):
        raise ShapeMismatchError(
            f"angle table {thetas.shape} does not match input rows/width ({seq_len}, {d // 2})"
        )
    primary, rotated, mode, dims = _operators(map_or_mode, d, dims)
    cos_d, sin_d = expand_cos_sin(thetas, mode, dims, np.float64)

    out = np.empty_like(x)
    # R is materialised a tile of positions at a time to bound memory
    for r0 in range(0, seq_len, tile_rows):
        r1 = min(r0 + tile_rows, seq_len)
        r = cos_d[r0:r1, :, None] * primary + sin_d[r0:r1, :, None] * rotated
        out[..., r0:r1, :] = np.matmul(r, x[..., r0:r1, :, None])[..., 0]
    if counter is not None:
        counter.add(x.size * d)
    return out
