"""Split/rotate/merge RoPE exactly as model code writes it.

These are the baselines the structured path is measured against, so they keep
the chunk, rearrange and cat steps and copy every intermediate into a fresh
buffer instead of taking views.
"""
from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from services.errors import InvalidDimensionError, ModeMismatchError, ShapeMismatchError
from services.tensor_core import AngleTable, PairingMode, check_dims

logger = logging.getLogger(__name__)

__all__ = [
    "PairingMode",
    "split_merge",
    "rope_reference",
    "rope_reference_nd",
    "rope_reference_backward",
]


def _half(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x1, x2 = (part.copy() for part in np.split(x, 2, axis=-1))
    return x, np.concatenate((-x2, x1), axis=-1)


def _interleave(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rearrange(x, "... (d j) -> ... d j", j=2)
    pairs = x.reshape(*x.shape[:-1], x.shape[-1] // 2, 2)
    x1, x2 = (part.copy() for part in np.split(pairs, 2, axis=-1))
    x_new = np.concatenate((-x2, x1), axis=-1).reshape(x.shape)
    return x, x_new


def _interleave_half(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pairs = x.reshape(*x.shape[:-1], x.shape[-1] // 2, 2)
    x1, x2 = (part.squeeze(-1).copy() for part in np.split(pairs, 2, axis=-1))
    # the recipe reassigns x to the evens-first basis before rotating
    permuted = np.concatenate((x1, x2), axis=-1)
    return permuted, np.concatenate((-x2, x1), axis=-1)


def _quarter(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q1, q2, q3, q4 = (part.copy() for part in np.split(x, 4, axis=-1))
    return x, np.concatenate((-q2, q1, -q4, q3), axis=-1)


_RECIPES: dict[PairingMode, Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]] = {
    PairingMode.HALF: _half,
    PairingMode.INTERLEAVE: _interleave,
    PairingMode.INTERLEAVE_HALF: _interleave_half,
    PairingMode.QUARTER: _quarter,
}


def split_merge(x: np.ndarray, mode: PairingMode | str) -> tuple[np.ndarray, np.ndarray]:
    """Return (basis, x_new) for one mode: the operand pair multiplied by cos and sin."""
    mode = PairingMode.parse(mode)
    mode.check_width(x.shape[-1])
    return _RECIPES[mode](x)


def _check_single_axis(angles: AngleTable, mode: PairingMode) -> None:
    if len(angles.dims) > 1 and mode is not PairingMode.INTERLEAVE:
        raise ModeMismatchError(
            f"angle table is split across axes {list(angles.dims)}; use rope_reference_nd"
        )


def rope_reference(x: np.ndarray, angles: AngleTable, mode: PairingMode | str) -> np.ndarray:
    mode = PairingMode.parse(mode)
    x = np.asarray(x)
    mode.check_width(x.shape[-1])
    angles.check_input(x, mode)
    _check_single_axis(angles, mode)

    basis, x_new = _RECIPES[mode](x)
    out = basis * angles.cos_d + x_new * angles.sin_d
    return out.astype(x.dtype, copy=False)


def rope_reference_nd(
    x: np.ndarray,
    per_axis_angles: Sequence[AngleTable],
    dims: Sequence[int],
    mode: PairingMode | str,
) -> np.ndarray:
    mode = PairingMode.parse(mode)
    x = np.asarray(x)
    dims = check_dims(mode, dims, x.shape[-1])
    if len(per_axis_angles) != len(dims):
        raise ShapeMismatchError(f"got {len(per_axis_angles)} angle tables for {len(dims)} axes")
    for table, sub in zip(per_axis_angles, dims):
        if table.width != sub:
            raise InvalidDimensionError(f"axis table has width {table.width}, expected {sub}")

    slabs = np.split(x, np.cumsum(dims)[:-1], axis=-1)
    outs = [
        rope_reference(np.ascontiguousarray(slab), table, mode)
        for slab, table in zip(slabs, per_axis_angles)
    ]
    return np.concatenate(outs, axis=-1)


def _unpermute(y: np.ndarray) -> np.ndarray:
    y1, y2 = np.split(y, 2, axis=-1)
    return np.stack((y1, y2), axis=-1).reshape(y.shape)


def rope_reference_backward(g: np.ndarray, angles: AngleTable, mode: PairingMode | str) -> np.ndarray:
    """Gradient of rope_reference with respect to x: the same recipe rotating by -theta."""
    mode = PairingMode.parse(mode)
    g = np.asarray(g)
    mode.check_width(g.shape[-1])
    angles.check_input(g, mode)
    _check_single_axis(angles, mode)

    if mode is PairingMode.INTERLEAVE_HALF:
        _, g_new = _half(g)
        return _unpermute(g * angles.cos_d - g_new * angles.sin_d).astype(g.dtype, copy=False)
    _, g_new = _RECIPES[mode](g)
    return (g * angles.cos_d - g_new * angles.sin_d).astype(g.dtype, copy=False)
