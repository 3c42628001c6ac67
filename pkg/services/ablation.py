"""Switch the three RoME ingredients on and off independently.

``matrix``      x_new from the structured map instead of chunk/cat
``merge_axes``  one block-diagonal map over D instead of per-axis slices
``fuse``        mul_add_mul instead of separate mul, mul, add

With all three off this is the per-axis reference; with all three on it is
the fused RoME arm.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from services.errors import ModeMismatchError
from services.fused import mul_add_mul
from services.rome import StructuredMap, apply_structured, build_m
from services.rope_reference import split_merge
from services.tensor_core import AngleTable, PairingMode, RopeTables


@dataclass(frozen=True)
class Variant:
    matrix: bool
    merge_axes: bool
    fuse: bool

    @property
    def label(self) -> str:
        parts = [name for name, on in (("matrix", self.matrix), ("merge", self.merge_axes), ("fuse", self.fuse)) if on]
        return "ablation:" + ("+".join(parts) or "none")


def variants(mode: PairingMode, n_axes: int) -> list[Variant]:
    """Every combination that has a meaning for this mode and axis count."""
    merge_options = (False, True) if n_axes > 1 else (True,)
    out = []
    for matrix, merge, fuse in itertools.product((False, True), merge_options, (False, True)):
        if n_axes > 1 and merge and not matrix and mode is not PairingMode.INTERLEAVE:
            # only interleave chunk/cat lines up across axis boundaries
            continue
        out.append(Variant(matrix, merge, fuse))
    return out


@lru_cache(maxsize=32)
def _map(mode: PairingMode, dims: tuple[int, ...]) -> StructuredMap:
    return build_m(mode, dims)


def _combine(cos: np.ndarray, x: np.ndarray, sin: np.ndarray, x_new: np.ndarray, fuse: bool) -> np.ndarray:
    if fuse:
        return mul_add_mul(cos, x, sin, x_new)
    a = x * cos
    b = x_new * sin
    return a + b


def _slab(x: np.ndarray, table: AngleTable, mode: PairingMode, dims: tuple[int, ...], variant: Variant) -> np.ndarray:
    if variant.matrix:
        x_new = apply_structured(_map(mode, dims), x)
    else:
        _, x_new = split_merge(x, mode)
    return _combine(table.cos_d, x, table.sin_d, x_new, variant.fuse).astype(x.dtype, copy=False)


def ablation_forward(
    x: np.ndarray,
    tables: RopeTables,
    mode: PairingMode | str,
    variant: Variant,
) -> np.ndarray:
    mode = PairingMode.parse(mode)
    if mode is PairingMode.INTERLEAVE_HALF:
        raise ModeMismatchError("interleave-half has no plain x_new; ablation covers the other modes")
    dims = tables.full.dims
    if variant.merge_axes and not variant.matrix and len(dims) > 1 and mode is not PairingMode.INTERLEAVE:
        raise ModeMismatchError(f"{mode.value} chunk/cat cannot run over merged axes {list(dims)}")

    x = np.asarray(x)
    if variant.merge_axes:
        return _slab(x, tables.full, mode, dims, variant)
    slabs = np.split(x, np.cumsum(dims)[:-1], axis=-1)
    outs = [
        _slab(np.ascontiguousarray(slab), table, mode, (sub,), variant)
        for slab, table, sub in zip(slabs, tables.per_axis, dims)
    ]
    return np.concatenate(outs, axis=-1)
