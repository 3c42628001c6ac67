"""Structured-matrix RoPE.

``x_new`` of every split/merge recipe is a signed permutation of ``x``, so the
whole embedding collapses to ``cos * x + sin * (M x)``. ``M`` is kept as a
gather table (source index + sign per output feature) and only densified for
the matmul path and the oracle.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from services.errors import InvalidDimensionError, ModeMismatchError, ShapeMismatchError
from services.tensor_core import AngleTable, OpCounter, PairingMode, check_dims

logger = logging.getLogger(__name__)

ApplyPath = Literal["gather", "matmul"]
ExtForm = Literal["unified", "split"]


class Convention(str, enum.Enum):
    # REFERENCE reproduces x_new of the chunk/cat recipes; NEGATED flips every
    # sign, giving the transposed generator.
    REFERENCE = "reference"
    NEGATED = "negated"


@dataclass(frozen=True)
class StructuredMap:
    d: int
    src: tuple[int, ...]
    sign: tuple[int, ...]
    mode: PairingMode | None = None
    dims: tuple[int, ...] = ()
    convention: Convention = Convention.REFERENCE

    def __post_init__(self):
        if len(self.src) != self.d or len(self.sign) != self.d:
            raise ShapeMismatchError(f"map of width {self.d} needs {self.d} sources and signs")
        if sorted(self.src) != list(range(self.d)):
            raise InvalidDimensionError("map sources must be a permutation of 0..d-1")
        if any(s not in (1, -1) for s in self.sign):
            raise InvalidDimensionError("map signs must be +1 or -1")
        if not self.dims:
            object.__setattr__(self, "dims", (self.d,))

    @cached_property
    def src_index(self) -> np.ndarray:
        idx = np.asarray(self.src, dtype=np.intp)
        idx.flags.writeable = False
        return idx

    @cached_property
    def sign_vector(self) -> np.ndarray:
        vec = np.asarray(self.sign, dtype=np.int8)
        vec.flags.writeable = False
        return vec

    @cached_property
    def transposed(self) -> StructuredMap:
        src = [0] * self.d
        sign = [1] * self.d
        for j, (i, s) in enumerate(zip(self.src, self.sign)):
            src[i] = j
            sign[i] = s
        return StructuredMap(self.d, tuple(src), tuple(sign), self.mode, self.dims, self.convention)

    def transpose(self) -> StructuredMap:
        return self.transposed

    @property
    def is_permutation(self) -> bool:
        return all(s == 1 for s in self.sign)


@dataclass(frozen=True)
class ExtensionMaps:
    m1: StructuredMap
    m2: StructuredMap

    def __post_init__(self):
        if not self.m1.is_permutation:
            raise InvalidDimensionError("m1 must be a pure permutation")
        if self.m1.d != self.m2.d:
            raise ShapeMismatchError("m1 and m2 differ in width")

    @property
    def d(self) -> int:
        return self.m1.d

    @property
    def dims(self) -> tuple[int, ...]:
        return self.m1.dims

    @cached_property
    def halves(self) -> tuple[np.ndarray, np.ndarray]:
        """Output positions of the first and second half of every axis block."""
        first, second = [], []
        offset = 0
        for sub in self.dims:
            h = sub // 2
            first.append(np.arange(offset, offset + h))
            second.append(np.arange(offset + h, offset + sub))
            offset += sub
        return np.concatenate(first), np.concatenate(second)


def _half_block(d: int) -> tuple[list[int], list[int]]:
    h = d // 2
    src = [j + h for j in range(h)] + [j - h for j in range(h, d)]
    sign = [-1] * h + [1] * h
    return src, sign


def _interleave_block(d: int) -> tuple[list[int], list[int]]:
    src = [j + 1 if j % 2 == 0 else j - 1 for j in range(d)]
    sign = [-1 if j % 2 == 0 else 1 for j in range(d)]
    return src, sign


def _quarter_block(d: int) -> tuple[list[int], list[int]]:
    h = d // 2
    src, sign = _half_block(h)
    return src + [i + h for i in src], sign + sign


_GENERATORS = {
    PairingMode.HALF: _half_block,
    PairingMode.INTERLEAVE: _interleave_block,
    PairingMode.QUARTER: _quarter_block,
}


def build_m(
    mode: PairingMode | str,
    dims: Sequence[int],
    convention: Convention = Convention.REFERENCE,
) -> StructuredMap:
    """Block-diagonal diag(M_1, ..., M_n), one generator per axis, in the order given."""
    mode = PairingMode.parse(mode)
    if mode is PairingMode.INTERLEAVE_HALF:
        raise ModeMismatchError("interleave-half has no single M; use build_extension_maps")
    dims = check_dims(mode, dims)
    src: list[int] = []
    sign: list[int] = []
    offset = 0
    for sub in dims:
        block_src, block_sign = _GENERATORS[mode](sub)
        src.extend(i + offset for i in block_src)
        sign.extend(block_sign)
        offset += sub
    if convention is Convention.NEGATED:
        sign = [-s for s in sign]
    return StructuredMap(offset, tuple(src), tuple(sign), mode, dims, convention)


def build_extension_maps(d: int, dims: Sequence[int] | None = None) -> ExtensionMaps:
    mode = PairingMode.INTERLEAVE_HALF
    dims = check_dims(mode, dims if dims is not None else (d,), d)
    m1_src: list[int] = []
    m2_src: list[int] = []
    m2_sign: list[int] = []
    offset = 0
    for sub in dims:
        h = sub // 2
        evens = [offset + 2 * j for j in range(h)]
        odds = [offset + 2 * j + 1 for j in range(h)]
        m1_src.extend(evens + odds)
        m2_src.extend(odds + evens)
        m2_sign.extend([-1] * h + [1] * h)
        offset += sub
    m1 = StructuredMap(d, tuple(m1_src), (1,) * d, mode, dims)
    m2 = StructuredMap(d, tuple(m2_src), tuple(m2_sign), mode, dims)
    return ExtensionMaps(m1, m2)


def apply_structured(
    map: StructuredMap,
    x: np.ndarray,
    out: np.ndarray | None = None,
    counter: OpCounter | None = None,
) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != map.d:
        raise ShapeMismatchError(f"map width {map.d} does not match input width {x.shape[-1]}")
    gathered = np.take(x, map.src_index, axis=-1, out=out)
    np.multiply(gathered, map.sign_vector.astype(x.dtype), out=gathered)
    if counter is not None:
        counter.add(x.size)
    return gathered


def _check_pairing(angles: AngleTable, mode: PairingMode | None, dims: tuple[int, ...]) -> None:
    if mode is not None and angles.mode is not mode:
        raise ModeMismatchError(
            f"angle table was expanded for {angles.mode.value} mode, map is {mode.value}"
        )
    if angles.dims != dims and angles.mode is not PairingMode.INTERLEAVE:
        raise ModeMismatchError(
            f"angle table axes {list(angles.dims)} do not match map axes {list(dims)}"
        )


def check_operands(
    x: np.ndarray,
    angles: AngleTable,
    map: StructuredMap | ExtensionMaps,
) -> None:
    """Raise unless x, the angle table and the map were all built for the same layout."""
    if x.shape[-1] != map.d:
        raise ShapeMismatchError(f"map width {map.d} does not match input width {x.shape[-1]}")
    if isinstance(map, ExtensionMaps):
        angles.check_input(x, PairingMode.INTERLEAVE_HALF)
        _check_pairing(angles, PairingMode.INTERLEAVE_HALF, map.dims)
    else:
        angles.check_input(x)
        _check_pairing(angles, map.mode, map.dims)


def _rotated(
    x: np.ndarray,
    map: StructuredMap,
    path: ApplyPath,
    counter: OpCounter | None,
) -> np.ndarray:
    if path == "gather":
        return apply_structured(map, x, counter=counter)
    if path == "matmul":
        from services.dense_oracle import dense_apply, densify

        return dense_apply(densify(map), x, counter=counter)
    raise ValueError(f"unknown apply path {path!r} (choose gather or matmul)")


def rome_forward(
    x: np.ndarray,
    angles: AngleTable,
    map: StructuredMap,
    path: ApplyPath = "gather",
    counter: OpCounter | None = None,
) -> np.ndarray:
    x = np.asarray(x)
    check_operands(x, angles, map)

    x_new = _rotated(x, map, path, counter)
    out = angles.cos_d * x + angles.sin_d * x_new
    if counter is not None:
        counter.add(2 * x.size)
    return out.astype(x.dtype, copy=False)


def rome_ext_forward(
    x: np.ndarray,
    angles: AngleTable,
    ext: ExtensionMaps,
    form: ExtForm = "unified",
    path: ApplyPath = "gather",
    counter: OpCounter | None = None,
) -> np.ndarray:
    x = np.asarray(x)
    check_operands(x, angles, ext)

    if form == "unified":
        primary = _rotated(x, ext.m1, path, counter)
        rotated = _rotated(x, ext.m2, path, counter)
        out = angles.cos_d * primary + angles.sin_d * rotated
    elif form == "split":
        first, second = ext.halves
        x1 = np.take(x, ext.m1.src_index[first], axis=-1)
        x2 = np.take(x, ext.m1.src_index[second], axis=-1)
        cos1, cos2 = angles.cos_d[:, first], angles.cos_d[:, second]
        sin1, sin2 = angles.sin_d[:, first], angles.sin_d[:, second]
        out = np.empty(np.broadcast_shapes(x.shape, angles.cos_d.shape), dtype=np.result_type(x, angles.cos_d))
        out[..., first] = cos1 * x1 - sin1 * x2
        out[..., second] = cos2 * x2 + sin2 * x1
        if counter is not None:
            counter.add(x.size)
    else:
        raise ValueError(f"unknown extension form {form!r} (choose unified or split)")
    if counter is not None:
        counter.add(2 * x.size)
    return out.astype(x.dtype, copy=False)


def rome_backward(
    g: np.ndarray,
    angles: AngleTable,
    map: StructuredMap | ExtensionMaps,
) -> np.ndarray:
    """Gradient with respect to x: the transpose of the forward operator applied to g."""
    if isinstance(map, ExtensionMaps):
        return rome_ext_backward(g, angles, map)
    g = np.asarray(g)
    check_operands(g, angles, map)

    grad = angles.cos_d * g + apply_structured(map.transpose(), angles.sin_d * g)
    return grad.astype(g.dtype, copy=False)


def rome_ext_backward(g: np.ndarray, angles: AngleTable, ext: ExtensionMaps) -> np.ndarray:
    g = np.asarray(g)
    check_operands(g, angles, ext)

    grad = apply_structured(ext.m1.transpose(), angles.cos_d * g)
    grad += apply_structured(ext.m2.transpose(), angles.sin_d * g)
    return grad.astype(g.dtype, copy=False)
