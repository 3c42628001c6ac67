"""The fused ``mul_add_mul`` elementwise operator and the single-threaded fused RoME arm."""
from __future__ import annotations

import numpy as np

from services.errors import ShapeMismatchError
from services.rome import ExtensionMaps, StructuredMap, apply_structured, check_operands
from services.tensor_core import AngleTable, OpCounter


def mul_add_mul(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    d: np.ndarray,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """out = a * b + c * d in one output buffer.

    numpy has no fused multiply-add ufunc, so each element is rounded after the
    products and after the add, the same as the unfused expression. Operands
    may broadcast over leading axes but must agree on the last one.
    """
    widths = {np.shape(v)[-1] if np.ndim(v) else 1 for v in (a, b, c, d)}
    if len(widths) != 1:
        raise ShapeMismatchError(f"mul_add_mul operands disagree in width: {sorted(widths)}")
    try:
        shape = np.broadcast_shapes(np.shape(a), np.shape(b), np.shape(c), np.shape(d))
    except ValueError as exc:
        raise ShapeMismatchError(f"mul_add_mul operands do not broadcast: {exc}") from None
    if out is None:
        out = np.empty(shape, dtype=np.result_type(a, b, c, d))
    np.multiply(a, b, out=out)
    out += np.multiply(c, d)
    return out


def rotate_tile(
    x: np.ndarray,
    map: StructuredMap | ExtensionMaps,
    counter: OpCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """The matrix half of the work: (operand for cos, operand for sin)."""
    if isinstance(map, ExtensionMaps):
        return apply_structured(map.m1, x, counter=counter), apply_structured(map.m2, x, counter=counter)
    return x, apply_structured(map, x, counter=counter)


def fused_rome(
    x: np.ndarray,
    angles: AngleTable,
    map: StructuredMap | ExtensionMaps,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Gather then one mul_add_mul: the sequential form of the pipelined arm."""
    x = np.asarray(x)
    check_operands(x, angles, map)
    primary, rotated = rotate_tile(x, map, counter)
    out = np.empty(x.shape, dtype=x.dtype)
    mul_add_mul(angles.cos_d, primary, angles.sin_d, rotated, out=out)
    if counter is not None:
        counter.add(2 * x.size)
    return out
