from __future__ import annotations


class RopeError(ValueError):
    """Base class for invalid inputs to the embedding kernels."""


class InvalidDimensionError(RopeError):
    pass


class ModeMismatchError(RopeError):
    pass


class ShapeMismatchError(RopeError):
    pass


class ConfigError(ValueError):
    """Bad benchmark configuration. The CLI exits with code 1."""


class EquivalenceError(RuntimeError):
    """An implementation disagreed with the dense oracle. The CLI exits with code 2."""

    def __init__(self, impl: str, max_abs: float, index: tuple[int, ...], tol: float):
        self.impl = impl
        self.max_abs = max_abs
        self.index = index
        self.tol = tol
        super().__init__(
            f"{impl} failed equivalence: max |delta| = {max_abs:.3e} > {tol:.0e} "
            f"(first failing index {index})"
        )
