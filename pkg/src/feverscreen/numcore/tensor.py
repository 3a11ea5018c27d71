"""Batched image tensors.

Everything numeric in this package flows through 4-D float64 arrays laid out
as (batch, channels, height, width), C-contiguous. These helpers validate and
construct that layout; layers assume their inputs already satisfy it.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError


def as_tensor4(data, shape: tuple[int, int, int, int] | None = None) -> np.ndarray:
    """Coerce ``data`` to a C-contiguous float64 (n, c, h, w) array.

    If ``shape`` is given, ``data`` is reshaped to it (the element count must
    match). Raises ValueError on anything that is not 4-D afterwards.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None:
        if arr.size != int(np.prod(shape)):
            raise ValueError(
                f"cannot shape {arr.size} elements into {shape} "
                f"({int(np.prod(shape))} elements)"
            )
        arr = arr.reshape(shape)
    if arr.ndim != 4:
        raise ValueError(f"expected a (n, c, h, w) tensor, got shape {arr.shape}")
    return arr


def check_tensor4(x: np.ndarray, where: str = "tensor") -> np.ndarray:
    """Validate that ``x`` is a 4-D float64 array; return it unchanged."""
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        shape = getattr(x, "shape", None)
        raise ValueError(f"{where}: expected a 4-D array, got shape {shape}")
    if x.dtype != np.float64:
        raise ValueError(f"{where}: expected float64, got {x.dtype}")
    return x


def require_finite(x: np.ndarray, where: str = "tensor") -> np.ndarray:
    """Raise NumericError if ``x`` contains NaN or infinities."""
    if not np.all(np.isfinite(x)):
        bad = int(np.size(x) - np.count_nonzero(np.isfinite(x)))
        raise NumericError(f"{where}: {bad} non-finite value(s) in array of shape {x.shape}")
    return x


def zeros(n: int, c: int, h: int, w: int) -> np.ndarray:
    return np.zeros((n, c, h, w), dtype=np.float64)
