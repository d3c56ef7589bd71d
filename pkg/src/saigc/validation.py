"""Input validation helpers shared by the estimators and the pipeline."""

from __future__ import annotations

import numpy as np

from .scene import HEIGHT, RASTER_BYTES, WIDTH


def check_raster(raster, name: str = "raster") -> np.ndarray:
    """Return ``raster`` as a (24, 36, 3) uint8 array.

    Accepts an array of that shape or a flat 2592-byte buffer (row-major RGB).
    """
    if isinstance(raster, (bytes, bytearray, memoryview)):
        if len(raster) != RASTER_BYTES:
            raise ValueError(f"{name}: expected {RASTER_BYTES} bytes, got {len(raster)}")
        return np.frombuffer(bytes(raster), dtype=np.uint8).reshape(HEIGHT, WIDTH, 3)
    arr = np.asarray(raster)
    if arr.shape != (HEIGHT, WIDTH, 3):
        raise ValueError(f"{name}: expected shape {(HEIGHT, WIDTH, 3)}, got {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"{name}: values must be integers in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def check_rasters(rasters, name: str = "rasters") -> list[np.ndarray]:
    """Validate a batch: a (n, 24, 36, 3) array or any iterable of rasters."""
    arr = np.asarray(rasters) if not isinstance(rasters, (list, tuple)) else None
    if arr is not None and arr.ndim == 4:
        return [check_raster(r, name) for r in arr]
    return [check_raster(r, f"{name}[{i}]") for i, r in enumerate(rasters)]


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value
