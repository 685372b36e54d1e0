"""Input validation helpers used by the estimators and grid types."""
from __future__ import annotations

import numpy as np


def as_float_field(values, name: str = "values", dtype=np.float32) -> np.ndarray:
    """Coerce to a 2-D float array and reject non-finite entries."""
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_unit_range(arr: np.ndarray, name: str = "values") -> None:
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got range "
                         f"[{arr.min():.4g}, {arr.max():.4g}]")


def check_min_dims(height: int, width: int, minimum: int = 8) -> None:
    if height < minimum or width < minimum:
        raise ValueError(f"grid dimensions must be >= {minimum}, "
                         f"got {height}x{width}")


def check_same_shape(*arrays: np.ndarray) -> tuple[int, ...]:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")
    return arrays[0].shape


def check_2d(X, name: str = "X", dtype=np.float64) -> np.ndarray:
    """Validate an (n_samples, n_features) matrix for the estimators."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_samples, n_features), "
                         f"got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_cell(cell, height: int, width: int, name: str = "cell") -> tuple[int, int]:
    r, c = int(cell[0]), int(cell[1])
    if not (0 <= r < height and 0 <= c < width):
        raise ValueError(f"{name} ({r}, {c}) outside a {height}x{width} grid")
    return r, c
