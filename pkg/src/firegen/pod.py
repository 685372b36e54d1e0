"""Proper orthogonal decomposition of flattened burned-area snapshots.

Fits a truncated orthonormal basis from the left singular vectors of the
snapshot matrix (no mean subtraction; the covariance is built from raw
snapshots), exposes encode/decode projections, and reports compression
accuracy gamma and rate rho.
"""
from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import FormatError
from .validation import check_2d

FPOD_MAGIC = b"FPOD"
FPOD_VERSION = 1

GAMMA_WARN_THRESHOLD = 0.99


class PODBasis(TransformerMixin, BaseEstimator):
    """Truncated POD basis over flattened frames.

    Rows of the fit matrix are snapshots, columns are state entries (cells),
    so ``X[t]`` is the flattened frame at snapshot t. Modes live in state
    space: ``modes_`` is (n_state_dim, n_modes) with orthonormal columns,
    and ``eigenvalues_[i]`` is sigma_i^2 / (n_snapshots - 1).

    Parameters
    ----------
    n_modes : int
        Number of retained modes q.
    """

    def __init__(self, n_modes: int = 64):
        self.n_modes = n_modes

    def fit(self, X, y=None):
        X = check_2d(X, "X")
        n_snapshots, dim = X.shape
        if n_snapshots < 2:
            raise ValueError(f"need at least 2 snapshots, got {n_snapshots}")
        limit = min(dim, n_snapshots)
        if not (1 <= self.n_modes <= limit):
            raise ValueError(f"n_modes must be in [1, {limit}] for data of "
                             f"shape {X.shape}, got {self.n_modes}")
        # columns of the snapshot matrix are frames; 64-bit throughout
        u, s, _ = np.linalg.svd(X.T.astype(np.float64), full_matrices=False)
        eigenvalues = (s ** 2) / (n_snapshots - 1)
        eigenvalues[eigenvalues < 0] = 0.0
        modes = u[:, : self.n_modes].copy()
        # sign convention: largest-magnitude entry of each mode non-negative
        flip = modes[np.abs(modes).argmax(axis=0), np.arange(modes.shape[1])] < 0
        modes[:, flip] *= -1.0
        self.modes_ = modes
        self.eigenvalues_ = eigenvalues
        self.n_snapshots_fitted_ = n_snapshots
        self.n_features_in_ = dim
        gamma, _ = self.compression_stats()
        if gamma < GAMMA_WARN_THRESHOLD:
            warnings.warn(f"retained energy gamma={gamma:.4f} below "
                          f"{GAMMA_WARN_THRESHOLD}; consider raising n_modes",
                          UserWarning, stacklevel=2)
        return self

    def _require_fitted(self):
        if not hasattr(self, "modes_"):
            raise NotFittedError("PODBasis instance is not fitted yet")

    def transform(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_2d(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, basis was fitted "
                             f"with {self.n_features_in_}")
        return X @ self.modes_

    def inverse_transform(self, Z) -> np.ndarray:
        self._require_fitted()
        Z = check_2d(Z, "Z")
        if Z.shape[1] != self.modes_.shape[1]:
            raise ValueError(f"Z has {Z.shape[1]} columns, basis retains "
                             f"{self.modes_.shape[1]} modes")
        return Z @ self.modes_.T

    def encode(self, x) -> np.ndarray:
        """Project one flattened frame (or a batch) onto the basis."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self.transform(x[None, :])[0]
        return self.transform(x)

    def decode(self, latent) -> np.ndarray:
        """Lift latent coordinates back to a flattened frame (or batch)."""
        latent = np.asarray(latent, dtype=np.float64)
        if latent.ndim == 1:
            return self.inverse_transform(latent[None, :])[0]
        return self.inverse_transform(latent)

    def compression_stats(self) -> tuple[float, float]:
        """(gamma, rho): squared-eigenvalue energy ratio and q over the
        state dimension."""
        self._require_fitted()
        squared = self.eigenvalues_.astype(np.float64) ** 2
        total = squared.sum()
        gamma = 1.0 if total == 0 else float(squared[: self.n_modes].sum() / total)
        rho = self.n_modes / self.n_features_in_
        return gamma, rho


def save_basis(basis: PODBasis, path) -> None:
    basis._require_fitted()
    dim, q = basis.modes_.shape
    header = FPOD_MAGIC + struct.pack("<IIII", FPOD_VERSION, dim, q,
                                      basis.n_snapshots_fitted_)
    body = (np.ascontiguousarray(basis.modes_, dtype="<f8").tobytes()
            + np.ascontiguousarray(basis.eigenvalues_, dtype="<f8").tobytes())
    Path(path).write_bytes(header + body)


def load_basis(path) -> PODBasis:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 20:
        raise FormatError(f"{path}: truncated FPOD header")
    if raw[:4] != FPOD_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, dim, q, n_snapshots = struct.unpack("<IIII", raw[4:20])
    if version != FPOD_VERSION:
        raise FormatError(f"{path}: unsupported FPOD version {version}")
    n_eig = min(dim, n_snapshots)
    expected = 20 + 8 * (dim * q + n_eig)
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    modes = np.frombuffer(raw[20:20 + 8 * dim * q], dtype="<f8").reshape(dim, q)
    eigenvalues = np.frombuffer(raw[20 + 8 * dim * q:], dtype="<f8")
    basis = PODBasis(n_modes=q)
    basis.modes_ = modes.copy()
    basis.eigenvalues_ = eigenvalues.copy()
    basis.n_snapshots_fitted_ = n_snapshots
    basis.n_features_in_ = dim
    return basis


def flatten_sequences(sequences) -> np.ndarray:
    """(total_snapshots, H*W) matrix: every frame of every sequence, in order."""
    rows = [seq.frames.reshape(seq.n_snapshots, -1) for seq in sequences]
    widths = {r.shape[1] for r in rows}
    if len(widths) != 1:
        raise ValueError(f"sequences have mixed frame sizes: {sorted(widths)}")
    return np.concatenate(rows, axis=0).astype(np.float64)
