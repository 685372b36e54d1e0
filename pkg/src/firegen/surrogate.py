"""LSTM sequence-to-sequence surrogate over POD latent trajectories.

Training windows are cut from each latent sequence by shifting the start
index one step at a time; the network maps m_in latent steps to all m_out
future steps in one shot, and long horizons are reached by feeding the
latest predictions back as input. Full-field prediction decodes the
predicted latents through the POD basis and thresholds at 0.4.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from torch import nn

from .errors import FormatError, NumericalError
from .metrics import DEFAULT_TAU, threshold_burned
from .sequences import BurnedSequence

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class WindowConfig:
    m_in: int = 4
    m_out: int = 4

    def __post_init__(self):
        if self.m_in < 1 or self.m_out < 1:
            raise ValueError("m_in and m_out must be >= 1")


def make_windows(seq: np.ndarray, cfg: WindowConfig):
    """All (input, target) pairs obtained by shifting the start index.

    ``seq`` is (T, q); pair k has input rows [k, k+m_in) and target rows
    [k+m_in, k+m_in+m_out), giving T - m_in - m_out + 1 pairs.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise ValueError(f"latent sequence must be (T, q), got {seq.shape}")
    t = seq.shape[0]
    need = cfg.m_in + cfg.m_out
    if t < need:
        raise ValueError(f"sequence length {t} shorter than m_in+m_out={need}")
    return [(seq[k:k + cfg.m_in], seq[k + cfg.m_in:k + need])
            for k in range(t - need + 1)]


class _SeqToSeqNet(nn.Module):
    """LSTM encoder over the input steps, linear head for all output steps."""

    def __init__(self, n_latent: int, hidden_size: int, num_layers: int,
                 m_out: int):
        super().__init__()
        self.lstm = nn.LSTM(n_latent, hidden_size, num_layers, batch_first=True)
        self.head = nn.Linear(hidden_size, n_latent * m_out)
        self.n_latent = n_latent
        self.m_out = m_out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.lstm(x)
        flat = self.head(out[:, -1])
        return flat.view(-1, self.m_out, self.n_latent)


class LSTMSurrogate(BaseEstimator):
    """Latent-space fire-spread forecaster.

    fit/rollout/predict operate on raw POD latents; per-dimension
    standardization (fitted on the training pool) is applied internally,
    since latent scales differ by orders of magnitude across modes.

    Parameters mirror the training protocol: windows of ``m_in`` inputs and
    ``m_out`` one-shot outputs, MSE loss, Adam, early stopping on validation
    loss with the given patience.
    """

    def __init__(self, m_in: int = 4, m_out: int = 4, hidden_size: int = 128,
                 num_layers: int = 2, batch_size: int = 16,
                 learning_rate: float = 1e-3, epochs: int = 300,
                 patience: int = 50, random_state: int = 0):
        self.m_in = m_in
        self.m_out = m_out
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.patience = patience
        self.random_state = random_state

    # -- construction ------------------------------------------------------

    def build(self, n_latent: int, dtype=torch.float32) -> "LSTMSurrogate":
        """Initialize parameters and identity normalization without training."""
        torch.manual_seed(self.random_state)
        self.net_ = _SeqToSeqNet(n_latent, self.hidden_size, self.num_layers,
                                 self.m_out).to(dtype)
        self.n_latent_ = n_latent
        self.norm_mean_ = np.zeros(n_latent)
        self.norm_scale_ = np.ones(n_latent)
        return self

    def _require_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("LSTMSurrogate instance is not fitted yet")

    def _dtype(self):
        return next(self.net_.parameters()).dtype

    def _normalize(self, z: np.ndarray) -> np.ndarray:
        return (np.asarray(z, dtype=np.float64) - self.norm_mean_) / self.norm_scale_

    def _denormalize(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.norm_scale_ + self.norm_mean_

    # -- training ----------------------------------------------------------

    def fit(self, sequences, validation_sequences=None):
        """Train on latent sequences (each (T, q) with T >= m_in + m_out)."""
        sequences = [np.asarray(s, dtype=np.float64) for s in sequences]
        if not sequences:
            raise ValueError("need at least one training sequence")
        n_latent = sequences[0].shape[1]
        pooled = np.concatenate(sequences, axis=0)
        self.norm_mean_ = pooled.mean(axis=0)
        scale = pooled.std(axis=0)
        # dims that are (numerically) constant in training carry no signal;
        # dividing by their ~0 std would let unseen data explode the loss
        scale[scale <= 1e-8 * scale.max()] = 1.0
        self.norm_scale_ = scale
        torch.manual_seed(self.random_state)
        self.net_ = _SeqToSeqNet(n_latent, self.hidden_size, self.num_layers,
                                 self.m_out)
        self.n_latent_ = n_latent
        cfg = WindowConfig(self.m_in, self.m_out)
        windows = [w for s in sequences for w in make_windows(self._normalize(s), cfg)]
        val_windows = None
        if validation_sequences is not None:
            val_windows = [w for s in validation_sequences
                           for w in make_windows(self._normalize(s), cfg)]
        self.loss_history_ = self._train_loop(windows, val_windows)
        return self

    def _train_loop(self, windows, val_windows) -> dict:
        if not windows:
            raise ValueError("no training windows")
        dtype = self._dtype()
        x = torch.as_tensor(np.stack([w[0] for w in windows]), dtype=dtype)
        y = torch.as_tensor(np.stack([w[1] for w in windows]), dtype=dtype)
        xv = yv = None
        if val_windows:
            xv = torch.as_tensor(np.stack([w[0] for w in val_windows]), dtype=dtype)
            yv = torch.as_tensor(np.stack([w[1] for w in val_windows]), dtype=dtype)
        optimizer = torch.optim.Adam(self.net_.parameters(), lr=self.learning_rate)
        loss_fn = nn.MSELoss()
        shuffler = torch.Generator().manual_seed(self.random_state + 1)
        history = {"train": [], "val": []}
        best_val = float("inf")
        best_state = None
        stale = 0
        n = x.shape[0]
        for epoch in range(self.epochs):
            self.net_.train()
            order = torch.randperm(n, generator=shuffler)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                optimizer.zero_grad()
                loss = loss_fn(self.net_(x[idx]), y[idx])
                if not torch.isfinite(loss):
                    raise NumericalError(
                        f"non-finite training loss at epoch {epoch} "
                        f"(lr={self.learning_rate}, batch {start // self.batch_size})")
                loss.backward()
                optimizer.step()
                total += loss.item() * len(idx)
            history["train"].append(total / n)
            if xv is not None:
                self.net_.eval()
                with torch.no_grad():
                    val = loss_fn(self.net_(xv), yv).item()
                if not np.isfinite(val):
                    raise NumericalError(f"non-finite validation loss at epoch {epoch}")
                history["val"].append(val)
                if val < best_val:
                    best_val = val
                    best_state = {k: v.detach().clone()
                                  for k, v in self.net_.state_dict().items()}
                    stale = 0
                else:
                    stale += 1
                    if stale >= self.patience:
                        break
        if best_state is not None:
            self.net_.load_state_dict(best_state)
        return history

    # -- inference ---------------------------------------------------------

    def window_loss(self, window) -> torch.Tensor:
        """MSE of one (input, target) window pair; differentiable."""
        self._require_fitted()
        dtype = self._dtype()
        x = torch.as_tensor(window[0], dtype=dtype)[None]
        y = torch.as_tensor(window[1], dtype=dtype)[None]
        return nn.MSELoss()(self.net_(x), y)

    def predict_steps(self, window: np.ndarray) -> np.ndarray:
        """One model call: m_in raw latent steps -> m_out raw latent steps."""
        self._require_fitted()
        z = self._normalize(window)
        if z.shape != (self.m_in, self.n_latent_):
            raise ValueError(f"window must be ({self.m_in}, {self.n_latent_}), "
                             f"got {np.asarray(window).shape}")
        self.net_.eval()
        with torch.no_grad():
            out = self.net_(torch.as_tensor(z, dtype=self._dtype())[None])[0]
        return self._denormalize(out.numpy())


def rollout(model: LSTMSurrogate, seed_window: np.ndarray,
            horizon: int) -> np.ndarray:
    """Iterative forecast: predict m_out steps, feed the latest m_in steps
    (now partly predictions) back in, until horizon steps exist; truncate.
    """
    if horizon < model.m_out:
        raise ValueError(f"horizon must be >= m_out={model.m_out}, got {horizon}")
    buffer = [row for row in np.asarray(seed_window, dtype=np.float64)]
    produced = []
    while len(produced) < horizon:
        window = np.stack(buffer[-model.m_in:])
        steps = model.predict_steps(window)
        produced.extend(steps)
        buffer.extend(steps)
    return np.stack(produced[:horizon])


def predict_burned(model: LSTMSurrogate, pod_basis, observed_frames, horizon: int,
                   snapshot_interval_hours: float = 6.0, ignition=(0, 0),
                   tau: float = DEFAULT_TAU):
    """Forecast full burned-area frames from m_in observed frames.

    POD-encode the observations, roll the surrogate forward, decode, clamp
    to [0, 1]; returns (continuous BurnedSequence, binary frame stack).
    """
    frames = np.asarray(observed_frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] != model.m_in:
        raise ValueError(f"observed_frames must be ({model.m_in}, H, W), "
                         f"got {frames.shape}")
    if frames.min() < 0 or frames.max() > 1:
        raise ValueError("observed frames must lie in [0, 1]")
    h, w = frames.shape[1:]
    if h * w != pod_basis.n_features_in_:
        raise ValueError(f"frames of {h}x{w} cells do not match basis "
                         f"dimension {pod_basis.n_features_in_}")
    latents = pod_basis.encode(frames.reshape(model.m_in, -1))
    predicted = rollout(model, latents, horizon)
    decoded = pod_basis.decode(predicted).reshape(horizon, h, w)
    clipped = np.clip(decoded, 0.0, 1.0).astype(np.float32)
    continuous = BurnedSequence(clipped, snapshot_interval_hours, ignition)
    binary = np.stack([threshold_burned(f, tau) for f in clipped])
    return continuous, binary


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(model: LSTMSurrogate, pod_basis, path) -> None:
    """Self-contained checkpoint: hyperparameters, weights, normalization
    statistics, and the POD basis the latents came from."""
    model._require_fitted()
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "params": model.get_params(),
        "n_latent": model.n_latent_,
        "state_dict": model.net_.state_dict(),
        "norm_mean": torch.from_numpy(np.ascontiguousarray(model.norm_mean_)),
        "norm_scale": torch.from_numpy(np.ascontiguousarray(model.norm_scale_)),
        "pod_modes": torch.from_numpy(np.ascontiguousarray(pod_basis.modes_)),
        "pod_eigenvalues": torch.from_numpy(
            np.ascontiguousarray(pod_basis.eigenvalues_)),
        "pod_n_snapshots_fitted": pod_basis.n_snapshots_fitted_,
    }
    torch.save(payload, Path(path))


def load_checkpoint(path):
    """Returns (LSTMSurrogate, PODBasis) reproducing saved predictions."""
    from .pod import PODBasis

    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise FormatError(f"{path}: unreadable checkpoint ({exc})") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version "
                          f"{payload.get('format_version')}")
    model = LSTMSurrogate(**payload["params"])
    model.build(payload["n_latent"])
    model.net_.load_state_dict(payload["state_dict"])
    model.norm_mean_ = payload["norm_mean"].numpy().astype(np.float64)
    model.norm_scale_ = payload["norm_scale"].numpy().astype(np.float64)
    modes = payload["pod_modes"].numpy().astype(np.float64)
    basis = PODBasis(n_modes=modes.shape[1])
    basis.modes_ = modes
    basis.eigenvalues_ = payload["pod_eigenvalues"].numpy().astype(np.float64)
    basis.n_snapshots_fitted_ = int(payload["pod_n_snapshots_fitted"])
    basis.n_features_in_ = modes.shape[0]
    return model, basis
