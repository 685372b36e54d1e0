"""3-D convolutional vector-quantized autoencoder over burned-area clips.

A clip (T, H, W) in [0, 1] is encoded by strided 3-D convolutions into a
latent grid, each latent position is snapped to its Euclidean-nearest
codebook entry (straight-through gradients), and a mirrored transposed
decoder reconstructs the clip behind a sigmoid. New fire videos come from
decoding a convex mix of quantized training latents and unit Gaussian
noise: decoder(alpha * e + (1 - alpha) * eps), clamped to [0, 1].
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from torch import nn

from .errors import FormatError, NumericalError
from .seeding import child_seed
from .sequences import BurnedSequence, save_dataset

CHECKPOINT_VERSION = 1


def nearest_codes(entries: np.ndarray, z: np.ndarray):
    """Map each latent vector to the nearest codebook entry (lowest index
    wins ties). ``z`` is (..., d); returns (quantized, indices).
    """
    entries = np.asarray(entries, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != entries.shape[1]:
        raise ValueError(f"latent dim {z.shape[-1]} does not match codebook "
                         f"dim {entries.shape[1]}")
    flat = z.reshape(-1, entries.shape[1])
    indices = np.empty(flat.shape[0], dtype=np.int64)
    for start in range(0, flat.shape[0], 4096):
        chunk = flat[start:start + 4096]
        d2 = ((chunk[:, None, :] - entries[None, :, :]) ** 2).sum(axis=2)
        indices[start:start + 4096] = d2.argmin(axis=1)
    quantized = entries[indices].reshape(z.shape)
    return quantized, indices.reshape(z.shape[:-1])


class Codebook(nn.Module):
    """K trainable code vectors plus per-entry usage counters."""

    def __init__(self, size: int, dim: int):
        super().__init__()
        if size < 2:
            raise ValueError(f"codebook size must be >= 2, got {size}")
        self.entries = nn.Parameter(torch.randn(size, dim))
        self.register_buffer("usage_counts", torch.zeros(size, dtype=torch.long))

    def quantize(self, z: torch.Tensor):
        """z is (n, d). Nearest entry per row; first index wins ties."""
        if z.shape[-1] != self.entries.shape[1]:
            raise ValueError(f"latent dim {z.shape[-1]} does not match "
                             f"codebook dim {self.entries.shape[1]}")
        d2 = (z[:, None, :] - self.entries[None, :, :]).pow(2).sum(-1)
        indices = d2.argmin(dim=1)
        with torch.no_grad():
            self.usage_counts += torch.bincount(indices,
                                                minlength=len(self.entries))
        return self.entries[indices], indices

    def reset_usage(self):
        self.usage_counts.zero_()


def _enc_kernel(t_stride: int, s_stride: int):
    # kernel 3 keeps stride-1 dims intact; kernel 4 halves cleanly at stride 2
    # (kernel divisible by stride also avoids checkerboard artifacts in the
    # mirrored transposed conv, which otherwise show up as frame-to-frame
    # brightness ripple along the time axis)
    s = 4 if s_stride == 2 else 3
    return (4 if t_stride == 2 else 3, s, s)


class _VQVAENet(nn.Module):
    def __init__(self, channels, temporal_strides, spatial_strides, latent_dim,
                 codebook_size):
        super().__init__()
        if not (len(channels) == len(temporal_strides) == len(spatial_strides)):
            raise ValueError("channels and stride lists must share a length")
        if any(s not in (1, 2) for s in temporal_strides + spatial_strides):
            raise ValueError("strides must be 1 or 2")
        enc, dec = [], []
        ins = (1,) + tuple(channels[:-1])
        for c_in, c_out, ts, ss in zip(ins, channels, temporal_strides,
                                       spatial_strides):
            k = _enc_kernel(ts, ss)
            enc += [nn.Conv3d(c_in, c_out, k, stride=(ts, ss, ss), padding=1),
                    nn.ReLU()]
            # the transposed conv with the same kernel/stride/padding inverts
            # the encoder shape exactly (even extents assumed, checked below)
            dec[:0] = [nn.ConvTranspose3d(c_out, c_in, k, stride=(ts, ss, ss),
                                          padding=1),
                       nn.ReLU() if c_in != 1 else nn.Sigmoid()]
        self.encoder = nn.Sequential(*enc, nn.Conv3d(channels[-1], latent_dim, 1))
        self.decoder = nn.Sequential(nn.Conv3d(latent_dim, channels[-1], 1),
                                     nn.ReLU(), *dec)
        self.codebook = Codebook(codebook_size, latent_dim)
        self.t_factor = int(np.prod(temporal_strides))
        self.s_factor = int(np.prod(spatial_strides))
        self.latent_dim = latent_dim

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 1, T, H, W) -> latent positions (B, T', H', W', d)."""
        t, h, w = x.shape[2:]
        if t % self.t_factor or h % self.s_factor or w % self.s_factor:
            raise ValueError(f"clip dims {(t, h, w)} not divisible by strides "
                             f"({self.t_factor}, {self.s_factor}, {self.s_factor})")
        return self.encoder(x).permute(0, 2, 3, 4, 1)

    def decode(self, z_positions: torch.Tensor) -> torch.Tensor:
        return self.decoder(z_positions.permute(0, 4, 1, 2, 3))

    def forward(self, x: torch.Tensor):
        z = self.encode(x)
        e, indices = self.codebook.quantize(z.reshape(-1, self.latent_dim))
        e = e.view(z.shape)
        recon = self.decode(straight_through(z, e))
        return recon, z, e, indices.view(z.shape[:-1])


def straight_through(z: torch.Tensor, e: torch.Tensor) -> torch.Tensor:
    """Forward value e; gradients pass to z untouched, none to the codebook."""
    if z.shape != e.shape:
        raise ValueError(f"shape mismatch: {tuple(z.shape)} vs {tuple(e.shape)}")
    return z + (e - z).detach()


def vq_losses(clip: torch.Tensor, reconstructed: torch.Tensor, z: torch.Tensor,
              e: torch.Tensor, beta: float):
    """(L_recon, L_codebook, L_commit, L_total); elementwise sums, batch mean.

    Stop-gradients route L_codebook to the codebook only and L_commit to the
    encoder only.
    """
    if clip.shape != reconstructed.shape or z.shape != e.shape:
        raise ValueError("shape mismatch between losses inputs")
    batch = clip.shape[0]
    recon = (reconstructed - clip).pow(2).reshape(batch, -1).sum(1).mean()
    codebook = (z.detach() - e).pow(2).reshape(batch, -1).sum(1).mean()
    commit = beta * (e.detach() - z).pow(2).reshape(batch, -1).sum(1).mean()
    return recon, codebook, commit, recon + codebook + commit


class VQVAE(BaseEstimator):
    """Trainable generator of burned-area videos.

    fit() takes clips as an (N, T, H, W) array in [0, 1]. The codebook is
    seeded from encoder outputs of a warmup batch and jointly trained; codes
    unused over a full epoch are re-seeded from fresh encoder outputs.
    """

    def __init__(self, beta: float = 0.25, alpha: float = 0.6,
                 codebook_size: int = 128, latent_dim: int = 64,
                 channels: tuple = (32, 64, 64),
                 temporal_strides: tuple = (1, 2, 2),
                 spatial_strides: tuple = (2, 2, 2),
                 learning_rate: float = 1e-3, epochs: int = 100,
                 batch_size: int = 4, random_state: int = 0):
        self.beta = beta
        self.alpha = alpha
        self.codebook_size = codebook_size
        self.latent_dim = latent_dim
        self.channels = channels
        self.temporal_strides = temporal_strides
        self.spatial_strides = spatial_strides
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _check_config(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    def build(self) -> "VQVAE":
        """Initialize network weights without training."""
        self._check_config()
        torch.manual_seed(self.random_state)
        self.net_ = _VQVAENet(tuple(self.channels),
                              tuple(self.temporal_strides),
                              tuple(self.spatial_strides),
                              self.latent_dim, self.codebook_size)
        return self

    def _require_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("VQVAE instance is not fitted yet")

    @staticmethod
    def _as_batch(clips) -> torch.Tensor:
        arr = np.asarray(clips, dtype=np.float32)
        if arr.ndim == 3:
            arr = arr[None]
        if arr.ndim != 4:
            raise ValueError(f"clips must be (N, T, H, W), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("clip values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("clip values must lie in [0, 1]")
        if not arr.flags.writeable:  # torch rejects read-only views
            arr = arr.copy()
        return torch.from_numpy(arr).unsqueeze(1)

    # -- training ----------------------------------------------------------

    def fit(self, clips, y=None):
        x = self._as_batch(clips)
        self.build()
        gen = torch.Generator().manual_seed(self.random_state + 1)
        n = x.shape[0]
        warmup = x[: max(1, min(self.batch_size, n))]
        with torch.no_grad():
            z0 = self.net_.encode(warmup).reshape(-1, self.latent_dim)
            pick = torch.randint(0, z0.shape[0], (self.codebook_size,),
                                 generator=gen)
            self.net_.codebook.entries.data.copy_(z0[pick])
        optimizer = torch.optim.Adam(self.net_.parameters(),
                                     lr=self.learning_rate)
        history = {"recon": [], "codebook": [], "commit": [], "total": []}
        for epoch in range(self.epochs):
            self.net_.codebook.reset_usage()
            order = torch.randperm(n, generator=gen)
            sums = np.zeros(4)
            last_z = None
            for start in range(0, n, self.batch_size):
                batch = x[order[start:start + self.batch_size]]
                optimizer.zero_grad()
                recon, z, e, _ = self.net_(batch)
                losses = vq_losses(batch, recon, z, e, self.beta)
                if not torch.isfinite(losses[3]):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch}: recon={losses[0]}, "
                        f"codebook={losses[1]}, commit={losses[2]}")
                losses[3].backward()
                optimizer.step()
                sums += [l.item() * batch.shape[0] for l in losses]
                last_z = z.detach().reshape(-1, self.latent_dim)
            for key, value in zip(("recon", "codebook", "commit", "total"),
                                  sums / n):
                history[key].append(value)
            # rescue optimization from collapsed codes; with lr = 0 nothing
            # moves, so a zero-lr run stays a true freeze
            dead = (self.net_.codebook.usage_counts == 0).nonzero().flatten()
            if len(dead) and last_z is not None and self.learning_rate > 0:
                pick = torch.randint(0, last_z.shape[0], (len(dead),),
                                     generator=gen)
                with torch.no_grad():
                    self.net_.codebook.entries.data[dead] = last_z[pick]
        self.loss_history_ = history
        return self

    # -- inference ---------------------------------------------------------

    def encode(self, clip) -> np.ndarray:
        """Clip (T, H, W) -> continuous latents (T', H', W', d)."""
        self._require_fitted()
        with torch.no_grad():
            return self.net_.encode(self._as_batch(clip))[0].numpy()

    def quantize(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Snap latents to the codebook; updates usage counters."""
        self._require_fitted()
        zt = torch.as_tensor(np.asarray(z, dtype=np.float32))
        with torch.no_grad():
            e, idx = self.net_.codebook.quantize(zt.reshape(-1, self.latent_dim))
        return (e.view(zt.shape).numpy(), idx.view(zt.shape[:-1]).numpy())

    def reconstruct(self, clip) -> np.ndarray:
        """Deterministic encode-quantize-decode round trip."""
        self._require_fitted()
        with torch.no_grad():
            recon, _, _, _ = self.net_(self._as_batch(clip))
        return recon[0, 0].clamp(0.0, 1.0).numpy()

    def generate(self, source_clip, alpha: float | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
        """Decode a noisy mix of the source clip's quantized latents.

        alpha=1 skips the noise draw entirely and returns the plain
        reconstruction.
        """
        self._require_fitted()
        alpha = self.alpha if alpha is None else alpha
        if not (0.0 <= alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        if alpha == 1.0:
            return self.reconstruct(source_clip)
        rng = rng or np.random.default_rng()
        with torch.no_grad():
            z = self.net_.encode(self._as_batch(source_clip))
            e, _ = self.net_.codebook.quantize(z.reshape(-1, self.latent_dim))
            e = e.view(z.shape)
            eps = torch.from_numpy(
                rng.standard_normal(tuple(e.shape)).astype(np.float32))
            out = self.net_.decode(alpha * e + (1.0 - alpha) * eps)
        return out[0, 0].clamp(0.0, 1.0).numpy()


def generate_dataset(model: VQVAE, training_clips, count: int,
                     alpha: float | None = None, master_seed: int = 0,
                     directory=None, snapshot_interval_hours: float = 6.0):
    """Sample ``count`` new sequences from clips drawn with replacement.

    Per-sequence child seeds make the output prefix-stable: the first k of
    a count=n run equal a count=k run bit for bit. When ``directory`` is
    given the sequences are also written as an FSEQ dataset flagged
    generated=true.
    """
    clips = np.asarray(training_clips, dtype=np.float32)
    if clips.ndim != 4 or clips.shape[0] < 1:
        raise ValueError(f"training_clips must be non-empty (N, T, H, W), "
                         f"got {clips.shape}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    sequences = []
    for i in range(count):
        seed = child_seed(master_seed, "generate", i)
        rng = np.random.default_rng(seed)
        source = int(rng.integers(clips.shape[0]))
        frames = model.generate(clips[source], alpha=alpha, rng=rng)
        sequences.append(BurnedSequence(frames, snapshot_interval_hours,
                                        (0, 0), seed=seed))
    if directory is not None:
        save_dataset(sequences, directory,
                     params={"alpha": model.alpha if alpha is None else alpha,
                             "count": count},
                     master_seed=master_seed, generated=True)
    return sequences


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

def save_vqvae(model: VQVAE, path) -> None:
    model._require_fitted()
    torch.save({
        "format_version": CHECKPOINT_VERSION,
        "params": model.get_params(),
        "state_dict": model.net_.state_dict(),
    }, Path(path))


def load_vqvae(path) -> VQVAE:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise FormatError(f"{path}: unreadable checkpoint ({exc})") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version "
                          f"{payload.get('format_version')}")
    model = VQVAE(**payload["params"])
    model.build()
    model.net_.load_state_dict(payload["state_dict"])
    return model
