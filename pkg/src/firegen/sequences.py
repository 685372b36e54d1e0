"""Burned-area sequences and their on-disk formats.

A sequence is a stack of per-snapshot burned-area frames in [0, 1]
(CA output is binary; generated output is continuous until thresholded).
Single sequences live in FSEQ binary files; a dataset is a directory of
FSEQ members plus a JSON manifest with per-file sha256 checksums.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, MissingInputError

FSEQ_MAGIC = b"FSEQ"
FSEQ_VERSION = 1
_DTYPE_F32 = 0
_HEADER = struct.Struct("<4sIIIIBfIIQ")


@dataclass(frozen=True)
class BurnedSequence:
    """Frames of burned-area fraction per cell at successive snapshots.

    ``frames`` is (T, H, W) float32 in [0, 1]; frame i is the state
    ``i * snapshot_interval_hours`` hours after ignition, so frame 0 holds
    just the ignition cell. ``seed`` records the RNG stream the sequence
    was produced from (0 for sequences with no single seed, e.g. decoded
    reconstructions).
    """

    frames: np.ndarray
    snapshot_interval_hours: float
    ignition: tuple[int, int]
    seed: int = 0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 3 or frames.shape[0] < 1:
            raise ValueError(f"frames must be (T, H, W) with T >= 1, "
                             f"got shape {frames.shape}")
        if not np.isfinite(frames).all():
            raise ValueError("frames contain non-finite values")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise ValueError("frames must lie in [0, 1]")
        if self.snapshot_interval_hours <= 0:
            raise ValueError("snapshot_interval_hours must be positive")
        row, col = self.ignition
        t, h, w = frames.shape
        if not (0 <= row < h and 0 <= col < w):
            raise ValueError(f"ignition {self.ignition} outside {h}x{w} grid")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "ignition", (int(row), int(col)))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.frames.shape

    @property
    def n_snapshots(self) -> int:
        return self.frames.shape[0]

    def times_hours(self) -> np.ndarray:
        return np.arange(self.n_snapshots) * self.snapshot_interval_hours

    def frame_at_hours(self, hours: float) -> np.ndarray:
        """Frame whose snapshot time is nearest to ``hours``."""
        idx = int(round(hours / self.snapshot_interval_hours))
        idx = min(max(idx, 0), self.n_snapshots - 1)
        return self.frames[idx]


def save_sequence(seq: BurnedSequence, path) -> None:
    t, h, w = seq.shape
    header = _HEADER.pack(FSEQ_MAGIC, FSEQ_VERSION, t, h, w, _DTYPE_F32,
                          seq.snapshot_interval_hours,
                          seq.ignition[0], seq.ignition[1], seq.seed)
    payload = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_sequence(path) -> BurnedSequence:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated FSEQ header")
    (magic, version, t, h, w, dtype_code, interval,
     ign_row, ign_col, seed) = _HEADER.unpack_from(raw)
    if magic != FSEQ_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FSEQ_VERSION:
        raise FormatError(f"{path}: unsupported FSEQ version {version}")
    if dtype_code != _DTYPE_F32:
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    expected = _HEADER.size + 4 * t * h * w
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    frames = np.frombuffer(raw[_HEADER.size:], dtype="<f4").reshape(t, h, w)
    return BurnedSequence(frames, float(interval), (ign_row, ign_col), seed)


# ---------------------------------------------------------------------------
# Dataset directories
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_dataset(sequences, directory, params: dict | None = None,
                 master_seed: int | None = None, generated: bool = False) -> dict:
    """Write sequences as ``seq_#####.fseq`` members plus ``dataset.json``.

    The manifest records per-member checksums so two runs can be compared
    for byte identity without diffing payloads.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    members = []
    for i, seq in enumerate(sequences):
        fname = f"seq_{i:05d}.fseq"
        save_sequence(seq, directory / fname)
        members.append({
            "file": fname,
            "seed": seq.seed,
            "ignition": list(seq.ignition),
            "sha256": _sha256(directory / fname),
        })
    manifest = {
        "n_sequences": len(members),
        "generated": bool(generated),
        "master_seed": master_seed,
        "params": params or {},
        "members": members,
    }
    (directory / "dataset.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def load_manifest(directory) -> dict:
    path = Path(directory) / "dataset.json"
    if not path.exists():
        raise MissingInputError(f"{directory}: no dataset.json manifest")
    return json.loads(path.read_text())


def load_dataset(directory, verify_checksums: bool = False) -> list[BurnedSequence]:
    directory = Path(directory)
    manifest = load_manifest(directory)
    sequences = []
    for member in manifest["members"]:
        path = directory / member["file"]
        if not path.exists():
            raise MissingInputError(f"{path}: listed in manifest but missing")
        if verify_checksums and _sha256(path) != member["sha256"]:
            raise FormatError(f"{path}: checksum mismatch against manifest")
        sequences.append(load_sequence(path))
    return sequences


def stack_frames(sequences) -> np.ndarray:
    """(N, T, H, W) float32 stack; all members must share a shape."""
    shapes = {seq.shape for seq in sequences}
    if len(shapes) != 1:
        raise ValueError(f"sequences have mixed shapes: {sorted(shapes)}")
    return np.stack([seq.frames for seq in sequences]).astype(np.float32)
