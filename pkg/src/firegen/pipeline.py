"""Experiment orchestration: simulate, train, generate, evaluate, ablate, bench.

Every command reads and writes a fixed layout under the configured output
directory and updates a run manifest (config snapshot, per-file checksums,
derived child seeds, wall-clock timings), so a finished run is auditable
and byte-reproducible from its master seed alone:

    ecoregion/              synthetic covariate fields
    data/{train,val,test}/  simulated burned-area datasets
    data/generated/         autoencoder-generated dataset
    models/                 vqvae.pt, surrogate_{baseline,proposed}.pt
    reports/                CSV/JSON tables and figures
    manifest.json           run manifest
"""
from __future__ import annotations

import csv
import dataclasses
import json
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import plots
from .ca import CAParams, sample_ignition, simulate
from .errors import FormatError, MissingInputError
from .geofields import Ecoregion, load_ecoregion, save_ecoregion
from .metrics import (DEFAULT_TAU, monotonicity_violation_rate,
                      relative_mismatch, ssim, threshold_burned)
from .pod import PODBasis, flatten_sequences
from .seeding import child_seed
from .sequences import _sha256, load_dataset, save_dataset, stack_frames
from .surrogate import (LSTMSurrogate, load_checkpoint, predict_burned,
                        save_checkpoint)
from .vqvae import VQVAE, generate_dataset, load_vqvae, save_vqvae

_CA_KEYS = frozenset(f.name for f in dataclasses.fields(CAParams))
_ECO_KEYS = frozenset(("vegetation_corr", "canopy_corr", "elevation_corr",
                       "relief_m", "wind_speed", "wind_direction"))
_VQVAE_KEYS = frozenset(VQVAE().get_params())
_SURROGATE_KEYS = frozenset(LSTMSurrogate().get_params())
_SPLITS = ("train", "val", "test")
_MODES = ("baseline", "proposed")
_ABLATE_PARAMS = ("alpha", "beta", "generated_count")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _check_section(name: str, given: dict, allowed: frozenset) -> dict:
    if not isinstance(given, dict):
        raise ValueError(f"config section '{name}' must be a mapping")
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ValueError(f"unknown keys in config section '{name}': {unknown}")
    if "random_state" in given:
        raise ValueError(f"'{name}.random_state' is derived from master_seed "
                         "and cannot be set directly")
    if name == "ca" and "snapshot_interval_hours" in given:
        raise ValueError("set snapshot_interval_hours at the top level, "
                         "not inside 'ca'")
    # YAML hands lists where the estimators document tuples
    return {k: tuple(v) if isinstance(v, list) else v for k, v in given.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, resolvable from a YAML file.

    The ca / vqvae / surrogate sections hold keyword overrides for CAParams,
    VQVAE and LSTMSurrogate respectively; omitted keys keep the module
    defaults. Seeds for each stage derive from master_seed.
    """

    master_seed: int = 0
    grid_size: int = 128
    cell_size_m: float = 30.0
    n_train_sims: int = 40
    n_val_sims: int = 8
    n_test_sims: int = 8
    n_generated: int = 500
    n_snapshots: int = 16
    snapshot_interval_hours: float = 6.0
    alpha: float = 0.6
    pod_modes: int = 64
    ecoregion: dict = field(default_factory=dict)
    ca: dict = field(default_factory=dict)
    vqvae: dict = field(default_factory=dict)
    surrogate: dict = field(default_factory=dict)
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError(f"grid_size must be >= 8, got {self.grid_size}")
        if self.cell_size_m <= 0:
            raise ValueError("cell_size_m must be positive")
        for name in ("n_train_sims", "n_val_sims", "n_test_sims",
                     "n_generated", "pod_modes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_snapshots < 2:
            raise ValueError("n_snapshots must be >= 2")
        if self.snapshot_interval_hours <= 0:
            raise ValueError("snapshot_interval_hours must be positive")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        object.__setattr__(self, "ecoregion",
                           _check_section("ecoregion", self.ecoregion,
                                          _ECO_KEYS))
        object.__setattr__(self, "ca", _check_section("ca", self.ca, _CA_KEYS))
        object.__setattr__(self, "vqvae",
                           _check_section("vqvae", self.vqvae, _VQVAE_KEYS))
        object.__setattr__(self, "surrogate",
                           _check_section("surrogate", self.surrogate,
                                          _SURROGATE_KEYS))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValueError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for section in ("ecoregion", "ca", "vqvae", "surrogate"):
            out[section] = {k: list(v) if isinstance(v, tuple) else v
                            for k, v in out[section].items()}
        return out

    def ca_params(self) -> CAParams:
        return CAParams(snapshot_interval_hours=self.snapshot_interval_hours,
                        **self.ca)

    def make_ecoregion(self, seed: int) -> Ecoregion:
        return Ecoregion.synthesize(seed, self.grid_size, self.grid_size,
                                    cell_size_m=self.cell_size_m,
                                    **self.ecoregion)

    def vqvae_model(self, random_state: int) -> VQVAE:
        return VQVAE(**self.vqvae, random_state=random_state)

    def surrogate_model(self, random_state: int) -> LSTMSurrogate:
        return LSTMSurrogate(**self.surrogate, random_state=random_state)

    def surrogate_window(self) -> tuple[int, int]:
        """(m_in, m_out) after config overrides."""
        merged = dict(LSTMSurrogate().get_params())
        merged.update(self.surrogate)
        return int(merged["m_in"]), int(merged["m_out"])


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text())
    if data is None:
        data = {}
    return ExperimentConfig.from_dict(data)


class _Layout:
    """Canonical file layout under an experiment's output directory."""

    def __init__(self, config: ExperimentConfig):
        self.root = Path(config.output_dir)
        self.ecoregion = self.root / "ecoregion"
        self.data = self.root / "data"
        self.generated = self.data / "generated"
        self.models = self.root / "models"
        self.reports = self.root / "reports"
        self.vqvae_ckpt = self.models / "vqvae.pt"

    def split(self, name: str) -> Path:
        return self.data / name

    def surrogate_ckpt(self, mode: str) -> Path:
        return self.models / f"surrogate_{mode}.pt"


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

def _manifest_path(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / "manifest.json"

def _load_or_new_manifest(config: ExperimentConfig) -> dict:
    path = _manifest_path(config)
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: corrupt manifest ({exc})") from exc
    else:
        data = {"artifacts": {}, "seeds": {}, "timings": {}}
    data["config"] = config.to_dict()
    return data


def _record_paths(manifest: dict, root: Path, paths) -> None:
    """(Re)checksum every file under the given paths, dropping stale entries."""
    for p in paths:
        p = Path(p)
        prefix = p.relative_to(root).as_posix()
        for key in list(manifest["artifacts"]):
            if key == prefix or key.startswith(prefix + "/"):
                del manifest["artifacts"][key]
        files = [p] if p.is_file() else sorted(q for q in p.rglob("*")
                                               if q.is_file())
        for f in files:
            rel = f.relative_to(root).as_posix()
            manifest["artifacts"][rel] = {"sha256": _sha256(f),
                                          "bytes": f.stat().st_size}


def _finish_command(config: ExperimentConfig, command: str, t0: float,
                    produced, seeds: dict | None = None) -> None:
    manifest = _load_or_new_manifest(config)
    _record_paths(manifest, Path(config.output_dir), produced)
    manifest["seeds"].update(seeds or {})
    manifest["timings"][command] = round(time.perf_counter() - t0, 6)
    _manifest_path(config).write_text(
        json.dumps(manifest, indent=2, sort_keys=True))


def verify_manifest(output_dir) -> int:
    """Re-hash every artifact the manifest lists; returns the file count."""
    root = Path(output_dir)
    path = root / "manifest.json"
    if not path.exists():
        raise MissingInputError(f"{path}: no run manifest")
    data = json.loads(path.read_text())
    for rel, info in data["artifacts"].items():
        f = root / rel
        if not f.is_file():
            raise FormatError(f"manifest lists missing file: {rel}")
        if _sha256(f) != info["sha256"]:
            raise FormatError(f"checksum mismatch: {rel}")
    return len(data["artifacts"])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(config: ExperimentConfig) -> dict:
    """Synthesize the ecoregion and simulate the train/val/test datasets."""
    t0 = time.perf_counter()
    lay = _Layout(config)
    params = config.ca_params()
    eco_seed = child_seed(config.master_seed, "ecoregion")
    eco = config.make_ecoregion(eco_seed)
    save_ecoregion(eco, lay.ecoregion, master_seed=eco_seed)
    counts = {"train": config.n_train_sims, "val": config.n_val_sims,
              "test": config.n_test_sims}
    out = {}
    produced = [lay.ecoregion]
    for split in _SPLITS:
        sequences = []
        for i in range(counts[split]):
            ign_rng = np.random.default_rng(
                child_seed(config.master_seed, "ignite", split, i))
            ignition = sample_ignition(ign_rng, *eco.shape,
                                       eco.unburnable_mask)
            sequences.append(simulate(
                eco, params, ignition, config.n_snapshots,
                seed=child_seed(config.master_seed, "simulate", split, i)))
        target = lay.split(split)
        if target.exists():
            shutil.rmtree(target)
        save_dataset(sequences, target,
                     params={"split": split,
                             "ca": dataclasses.asdict(params),
                             "grid_size": config.grid_size},
                     master_seed=config.master_seed)
        produced.append(target)
        out[split] = target
    _finish_command(config, "simulate", t0, produced,
                    seeds={"ecoregion": eco_seed})
    return out


def _load_split(lay: _Layout, split: str):
    return load_dataset(lay.split(split))


def _require_vqvae(lay: _Layout) -> VQVAE:
    if not lay.vqvae_ckpt.exists():
        raise MissingInputError(f"{lay.vqvae_ckpt}: train the video "
                                "autoencoder first (firegen train-vqvae)")
    return load_vqvae(lay.vqvae_ckpt)


def _write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def cmd_train_vqvae(config: ExperimentConfig) -> Path:
    """Fit the video autoencoder on the simulated training clips."""
    t0 = time.perf_counter()
    lay = _Layout(config)
    clips = stack_frames(_load_split(lay, "train"))
    seed = child_seed(config.master_seed, "vqvae")
    model = config.vqvae_model(seed)
    model.fit(clips)
    lay.models.mkdir(parents=True, exist_ok=True)
    save_vqvae(model, lay.vqvae_ckpt)
    hist = model.loss_history_
    loss_rows = [{"epoch": i + 1,
                  "recon": hist["recon"][i], "codebook": hist["codebook"][i],
                  "commit": hist["commit"][i], "total": hist["total"][i]}
                 for i in range(len(hist["total"]))]
    csv_path = lay.reports / "vqvae_loss.csv"
    _write_csv(csv_path, loss_rows)
    fig_path = plots.save_loss_curves(hist, lay.reports / "vqvae_loss.png",
                                      title="video autoencoder training")
    _finish_command(config, "train-vqvae", t0,
                    [lay.vqvae_ckpt, csv_path, fig_path],
                    seeds={"vqvae": seed})
    return lay.vqvae_ckpt


def cmd_generate(config: ExperimentConfig, count: int | None = None,
                 alpha: float | None = None) -> Path:
    """Sample new burned-area sequences from the trained autoencoder."""
    t0 = time.perf_counter()
    lay = _Layout(config)
    count = config.n_generated if count is None else int(count)
    alpha = config.alpha if alpha is None else float(alpha)
    model = _require_vqvae(lay)
    clips = stack_frames(_load_split(lay, "train"))
    if lay.generated.exists():
        shutil.rmtree(lay.generated)
    generate_dataset(model, clips, count, alpha=alpha,
                     master_seed=config.master_seed, directory=lay.generated,
                     snapshot_interval_hours=config.snapshot_interval_hours)
    _finish_command(config, "generate", t0, [lay.generated],
                    seeds={"generate": config.master_seed})
    return lay.generated


def _encode_sequences(basis: PODBasis, sequences) -> list[np.ndarray]:
    return [basis.encode(seq.frames.reshape(seq.n_snapshots, -1)
                         .astype(np.float64))
            for seq in sequences]


def cmd_train_surrogate(config: ExperimentConfig,
                        mode: str = "baseline") -> Path:
    """Fit the reduced basis and latent forecaster on the mode's pool.

    baseline trains on the simulated sequences alone; proposed pools the
    generated dataset with them (uniformly, no reweighting).
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    t0 = time.perf_counter()
    lay = _Layout(config)
    train = _load_split(lay, "train")
    val = _load_split(lay, "val")
    pool = list(train)
    if mode == "proposed":
        if not (lay.generated / "dataset.json").exists():
            raise MissingInputError(f"{lay.generated}: proposed mode needs "
                                    "generated data (firegen generate)")
        pool += load_dataset(lay.generated)
    basis = PODBasis(n_modes=config.pod_modes).fit(flatten_sequences(pool))
    seed = child_seed(config.master_seed, "surrogate", mode)
    model = config.surrogate_model(seed)
    model.fit(_encode_sequences(basis, pool), _encode_sequences(basis, val))
    lay.models.mkdir(parents=True, exist_ok=True)
    ckpt = lay.surrogate_ckpt(mode)
    save_checkpoint(model, basis, ckpt)

    hist = model.loss_history_
    best_val = np.minimum.accumulate(hist["val"]).tolist()
    loss_rows = [{"epoch": i + 1, "train": hist["train"][i],
                  "val": hist["val"][i], "best_val": best_val[i]}
                 for i in range(len(hist["train"]))]
    csv_path = lay.reports / f"surrogate_{mode}_loss.csv"
    _write_csv(csv_path, loss_rows)
    fig_path = plots.save_loss_curves(
        {"train": hist["train"], "val": hist["val"]},
        lay.reports / f"surrogate_{mode}_loss.png",
        title=f"latent forecaster ({mode})")
    gamma, rho = basis.compression_stats()
    json_path = lay.reports / f"surrogate_{mode}.json"
    _write_json(json_path, {
        "mode": mode,
        "pool_sequences": len(pool),
        "reduced_basis": {"n_modes": config.pod_modes,
                          "gamma": gamma, "rho": rho},
        "epochs_ran": len(hist["train"]),
        "best_val": best_val[-1] if best_val else None,
    })
    _finish_command(config, f"train-surrogate/{mode}", t0,
                    [ckpt, csv_path, fig_path, json_path],
                    seeds={f"surrogate/{mode}": seed})
    return ckpt


# -- evaluation -------------------------------------------------------------

def surrogate_predictor(model: LSTMSurrogate, basis: PODBasis,
                        snapshot_interval_hours: float,
                        horizon: int, tau: float = DEFAULT_TAU):
    """Bind a trained forecaster into the evaluate_sequences interface."""
    def predict(seq):
        observed = seq.frames[1:1 + model.m_in].astype(np.float64)
        _, binary = predict_burned(model, basis, observed, horizon,
                                   snapshot_interval_hours, seq.ignition, tau)
        return binary
    return predict


def evaluate_sequences(predict, sequences, m_in: int, horizon: int,
                       tau: float = DEFAULT_TAU):
    """Score a predictor against held-out fires.

    For each sequence, frames 1..m_in (the first post-ignition snapshots)
    are the observation window and the next `horizon` frames the target.
    `predict(seq)` must return the binary predicted stack (horizon, H, W).
    Returns (rows, per_fire, summary, predictions); rows carry one entry
    per fire per predicted frame.
    """
    sequences = list(sequences)
    if not sequences:
        raise ValueError("no sequences to evaluate")
    need = 1 + m_in + horizon
    rows, per_fire, predictions = [], [], []
    for i, seq in enumerate(sequences):
        if seq.n_snapshots < need:
            raise ValueError(
                f"sequence {i} has {seq.n_snapshots} snapshots; evaluation "
                f"needs {need} (ignition + {m_in} in + {horizon} out)")
        pred = np.asarray(predict(seq))
        if pred.shape != (horizon,) + seq.shape[1:]:
            raise ValueError(f"predictor returned shape {pred.shape}, "
                             f"expected {(horizon,) + seq.shape[1:]}")
        lo = 1 + m_in
        truth = np.stack([threshold_burned(f, tau)
                          for f in seq.frames[lo:lo + horizon]])
        hours = seq.times_hours()[lo:lo + horizon]
        mism = [relative_mismatch(pred[j], truth[j]) for j in range(horizon)]
        sims = [ssim(pred[j].astype(np.float64), truth[j].astype(np.float64))
                for j in range(horizon)]
        for j in range(horizon):
            rows.append({"fire": i, "frame": lo + j,
                         "hours": float(hours[j]),
                         "relative_mismatch": mism[j], "ssim": sims[j]})
        per_fire.append({"fire": i,
                         "mean_relative_mismatch": float(np.mean(mism)),
                         "mean_ssim": float(np.mean(sims))})
        predictions.append(pred)
    mism_means = [f["mean_relative_mismatch"] for f in per_fire]
    ssim_means = [f["mean_ssim"] for f in per_fire]
    summary = {
        "n_fires": len(per_fire), "m_in": m_in, "horizon": horizon,
        "tau": tau,
        "mean_relative_mismatch": float(np.mean(mism_means)),
        "std_relative_mismatch": float(np.std(mism_means)),
        "mean_ssim": float(np.mean(ssim_means)),
        "std_ssim": float(np.std(ssim_means)),
    }
    return rows, per_fire, summary, predictions


def _eval_figures(lay: _Layout, label: str, sequences, predictions,
                  m_in: int, horizon: int, tau: float) -> list[Path]:
    produced = []
    lo = 1 + m_in
    for i in range(min(2, len(sequences))):
        seq = sequences[i]
        truth = np.stack([threshold_burned(f, tau)
                          for f in seq.frames[lo:lo + horizon]])
        hours = seq.times_hours()[lo:lo + horizon]
        produced.append(plots.save_mismatch_maps(
            truth, predictions[i], hours,
            lay.reports / f"eval_{label}_fire{i}_maps.png",
            title=f"{label}: test fire {i}"))
    curves = []
    for i in range(min(4, len(sequences))):
        seq = sequences[i]
        times = seq.times_hours()
        truth_counts = [int(threshold_burned(f, tau).sum())
                        for f in seq.frames]
        pred_counts = [int(p.sum()) for p in predictions[i]]
        curves.append((times, truth_counts, f"fire {i} truth", "-"))
        curves.append((times[lo:lo + horizon], pred_counts,
                       f"fire {i} predicted", "--"))
    produced.append(plots.save_burned_area_plot(
        curves, lay.reports / f"eval_{label}_area.png",
        title=f"burned-area curves ({label})"))
    return produced


def cmd_evaluate(config: ExperimentConfig, mode: str | None = None,
                 predict_fn=None, label: str = "oracle",
                 tau: float = DEFAULT_TAU) -> dict:
    """Score trained forecasters (or an injected predictor) on the test set.

    With no mode given, every available surrogate checkpoint is evaluated
    and a paired comparison table is emitted when more than one exists.
    predict_fn bypasses checkpoints entirely (used for harness sanity
    checks); it receives each test sequence and must return the binary
    predicted stack.
    """
    t0 = time.perf_counter()
    lay = _Layout(config)
    test = _load_split(lay, "test")
    m_in, horizon = config.surrogate_window()
    runs = {}
    if predict_fn is not None:
        runs[label] = (predict_fn, m_in, horizon)
    else:
        if mode is not None and mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        modes = [mode] if mode else [m for m in _MODES
                                     if lay.surrogate_ckpt(m).exists()]
        if not modes:
            raise MissingInputError(
                f"{lay.models}: no trained forecaster checkpoints "
                "(firegen train-surrogate)")
        for m in modes:
            ckpt = lay.surrogate_ckpt(m)
            if not ckpt.exists():
                raise MissingInputError(f"{ckpt}: checkpoint not found "
                                        f"(firegen train-surrogate --mode {m})")
            model, basis = load_checkpoint(ckpt)
            runs[m] = (surrogate_predictor(model, basis,
                                           config.snapshot_interval_hours,
                                           model.m_out, tau),
                       model.m_in, model.m_out)

    produced = []
    summaries = {}
    for name, (predict, mi, hz) in runs.items():
        rows, per_fire, summary, predictions = evaluate_sequences(
            predict, test, mi, hz, tau)
        csv_path = lay.reports / f"evaluation_{name}.csv"
        _write_csv(csv_path, rows)
        produced.append(csv_path)
        produced += _eval_figures(lay, name, test, predictions, mi, hz, tau)
        summaries[name] = dict(summary, per_fire=per_fire)

    result = {"tau": tau, "modes": summaries}
    if len(summaries) > 1:
        table = [{"mode": name,
                  "mean_relative_mismatch": s["mean_relative_mismatch"],
                  "mean_ssim": s["mean_ssim"]}
                 for name, s in summaries.items()]
        result["comparison"] = {
            "table": table,
            "best_mismatch": min(table,
                                 key=lambda r: r["mean_relative_mismatch"])["mode"],
            "best_ssim": max(table, key=lambda r: r["mean_ssim"])["mode"],
        }
    json_path = lay.reports / "evaluation.json"
    _write_json(json_path, result)
    produced.append(json_path)
    _finish_command(config, "evaluate", t0, produced)
    return result


# -- ablations ----------------------------------------------------------------

def _tv_noise(frames: np.ndarray) -> float:
    """Mean absolute spatial increment per cell pair; speckle scores high."""
    frames = np.asarray(frames, dtype=np.float64)
    return float(np.abs(np.diff(frames, axis=1)).mean()
                 + np.abs(np.diff(frames, axis=2)).mean())


def cmd_ablate(config: ExperimentConfig, parameter: str, values) -> list[dict]:
    """Sweep one knob and emit a metric-vs-value table, JSON and plot.

    alpha: regenerate at each mixing weight, score sample quality.
    beta: retrain the autoencoder at each commitment weight.
    generated_count: retrain the proposed surrogate per dataset size and
    score it on the test fires (generated prefixes are seed-stable, so a
    sweep shares its smaller datasets with the bigger ones).
    """
    if parameter not in _ABLATE_PARAMS:
        raise ValueError(f"parameter must be one of {_ABLATE_PARAMS}, "
                         f"got {parameter!r}")
    values = list(values)
    if not values:
        raise ValueError("empty value list")
    t0 = time.perf_counter()
    lay = _Layout(config)
    seeds = {}
    rows = []

    if parameter == "alpha":
        model = _require_vqvae(lay)
        clips = stack_frames(_load_split(lay, "train"))
        for v in values:
            v = float(v)
            seed = child_seed(config.master_seed, "ablate", "alpha", v)
            seeds[f"ablate/alpha/{v}"] = seed
            seqs = generate_dataset(
                model, clips, config.n_generated, alpha=v, master_seed=seed,
                snapshot_interval_hours=config.snapshot_interval_hours)
            rows.append({
                "alpha": v,
                "median_monotonicity_violation": float(np.median(
                    [monotonicity_violation_rate(s) for s in seqs])),
                "tv_noise": float(np.mean([_tv_noise(s.frames)
                                           for s in seqs])),
            })
    elif parameter == "beta":
        clips = stack_frames(_load_split(lay, "train"))
        for v in values:
            v = float(v)
            seed = child_seed(config.master_seed, "ablate", "beta", v)
            seeds[f"ablate/beta/{v}"] = seed
            model = config.vqvae_model(seed)
            model.set_params(beta=v)
            model.fit(clips)
            hist = model.loss_history_
            rows.append({"beta": v,
                         "final_recon": hist["recon"][-1],
                         "final_codebook": hist["codebook"][-1],
                         "final_commit": hist["commit"][-1],
                         "final_total": hist["total"][-1]})
    else:  # generated_count
        model = _require_vqvae(lay)
        train = _load_split(lay, "train")
        val = _load_split(lay, "val")
        test = _load_split(lay, "test")
        clips = stack_frames(train)
        m_in, horizon = config.surrogate_window()
        for v in values:
            v = int(v)
            if v < 1:
                raise ValueError(f"generated_count values must be >= 1, "
                                 f"got {v}")
            # master_seed (not a per-value child) keeps prefixes shared
            gen = generate_dataset(
                model, clips, v, alpha=config.alpha,
                master_seed=config.master_seed,
                snapshot_interval_hours=config.snapshot_interval_hours)
            pool = list(train) + gen
            basis = PODBasis(n_modes=config.pod_modes).fit(
                flatten_sequences(pool))
            seed = child_seed(config.master_seed, "ablate",
                              "generated_count", v)
            seeds[f"ablate/generated_count/{v}"] = seed
            surrogate = config.surrogate_model(seed)
            surrogate.fit(_encode_sequences(basis, pool),
                          _encode_sequences(basis, val))
            predict = surrogate_predictor(surrogate, basis,
                                          config.snapshot_interval_hours,
                                          horizon)
            _, _, summary, _ = evaluate_sequences(predict, test, m_in,
                                                  horizon)
            rows.append({"generated_count": v,
                         "mean_relative_mismatch":
                             summary["mean_relative_mismatch"],
                         "mean_ssim": summary["mean_ssim"]})

    csv_path = lay.reports / f"ablate_{parameter}.csv"
    _write_csv(csv_path, rows)
    json_path = lay.reports / f"ablate_{parameter}.json"
    _write_json(json_path, {"parameter": parameter, "rows": rows})
    keys = list(rows[0].keys())
    fig_path = plots.save_sweep_plot(
        [r[keys[0]] for r in rows], [r[keys[1]] for r in rows],
        keys[0], keys[1], lay.reports / f"ablate_{parameter}.png",
        title=f"{parameter} sweep")
    _finish_command(config, f"ablate/{parameter}", t0,
                    [csv_path, json_path, fig_path], seeds=seeds)
    return rows


# -- benchmark ----------------------------------------------------------------

def cmd_bench(config: ExperimentConfig, runs: int = 10) -> dict:
    """Wall-clock one simulated fire against one generated fire, many times.

    Both sides produce a sequence of the configured length at the
    configured grid size; the ratio is the headline speed-up.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    t0 = time.perf_counter()
    lay = _Layout(config)
    model = _require_vqvae(lay)
    params = config.ca_params()
    if (lay.ecoregion / "ecoregion.json").exists():
        eco = load_ecoregion(lay.ecoregion)
    else:
        eco = config.make_ecoregion(child_seed(config.master_seed,
                                               "ecoregion"))
    if (lay.split("train") / "dataset.json").exists():
        source = load_dataset(lay.split("train"))[0].frames
    else:
        rng = np.random.default_rng(child_seed(config.master_seed,
                                               "bench", "source"))
        ignition = sample_ignition(rng, *eco.shape, eco.unburnable_mask)
        source = simulate(eco, params, ignition, config.n_snapshots,
                          seed=child_seed(config.master_seed, "bench",
                                          "source")).frames

    ca_times, gen_times = [], []
    for i in range(runs):
        rng = np.random.default_rng(child_seed(config.master_seed,
                                               "bench", "ignite", i))
        ignition = sample_ignition(rng, *eco.shape, eco.unburnable_mask)
        start = time.perf_counter()
        simulate(eco, params, ignition, config.n_snapshots,
                 seed=child_seed(config.master_seed, "bench", "ca", i))
        ca_times.append(time.perf_counter() - start)
    for i in range(runs):
        rng = np.random.default_rng(child_seed(config.master_seed,
                                               "bench", "gen", i))
        start = time.perf_counter()
        model.generate(source, alpha=config.alpha, rng=rng)
        gen_times.append(time.perf_counter() - start)

    ddof = 1 if runs > 1 else 0
    report = {
        "grid_size": config.grid_size,
        "n_snapshots": config.n_snapshots,
        "runs": runs,
        "ca_mean_s": float(np.mean(ca_times)),
        "ca_std_s": float(np.std(ca_times, ddof=ddof)),
        "generate_mean_s": float(np.mean(gen_times)),
        "generate_std_s": float(np.std(gen_times, ddof=ddof)),
    }
    report["speedup_ratio"] = report["ca_mean_s"] / report["generate_mean_s"]
    json_path = lay.reports / "bench.json"
    _write_json(json_path, report)
    _finish_command(config, "bench", t0, [json_path])
    return report
