"""Evaluation metrics for burned-area frames and sequences.

Thresholding at tau (strict >), relative mismatch (XOR count over the true
burned count), SSIM with the standard 11x11 Gaussian window, burned-area
growth curves, barycentre-based ignition localization, covariate averages
around the ignition, and monotonicity diagnostics.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import correlate2d

from .errors import NumericalError
from .geofields import Ecoregion, slope_magnitude
from .sequences import BurnedSequence

DEFAULT_TAU = 0.4

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def threshold_burned(frame: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Binary burned map: 1.0 strictly above tau, else 0.0."""
    frame = np.asarray(frame)
    if not np.isfinite(frame).all():
        raise ValueError("frame contains non-finite values")
    return (frame > tau).astype(np.float32)


def _check_binary(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary (0/1); threshold it first")
    return arr.astype(bool)


def relative_mismatch(pred_binary, truth_binary) -> float:
    """Disagreeing-cell count over the truth burned count.

    Accepts single frames (2-D) or frame stacks (3-D, averaged over frames).
    Asymmetric in its arguments: the denominator is always the truth side.
    """
    pred = _check_binary(pred_binary, "pred_binary")
    truth = _check_binary(truth_binary, "truth_binary")
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.ndim == 2:
        pred, truth = pred[None], truth[None]
    elif pred.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D arrays, got {pred.ndim}-D")
    per_frame = []
    for t in range(truth.shape[0]):
        denom = int(truth[t].sum())
        if denom == 0:
            raise NumericalError(f"truth frame {t} has no burned cells; "
                                 "relative mismatch is undefined")
        per_frame.append(int(np.logical_xor(pred[t], truth[t]).sum()) / denom)
    return float(np.mean(per_frame))


def frobenius_mismatch(pred, truth) -> float:
    """Reference variant: ||pred - truth||_F / ||truth||_F on raw values."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise NumericalError("truth is identically zero; relative Frobenius "
                             "mismatch is undefined")
    return float(np.linalg.norm(pred - truth) / denom)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA):
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over all fully-interior windows.

    Dynamic range is taken as 1.0 (frames live in [0, 1]).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"frames must be 2-D with both sides >= {SSIM_WINDOW}, "
                         f"got {a.shape}")
    w = _gaussian_window()
    mu_a = correlate2d(a, w, mode="valid")
    mu_b = correlate2d(b, w, mode="valid")
    var_a = correlate2d(a * a, w, mode="valid") - mu_a ** 2
    var_b = correlate2d(b * b, w, mode="valid") - mu_b ** 2
    cov = correlate2d(a * b, w, mode="valid") - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def burned_area_curve(seq: BurnedSequence, tau: float = DEFAULT_TAU):
    """(hours, counts): thresholded burned-cell count per snapshot."""
    counts = np.array([int(threshold_burned(f, tau).sum()) for f in seq.frames])
    return seq.times_hours(), counts


def ignition_barycentre(seq: BurnedSequence, at_hours: float = 12.0,
                        tau: float = DEFAULT_TAU) -> tuple[int, int]:
    """Mean coordinate of burned cells at the snapshot nearest at_hours.

    Localizes the (possibly unknown) ignition point early in the fire.
    Rounds half-up so results are deterministic across platforms.
    """
    frame = threshold_burned(seq.frame_at_hours(at_hours), tau)
    burned = np.argwhere(frame > 0)
    if len(burned) == 0:
        raise ValueError(f"no burned cells at {at_hours} h; barycentre undefined")
    mean_r, mean_c = burned.mean(axis=0)
    return (int(math.floor(mean_r + 0.5)), int(math.floor(mean_c + 0.5)))


def _disc_mask(shape, centre, radius: int) -> np.ndarray:
    rows = np.arange(shape[0])[:, None] - centre[0]
    cols = np.arange(shape[1])[None, :] - centre[1]
    return rows ** 2 + cols ** 2 <= radius ** 2


def area_vs_covariates(dataset, eco: Ecoregion, at_hours: float = 72.0,
                       neighbourhood_radius: int = 8,
                       tau: float = DEFAULT_TAU) -> list[dict]:
    """Per fire: burned count at at_hours plus local covariate means.

    Covariates are averaged in a disc around the estimated ignition
    barycentre; slope magnitude is normalized to [0, 1] by the field max
    (flat terrain stays zero), vegetation density is already unit-range.
    """
    slope = slope_magnitude(eco.elevation).values.astype(np.float64)
    peak = slope.max()
    if peak > 0:
        slope = slope / peak
    rows = []
    for seq in dataset:
        if seq.times_hours()[-1] < at_hours:
            raise ValueError(f"sequence ends at {seq.times_hours()[-1]} h, "
                             f"before {at_hours} h")
        final = threshold_burned(seq.frame_at_hours(at_hours), tau)
        centre = ignition_barycentre(seq, tau=tau)
        disc = _disc_mask(eco.shape, centre, neighbourhood_radius)
        rows.append({
            "final_area": int(final.sum()),
            "mean_vegetation": float(eco.vegetation_density.values[disc].mean()),
            "mean_slope": float(slope[disc].mean()),
        })
    return rows


def monotonicity_violation_rate(seq: BurnedSequence,
                                tau: float = DEFAULT_TAU) -> float:
    """Fraction of consecutive snapshot pairs whose burned count shrinks."""
    if seq.n_snapshots < 2:
        raise ValueError("need at least 2 snapshots")
    _, counts = burned_area_curve(seq, tau)
    return float(np.mean(np.diff(counts) < 0))
