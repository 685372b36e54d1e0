"""Stochastic cellular-automata fire spread on a square mesh.

Each step, fire propagates from every Burning cell toward its 8 neighbours
independently with probability

    p_burn = clamp(p_h * (1 + p_veg) * (1 + p_den) * p_s * p_w, 0, 1)

where p_veg/p_den are affine in the receiving cell's vegetation density and
canopy cover, p_s = exp(slope_coeff * slope_angle) along the donor->receiver
hop, and p_w = exp(c1*V) * exp(V*c2*(cos(theta_w) - 1)) rewards alignment of
spread with the wind vector. A cell ignites if any donor trial succeeds.
Burning cells turn Burned after burning_duration_steps steps; Unburnable and
Burned are absorbing. Cells outside the grid are unburnable (no wraparound).

Grid directions: angle 0 points east (+column), pi/2 north (-row).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geofields import Ecoregion, slope_angle
from .validation import check_cell

UNBURNABLE, UNBURNED, BURNING, BURNED = 0, 1, 2, 3

# fixed scan order for the 8-neighbourhood, row-major around the cell
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                    (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class CAParams:
    """Spread-model constants; defaults follow the classic CA literature."""

    p_h: float = 0.58
    veg_gain: float = 0.8
    den_gain: float = 0.6
    slope_coeff: float = 0.078
    wind_c1: float = 0.045
    wind_c2: float = 0.131
    burning_duration_steps: int = 1
    steps_per_snapshot: int = 10
    snapshot_interval_hours: float = 6.0

    def __post_init__(self):
        if not (0.0 <= self.p_h <= 1.0):
            raise ValueError(f"p_h must be in [0,1], got {self.p_h}")
        # keep 1 + p_veg and 1 + p_den positive for any field value in [0,1]
        if abs(self.veg_gain) >= 2.0 or abs(self.den_gain) >= 2.0:
            raise ValueError("veg_gain and den_gain must have magnitude < 2")
        if self.burning_duration_steps < 1:
            raise ValueError("burning_duration_steps must be >= 1")
        if self.steps_per_snapshot < 1:
            raise ValueError("steps_per_snapshot must be >= 1")
        if self.snapshot_interval_hours <= 0:
            raise ValueError("snapshot_interval_hours must be positive")


@dataclass
class FireState:
    states: np.ndarray
    burn_clock: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int8)
        self.burn_clock = np.asarray(self.burn_clock, dtype=np.int32)
        if self.states.ndim != 2 or self.states.shape != self.burn_clock.shape:
            raise ValueError("states and burn_clock must be matching 2-D arrays")
        if self.states.min() < UNBURNABLE or self.states.max() > BURNED:
            raise ValueError("states contain values outside the cell-state enum")
        if np.any((self.burn_clock > 0) & (self.states != BURNING)):
            raise ValueError("burn_clock positive on a non-Burning cell")

    @property
    def burned_frame(self) -> np.ndarray:
        """Burned-area indicator: Burning and Burned cells both count."""
        return ((self.states == BURNING) | (self.states == BURNED)).astype(np.float32)


def initial_state(eco: Ecoregion, ignition) -> FireState:
    row, col = check_cell(ignition, *eco.shape, "ignition")
    if eco.unburnable_mask[row, col]:
        raise ValueError(f"ignition cell {ignition} is unburnable")
    states = np.where(eco.unburnable_mask, UNBURNABLE, UNBURNED).astype(np.int8)
    states[row, col] = BURNING
    clock = np.zeros(eco.shape, dtype=np.int32)
    clock[row, col] = 1
    return FireState(states, clock, step_index=0)


def _wind_factor(params: CAParams, eco: Ecoregion, d_row: int, d_col: int) -> float:
    # spread direction in (east, north) coordinates; rows grow southward
    px, py = float(d_col), float(-d_row)
    norm = math.hypot(px, py)
    cos_w = (math.cos(eco.wind_direction) * px
             + math.sin(eco.wind_direction) * py) / norm
    v = eco.wind_speed
    return math.exp(params.wind_c1 * v) * math.exp(v * params.wind_c2 * (cos_w - 1.0))


def burn_probability(params: CAParams, eco: Ecoregion, donor, receiver) -> float:
    """Single donor->receiver ignition probability, clamped to [0, 1]."""
    donor = check_cell(donor, *eco.shape, "donor")
    receiver = check_cell(receiver, *eco.shape, "receiver")
    if eco.unburnable_mask[receiver]:
        return 0.0
    theta_s = slope_angle(eco.elevation, donor, receiver)  # rejects non-neighbours
    p_veg = params.veg_gain * (float(eco.vegetation_density.values[receiver]) - 0.5)
    p_den = params.den_gain * (float(eco.canopy_cover.values[receiver]) - 0.5)
    p_s = math.exp(params.slope_coeff * theta_s)
    p_w = _wind_factor(params, eco, receiver[0] - donor[0], receiver[1] - donor[1])
    p = params.p_h * (1.0 + p_veg) * (1.0 + p_den) * p_s * p_w
    return min(max(p, 0.0), 1.0)


class SpreadKernel:
    """Reusable per-simulation precomputation of donor-independent factors.

    recv[r, c] = p_h * (1 + p_veg) * (1 + p_den) at the receiver;
    dirfac[k][r, c] = p_s * p_w for a donor sitting at neighbour offset k
    of receiver (r, c).
    """

    def __init__(self, eco: Ecoregion, params: CAParams):
        self.height, self.width = eco.shape
        veg = eco.vegetation_density.values.astype(np.float64)
        can = eco.canopy_cover.values.astype(np.float64)
        self.recv = (params.p_h * (1.0 + params.veg_gain * (veg - 0.5))
                     * (1.0 + params.den_gain * (can - 0.5)))
        elev = eco.elevation.values.astype(np.float64)
        dirfac = []
        for d_row, d_col in NEIGHBOR_OFFSETS:
            donor_elev = np.full(eco.shape, np.nan)
            src = donor_elev[max(-d_row, 0): self.height - max(d_row, 0),
                             max(-d_col, 0): self.width - max(d_col, 0)]
            src[:] = elev[max(d_row, 0): self.height + min(d_row, 0),
                          max(d_col, 0): self.width + min(d_col, 0)]
            dist = eco.cell_size_m * (math.sqrt(2.0) if d_row and d_col else 1.0)
            with np.errstate(invalid="ignore"):
                slope = np.arctan((elev - donor_elev) / dist)
            factor = np.exp(params.slope_coeff * slope)
            factor *= _wind_factor(params, eco, -d_row, -d_col)
            dirfac.append(np.nan_to_num(factor, nan=0.0))
        self.dirfac = dirfac


def _step_kernel(state: FireState, kernel: SpreadKernel, params: CAParams,
                 rng: np.random.Generator) -> FireState:
    h, w = kernel.height, kernel.width
    if state.states.shape != (h, w):
        raise ValueError(f"state shape {state.states.shape} does not match "
                         f"ecoregion {(h, w)}")
    old = state.states
    new_states = state.states.copy()
    new_clock = state.burn_clock.copy()
    recv, dirfac = kernel.recv, kernel.dirfac
    rand = rng.random
    for r in range(h):
        for c in range(w):
            if old[r, c] != UNBURNED:
                continue
            base = recv[r, c]
            for k in range(8):
                rr = r + NEIGHBOR_OFFSETS[k][0]
                if rr < 0 or rr >= h:
                    continue
                cc = c + NEIGHBOR_OFFSETS[k][1]
                if cc < 0 or cc >= w:
                    continue
                if old[rr, cc] != BURNING:
                    continue
                if rand() < base * dirfac[k][r, c]:
                    new_states[r, c] = BURNING
                    new_clock[r, c] = 1
                    break
    was_burning = state.states == BURNING
    done = was_burning & (state.burn_clock >= params.burning_duration_steps)
    new_states[done] = BURNED
    new_clock[done] = 0
    new_clock[was_burning & ~done] += 1
    return FireState(new_states, new_clock, state.step_index + 1)


def step(state: FireState, eco: Ecoregion, params: CAParams,
         rng: np.random.Generator, kernel: SpreadKernel | None = None) -> FireState:
    """One synchronous CA transition; deterministic given the rng state.

    Pass a prebuilt SpreadKernel when stepping the same ecoregion many
    times; otherwise one is computed on the fly.
    """
    if state.states.shape != eco.shape:
        raise ValueError(f"state shape {state.states.shape} does not match "
                         f"ecoregion {eco.shape}")
    return _step_kernel(state, kernel or SpreadKernel(eco, params), params, rng)


def simulate(eco: Ecoregion, params: CAParams, ignition, n_snapshots: int = 16,
             seed: int = 0):
    """Run a full fire and sample it every steps_per_snapshot steps.

    Frame 0 holds only the ignition cell. The integer seed (rather than a
    Generator) is taken so the returned sequence can carry its provenance.
    """
    from .sequences import BurnedSequence

    if n_snapshots < 2:
        raise ValueError(f"n_snapshots must be >= 2, got {n_snapshots}")
    rng = np.random.default_rng(seed)
    kernel = SpreadKernel(eco, params)
    state = initial_state(eco, ignition)
    frames = [state.burned_frame]
    for _ in range(n_snapshots - 1):
        for _ in range(params.steps_per_snapshot):
            state = _step_kernel(state, kernel, params, rng)
        frames.append(state.burned_frame)
    return BurnedSequence(np.stack(frames), params.snapshot_interval_hours,
                          tuple(ignition), seed)


def sample_ignition(rng: np.random.Generator, height: int, width: int,
                    unburnable_mask: np.ndarray | None = None) -> tuple[int, int]:
    """Uniform cell in the central box [H/4, 3H/4) x [W/4, 3W/4).

    Keeps ignitions away from the boundary; rejects unburnable cells, up to
    1000 retries before declaring the ecoregion degenerate.
    """
    from .errors import DegenerateFieldError
    from .validation import check_min_dims

    check_min_dims(height, width)
    for _ in range(1000):
        row = int(rng.integers(height // 4, 3 * height // 4))
        col = int(rng.integers(width // 4, 3 * width // 4))
        if unburnable_mask is None or not unburnable_mask[row, col]:
            return (row, col)
    raise DegenerateFieldError("central zone has no burnable cells")
