"""Static geophysical raster fields that parameterize fire spread.

Fields are synthesized as smooth Gaussian random fields (white noise
filtered in the frequency domain), stored in the FGRD binary format, and
bundled into an :class:`Ecoregion` (vegetation, canopy cover, elevation,
uniform wind, unburnable mask).
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import DegenerateFieldError, FormatError
from .validation import (as_float_field, check_cell, check_min_dims,
                         check_same_shape, check_unit_range)

FGRD_MAGIC = b"FGRD"
FGRD_VERSION = 1

# vegetation below this is treated as bare ground / rock / water
UNBURNABLE_VEGETATION_THRESHOLD = 0.05


@dataclass(frozen=True)
class RasterGrid:
    """A single-band raster on a square mesh.

    Immutable after construction; ``values`` is an HxW float32 array with
    no non-finite entries.
    """

    height: int
    width: int
    cell_size_m: float
    values: np.ndarray
    name: str = "field"

    def __post_init__(self):
        check_min_dims(self.height, self.width)
        if self.cell_size_m <= 0:
            raise ValueError(f"cell_size_m must be positive, got {self.cell_size_m}")
        values = as_float_field(self.values, self.name)
        if values.shape != (self.height, self.width):
            raise ValueError(f"values shape {values.shape} does not match "
                             f"declared {self.height}x{self.width}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, cell_size_m: float = 30.0,
                   name: str = "field") -> "RasterGrid":
        values = np.asarray(values, dtype=np.float32)
        return cls(values.shape[0], values.shape[1], cell_size_m, values, name)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class Ecoregion:
    """The fixed geographic domain a fire spreads in.

    Wind is spatially uniform and constant per simulation; ``wind_direction``
    is the direction the wind blows toward, in radians.
    """

    vegetation_density: RasterGrid
    canopy_cover: RasterGrid
    elevation: RasterGrid
    wind_speed: float
    wind_direction: float
    unburnable_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        grids = (self.vegetation_density, self.canopy_cover, self.elevation)
        check_same_shape(*(g.values for g in grids))
        sizes = {g.cell_size_m for g in grids}
        if len(sizes) != 1:
            raise ValueError(f"cell_size_m mismatch across grids: {sorted(sizes)}")
        check_unit_range(self.vegetation_density.values, "vegetation_density")
        check_unit_range(self.canopy_cover.values, "canopy_cover")
        if self.wind_speed < 0:
            raise ValueError(f"wind_speed must be >= 0, got {self.wind_speed}")
        if not (0.0 <= self.wind_direction < 2.0 * math.pi):
            raise ValueError(f"wind_direction must be in [0, 2*pi), "
                             f"got {self.wind_direction}")
        mask = self.unburnable_mask
        if mask is None:
            mask = default_unburnable_mask(self.vegetation_density.values)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise ValueError(f"unburnable_mask shape {mask.shape} does not "
                             f"match grids {self.shape}")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "unburnable_mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vegetation_density.shape

    @property
    def cell_size_m(self) -> float:
        return self.vegetation_density.cell_size_m

    @classmethod
    def synthesize(cls, seed: int, height: int, width: int,
                   cell_size_m: float = 30.0,
                   vegetation_corr: int = 8, canopy_corr: int = 12,
                   elevation_corr: int = 16, relief_m: float = 250.0,
                   wind_speed: float | None = None,
                   wind_direction: float | None = None) -> "Ecoregion":
        """Build a synthetic ecoregion from Gaussian random fields.

        Wind defaults are drawn deterministically from ``seed`` when not
        given explicitly.
        """
        veg = synth_field(seed * 4 + 0, height, width, vegetation_corr,
                          cell_size_m, name="vegetation_density")
        can = synth_field(seed * 4 + 1, height, width, canopy_corr,
                          cell_size_m, name="canopy_cover")
        elev01 = synth_field(seed * 4 + 2, height, width, elevation_corr,
                             cell_size_m, name="elevation")
        elev = RasterGrid(height, width, cell_size_m,
                          elev01.values * relief_m, name="elevation")
        rng = np.random.default_rng(seed * 4 + 3)
        speed = float(rng.uniform(2.0, 7.0)) if wind_speed is None else float(wind_speed)
        direction = (float(rng.uniform(0.0, 2.0 * math.pi))
                     if wind_direction is None else float(wind_direction))
        return cls(veg, can, elev, speed, direction)


def default_unburnable_mask(vegetation: np.ndarray) -> np.ndarray:
    """Cells too sparse to carry fire; gives natural fire breaks."""
    return np.asarray(vegetation) < UNBURNABLE_VEGETATION_THRESHOLD


def synth_field(seed: int, height: int, width: int, correlation_length: int,
                cell_size_m: float = 30.0, name: str = "field") -> RasterGrid:
    """Smooth random field in [0, 1]: white noise low-passed with a Gaussian
    transfer function of the given correlation length (in cells), then
    min-max normalized. Pure function of its arguments.
    """
    check_min_dims(height, width)
    if correlation_length < 1:
        raise ValueError(f"correlation_length must be >= 1, got {correlation_length}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((height, width))
    ky = 2.0 * np.pi * np.fft.fftfreq(height)[:, None]
    kx = 2.0 * np.pi * np.fft.rfftfreq(width)[None, :]
    transfer = np.exp(-0.5 * float(correlation_length) ** 2 * (kx ** 2 + ky ** 2))
    smooth = np.fft.irfft2(np.fft.rfft2(noise) * transfer, s=(height, width))
    lo, hi = smooth.min(), smooth.max()
    if hi - lo <= 0:
        raise DegenerateFieldError("filtered noise collapsed to a constant field")
    values = ((smooth - lo) / (hi - lo)).astype(np.float32)
    return RasterGrid(height, width, cell_size_m, values, name)


def normalize01(grid: RasterGrid) -> RasterGrid:
    """Affine rescale to [0, 1]; rejects constant grids."""
    lo = float(grid.values.min())
    hi = float(grid.values.max())
    if hi - lo <= 0:
        raise DegenerateFieldError(f"cannot normalize constant grid {grid.name!r}")
    values = (grid.values - lo) / (hi - lo)
    return RasterGrid(grid.height, grid.width, grid.cell_size_m, values, grid.name)


def resize(grid: RasterGrid, new_h: int, new_w: int) -> RasterGrid:
    """Bilinear resample; output values stay within the input range."""
    check_min_dims(new_h, new_w)
    if (new_h, new_w) == grid.shape:
        return grid
    rows = (np.arange(new_h) + 0.5) * (grid.height / new_h) - 0.5
    cols = (np.arange(new_w) + 0.5) * (grid.width / new_w) - 0.5
    coords = np.meshgrid(rows, cols, indexing="ij")
    values = map_coordinates(grid.values.astype(np.float64), coords,
                             order=1, mode="nearest").astype(np.float32)
    return RasterGrid(new_h, new_w, grid.cell_size_m, values, grid.name)


def slope_angle(elevation: RasterGrid, from_cell, to_cell) -> float:
    """Terrain slope along one 8-neighbourhood hop, in radians.

    atan of elevation gain over centre-to-centre distance; positive when
    ``to_cell`` is uphill of ``from_cell``, and antisymmetric under swap.
    """
    fr = check_cell(from_cell, elevation.height, elevation.width, "from_cell")
    to = check_cell(to_cell, elevation.height, elevation.width, "to_cell")
    dr, dc = to[0] - fr[0], to[1] - fr[1]
    if (dr, dc) == (0, 0) or max(abs(dr), abs(dc)) > 1:
        raise ValueError(f"cells {fr} and {to} are not 8-neighbours")
    distance = elevation.cell_size_m * (math.sqrt(2.0) if dr != 0 and dc != 0 else 1.0)
    rise = float(elevation.values[to]) - float(elevation.values[fr])
    return math.atan(rise / distance)


def slope_magnitude(elevation: RasterGrid) -> RasterGrid:
    """Per-cell slope steepness field: atan(|gradient|), radians."""
    gy, gx = np.gradient(elevation.values.astype(np.float64), elevation.cell_size_m)
    values = np.arctan(np.hypot(gx, gy)).astype(np.float32)
    return RasterGrid(elevation.height, elevation.width, elevation.cell_size_m,
                      values, "slope_magnitude")


# ---------------------------------------------------------------------------
# FGRD binary format and ecoregion directories
# ---------------------------------------------------------------------------

def save_grid(grid: RasterGrid, path) -> None:
    header = FGRD_MAGIC + struct.pack("<IIIf", FGRD_VERSION, grid.height,
                                      grid.width, grid.cell_size_m)
    payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_grid(path) -> RasterGrid:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 20:
        raise FormatError(f"{path}: truncated FGRD header")
    if raw[:4] != FGRD_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, height, width, cell_size_m = struct.unpack("<IIIf", raw[4:20])
    if version != FGRD_VERSION:
        raise FormatError(f"{path}: unsupported FGRD version {version}")
    expected = 20 + 4 * height * width
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    values = np.frombuffer(raw[20:], dtype="<f4").reshape(height, width)
    return RasterGrid(height, width, cell_size_m, values, name=path.stem)


def save_ecoregion(eco: Ecoregion, directory, master_seed: int | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fields = {
        "vegetation_density": eco.vegetation_density,
        "canopy_cover": eco.canopy_cover,
        "elevation": eco.elevation,
        "unburnable_mask": RasterGrid(eco.shape[0], eco.shape[1], eco.cell_size_m,
                                      eco.unburnable_mask.astype(np.float32),
                                      "unburnable_mask"),
    }
    filenames = {}
    for key, grid in fields.items():
        filenames[key] = f"{key}.fgrd"
        save_grid(grid, directory / filenames[key])
    manifest = {
        "wind_speed": eco.wind_speed,
        "wind_direction": eco.wind_direction,
        "fields": filenames,
        "master_seed": master_seed,
    }
    (directory / "ecoregion.json").write_text(json.dumps(manifest, indent=2))


def load_ecoregion(directory) -> Ecoregion:
    directory = Path(directory)
    manifest_path = directory / "ecoregion.json"
    if not manifest_path.exists():
        raise FormatError(f"{directory}: no ecoregion.json manifest")
    manifest = json.loads(manifest_path.read_text())
    grids = {key: load_grid(directory / fname)
             for key, fname in manifest["fields"].items()}
    mask = grids.pop("unburnable_mask", None)
    return Ecoregion(
        vegetation_density=grids["vegetation_density"],
        canopy_cover=grids["canopy_cover"],
        elevation=grids["elevation"],
        wind_speed=float(manifest["wind_speed"]),
        wind_direction=float(manifest["wind_direction"]),
        unburnable_mask=None if mask is None else mask.values > 0.5,
    )
