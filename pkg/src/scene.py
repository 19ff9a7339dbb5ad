import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

import config.settings as settings
from src.errors import ConfigError

logger = logging.getLogger(__name__)

Offset = Union[float, Tuple[float, float]]


def freeze_array(values: np.ndarray) -> np.ndarray:
    frozen = np.array(values, copy=True)
    frozen.flags.writeable = False
    return frozen


@dataclass(frozen=True)
class GridGeometry:
    """
    Centred sample lattice shared by every plane of a scenario.

    Sample i of an axis sits at (i - N/2) * spacing. The reflection partner of
    index i is (N - i) mod N, so index 0 (the unpaired DFT sample) is its own
    partner.
    """
    dims: int
    samples: int
    extent: float

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ConfigError(f"grid dims must be 1 or 2, got {self.dims}")
        if self.samples <= 0 or self.samples % 2:
            raise ConfigError(f"grid samples must be a positive even integer, got {self.samples}")
        if not self.extent > 0:
            raise ConfigError(f"grid extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> float:
        return self.extent / self.samples

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.samples,) * self.dims

    @property
    def cell(self) -> float:
        """Quadrature weight of one sample (spacing ** dims)."""
        return self.spacing ** self.dims

    def centred_indices(self) -> np.ndarray:
        return np.arange(self.samples) - self.samples // 2

    def axis(self) -> np.ndarray:
        return self.centred_indices() * self.spacing

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Coordinate arrays of full grid shape, axis 0 = x, axis 1 = y."""
        if self.dims == 1:
            return (self.axis(),)
        return tuple(np.meshgrid(self.axis(), self.axis(), indexing='ij'))

    def radius_squared(self) -> np.ndarray:
        return sum(c * c for c in self.coordinates())

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Index reflection i -> (N - i) mod N along every axis."""
        out = np.asarray(values)
        for axis in range(self.dims):
            out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
        return out

    def paired_mask(self) -> np.ndarray:
        """True where the reflection partner is a genuine mirror point (no index component is 0)."""
        paired = np.ones(self.shape, dtype=bool)
        for axis in range(self.dims):
            index = [slice(None)] * self.dims
            index[axis] = 0
            paired[tuple(index)] = False
        return paired

    def scaled(self, extent: float) -> 'GridGeometry':
        return GridGeometry(self.dims, self.samples, extent)

    def matches(self, other: 'GridGeometry') -> bool:
        return (self.dims == other.dims and self.samples == other.samples
                and math.isclose(self.extent, other.extent, rel_tol=1e-12))

    def index_of(self, coordinate: float) -> int:
        index = int(round(coordinate / self.spacing)) + self.samples // 2
        if not 0 <= index < self.samples:
            raise ConfigError(f"coordinate {coordinate} lies outside the grid extent {self.extent}")
        return index


@dataclass(frozen=True)
class ComplexField:
    grid: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ConfigError(f"field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("field contains non-finite values")
        object.__setattr__(self, 'values', freeze_array(values))

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2


@dataclass(frozen=True)
class OpticalLayout:
    wavelength: float
    z1: float
    z2: float
    focal_length: float

    def __post_init__(self):
        if min(self.wavelength, self.z1, self.z2, self.focal_length) <= 0:
            raise ConfigError("wavelength, z1, z2 and focal length must all be positive")
        lhs = 1.0 / self.z1 + 1.0 / self.z2
        rhs = 1.0 / self.focal_length
        if abs(lhs - rhs) > settings.IMAGING_CONDITION_RTOL * rhs:
            raise ConfigError(
                f"imaging condition 1/z1 + 1/z2 = 1/f violated: 1/{self.z1} + 1/{self.z2} = {lhs!r}, "
                f"1/{self.focal_length} = {rhs!r}"
            )

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def magnification(self) -> float:
        """Single-lens magnification -z2/z1."""
        return -self.z2 / self.z1

    def lens_grid(self, grid: GridGeometry) -> GridGeometry:
        # pitch lambda*z2/(N*dx): detector lags map onto DFT bins of the pupil
        return grid.scaled(self.wavelength * self.z2 / grid.spacing)

    def source_grid(self, grid: GridGeometry) -> GridGeometry:
        return grid.scaled(grid.extent * self.z1 / self.z2)

    def edge_chirp_phase(self, grid: GridGeometry) -> float:
        """Phase k*xi^2/z1 of the source-plane chirp at the source-grid edge."""
        half = self.source_grid(grid).extent / 2.0
        return self.wavenumber * half * half / self.z1


def make_layout(wavelength: float, z1: float, z2: float, focal_length: Optional[float] = None) -> OpticalLayout:
    """
    Builds a layout obeying 1/z1 + 1/z2 = 1/f.
    When `focal_length` is given it is checked against the imaging condition instead of derived.
    """
    if min(wavelength, z1, z2) <= 0:
        raise ConfigError(f"wavelength, z1 and z2 must be positive, got {wavelength}, {z1}, {z2}")
    derived = z1 * z2 / (z1 + z2)
    return OpticalLayout(wavelength, z1, z2, derived if focal_length is None else focal_length)


@dataclass(frozen=True)
class PumpModel:
    kind: str = 'plane'
    width: Optional[float] = None
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.kind not in ('plane', 'gaussian'):
            raise ConfigError(f"pump kind must be 'plane' or 'gaussian', got '{self.kind}'")
        if self.kind == 'gaussian' and not (self.width is not None and self.width > 0):
            raise ConfigError(f"gaussian pump needs a positive width, got {self.width}")


def sample_pump(pump: PumpModel, grid: GridGeometry) -> ComplexField:
    if pump.kind == 'plane':
        values = np.full(grid.shape, pump.amplitude, dtype=complex)
    else:
        values = pump.amplitude * np.exp(-grid.radius_squared() / (pump.width * pump.width))
    return ComplexField(grid, values)


@dataclass(frozen=True)
class ObjectMask:
    grid: GridGeometry
    transmittance: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.transmittance, dtype=complex)
        if values.shape != self.grid.shape:
            raise ConfigError(f"mask shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)) or np.any(np.abs(values) > 1.0 + 1e-12):
            raise ConfigError("object transmittance must be finite with |t| <= 1")
        object.__setattr__(self, 'transmittance', freeze_array(values))

    def intensity(self) -> np.ndarray:
        return np.abs(self.transmittance) ** 2


# name -> description, shown by `objects list`
STANDARD_OBJECTS: Dict[str, str] = {
    'double-slit': "two slits of width slit_width centred at +/- separation/2 (default L/32, L/8)",
    'bar-target': "three bars of width bar_width with gaps of bar_width (default L/32)",
    'letter-E': "capital E of stroke bar_width, 3x5 strokes (2D only)",
    'point': "single unit sample nearest to offset (default 0)",
    'uniform': "all-ones transmittance",
}


def _band(coordinate: np.ndarray, centre: float, width: float, spacing: float) -> np.ndarray:
    return np.abs(coordinate - centre) <= width / 2.0 + 1e-9 * spacing


def standard_objects(name: str, grid: GridGeometry, offset: Offset = 0.0,
                     slit_width: Optional[float] = None, separation: Optional[float] = None,
                     bar_width: Optional[float] = None) -> ObjectMask:
    if name not in STANDARD_OBJECTS:
        raise ConfigError(f"unknown object '{name}', expected one of {sorted(STANDARD_OBJECTS)}")

    extent, spacing = grid.extent, grid.spacing
    coords = grid.coordinates()
    x = coords[0]
    y = coords[1] if grid.dims == 2 else None
    slit_width = extent / 32 if slit_width is None else slit_width
    separation = extent / 8 if separation is None else separation
    bar = extent / 32 if bar_width is None else bar_width

    if name == 'uniform':
        mask = np.ones(grid.shape, dtype=bool)
    elif name == 'point':
        offsets = (offset, 0.0) if np.isscalar(offset) else tuple(offset)
        index = tuple(grid.index_of(o) for o in offsets[:grid.dims])
        mask = np.zeros(grid.shape, dtype=bool)
        mask[index] = True
    elif name == 'double-slit':
        mask = _band(x, -separation / 2, slit_width, spacing) | _band(x, separation / 2, slit_width, spacing)
        if y is not None:
            mask &= _band(y, 0.0, extent / 2, spacing)
    elif name == 'bar-target':
        mask = np.zeros(grid.shape, dtype=bool)
        for centre in (-2 * bar, 0.0, 2 * bar):
            mask |= _band(x, centre, bar, spacing)
        if y is not None:
            mask &= _band(y, 0.0, 5 * bar, spacing)
    else:
        if y is None:
            raise ConfigError("letter-E is a 2D object")
        spine = _band(x, -bar, bar, spacing) & _band(y, 0.0, 5 * bar, spacing)
        arms = _band(x, 0.0, 3 * bar, spacing) & (
            _band(y, -2 * bar, bar, spacing) | _band(y, 0.0, bar, spacing) | _band(y, 2 * bar, bar, spacing)
        )
        mask = spine | arms

    logger.debug(f"Object '{name}' on {grid.dims}D grid: {int(mask.sum())} open samples")
    return ObjectMask(grid, mask.astype(complex))


def write_pgm(path: str, levels: np.ndarray):
    """Writes uint8/uint16 levels as binary PGM (P5). 1D data becomes a single row."""
    image = np.atleast_2d(levels)
    if image.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"PGM levels must be uint8 or uint16, got {image.dtype}")
    if not cv2.imwrite(path, image, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise OSError(f"Could not write PGM file: {path}")


def read_pgm(path: str) -> np.ndarray:
    image = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if image is None:
        raise OSError(f"Could not read PGM file: {path}")
    if image.ndim != 2:
        raise ConfigError(f"{path}: expected a single-channel graymap, got shape {image.shape}")
    return image


def load_mask(path: str, grid: GridGeometry) -> ObjectMask:
    """Loads an 8- or 16-bit graymap, mapping levels linearly onto transmittance [0, 1]."""
    image = read_pgm(path)
    scale = 65535.0 if image.dtype == np.uint16 else 255.0
    values = image.astype(float) / scale
    if grid.dims == 1:
        if values.shape[0] != 1:
            raise ConfigError(f"{path}: a 1D mask must be a single-row graymap, got shape {values.shape}")
        values = values[0]
    if values.shape != grid.shape:
        raise ConfigError(f"{path}: mask shape {values.shape} does not match grid shape {grid.shape}")
    logger.info(f"Loaded mask {path} ({image.dtype}, shape {image.shape})")
    return ObjectMask(grid, values)


def save_mask(mask: ObjectMask, path: str, bits: int = 8):
    if bits not in (8, 16):
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    top = 255 if bits == 8 else 65535
    levels = np.round(np.clip(np.abs(mask.transmittance), 0.0, 1.0) * top)
    write_pgm(path, levels.astype(np.uint8 if bits == 8 else np.uint16))


@dataclass(frozen=True)
class ObjectSpec:
    """Scenario description of the object: a standard name or a graymap path."""
    name: Optional[str] = 'double-slit'
    path: Optional[str] = None
    offset: Offset = 0.0
    slit_width: Optional[float] = None
    separation: Optional[float] = None
    bar_width: Optional[float] = None

    def build(self, grid: GridGeometry) -> ObjectMask:
        if self.path is not None:
            return load_mask(self.path, grid)
        return standard_objects(self.name, grid, offset=self.offset, slit_width=self.slit_width,
                                separation=self.separation, bar_width=self.bar_width)


def describe_objects() -> Sequence[str]:
    return [f"{name:12s} {text}" for name, text in STANDARD_OBJECTS.items()]
