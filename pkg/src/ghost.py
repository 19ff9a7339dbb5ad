import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

import config.settings as settings
from src.aberration import PhaseMap, decompose_parity, pupil_factor
from src.errors import ConfigError, GridMismatchError, GuardViolation
from src.interfaces import IImagingEngine, Scene
from src.parallel import ExecutionOptions, blocks, ordered_map, parallel_map, tree_reduce
from src.scene import ComplexField, GridGeometry, ObjectMask, OpticalLayout, PumpModel, freeze_array, sample_pump

logger = logging.getLogger(__name__)

Coordinate = Union[float, Tuple[float, ...]]


class Provenance(str, Enum):
    FAST_PATH = 'fast-path'
    ORACLE = 'oracle'
    CLASSICAL = 'classical'
    BASELINE = 'baseline'
    KERNEL = 'kernel'


@dataclass(frozen=True)
class CoincidenceImage:
    """Nonnegative rate R(x1) (or intensity I(x1)) on the detector grid."""
    grid: GridGeometry
    rate: np.ndarray
    normalized: bool
    provenance: Provenance
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        rate = np.asarray(self.rate, dtype=float)
        if rate.shape != self.grid.shape:
            raise ConfigError(f"rate shape {rate.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(rate)) or np.any(rate < 0):
            raise ConfigError("coincidence rate must be finite and nonnegative")
        object.__setattr__(self, 'rate', freeze_array(rate))
        object.__setattr__(self, 'warnings', tuple(self.warnings))


@dataclass(frozen=True)
class TwoPhotonAmplitude:
    """psi(x1, x2); rows index x1, columns index x2, both on `grid`."""
    grid: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        expected = (self.grid.samples ** self.grid.dims,) * 2
        if values.shape != expected:
            raise ConfigError(f"amplitude shape {values.shape} does not match {expected}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("two-photon amplitude contains non-finite values")
        object.__setattr__(self, 'values', freeze_array(values))


@dataclass(frozen=True)
class ImageMetrics:
    rms_error: float
    peak_location: Coordinate
    kernel_fwhm: float

    def to_dict(self) -> dict:
        peak = list(self.peak_location) if isinstance(self.peak_location, tuple) else self.peak_location
        return {'rms_error': self.rms_error, 'peak_location': peak, 'kernel_fwhm': self.kernel_fwhm}


def peak_normalize(rate: np.ndarray) -> np.ndarray:
    peak = np.max(rate)
    return rate / peak if peak > 0 else np.array(rate, dtype=float)


def finish_image(grid: GridGeometry, rate: np.ndarray, provenance: Provenance,
                 warnings: Tuple[str, ...] = ()) -> CoincidenceImage:
    """Clips quadrature round-off below zero and peak-normalizes."""
    rate = np.clip(np.asarray(rate, dtype=float), 0.0, None)
    return CoincidenceImage(grid, peak_normalize(rate), True, provenance, warnings)


def check_phase_grid(layout: OpticalLayout, grid: GridGeometry, phi: PhaseMap):
    lens = layout.lens_grid(grid)
    if not phi.grid.matches(lens):
        raise GridMismatchError(
            f"phase map must live on the lens grid (extent {lens.extent:.6g}, N={lens.samples}, "
            f"dims={lens.dims}), got extent {phi.grid.extent:.6g}, N={phi.grid.samples}, dims={phi.grid.dims}")


def coherent_kernel(pupil: ComplexField, oversample: int = 1) -> np.ndarray:
    """
    |FT pupil|^2 in lag order: element m holds detector lag m / oversample
    detector samples (mod the lattice). oversample > 1 zero-pads the pupil
    symmetrically to N * oversample samples per axis.
    """
    if oversample < 1:
        raise ConfigError(f"oversample must be >= 1, got {oversample}")
    values = pupil.values
    if oversample > 1:
        n = pupil.grid.samples
        before = n * (oversample - 1) // 2
        after = n * oversample - n - before
        values = np.pad(values, [(before, after)] * pupil.grid.dims)
    transform = np.fft.fftn(np.fft.ifftshift(values)) * pupil.grid.cell
    return np.abs(transform) ** 2


def kernel_energy_width(kernel: np.ndarray, grid: GridGeometry,
                        fraction: float = settings.KERNEL_ENERGY_FRACTION) -> float:
    """Width of the smallest centred window holding `fraction` of each per-axis marginal, max over axes."""
    centred = np.fft.fftshift(kernel)
    n = grid.samples
    centre = n // 2
    widest = 0
    for axis in range(grid.dims):
        others = tuple(a for a in range(grid.dims) if a != axis)
        marginal = centred.sum(axis=others) if others else centred
        total = marginal.sum()
        if total <= 0:
            continue
        prefix = np.concatenate(([0.0], np.cumsum(marginal)))
        half = np.arange(centre + 1)
        window = prefix[np.minimum(centre + half + 1, n)] - prefix[centre - half]
        w = int(np.argmax(window >= fraction * total))
        widest = max(widest, 2 * w + 1)
    return widest * grid.spacing


def kernel_fwhm(rate: np.ndarray, grid: GridGeometry) -> float:
    """
    Contiguous samples >= half the peak through the peak (cyclic), times the
    spacing; the widest axis is reported.
    """
    rate = np.asarray(rate)
    peak_index = np.unravel_index(int(np.argmax(rate)), rate.shape)
    peak = rate[peak_index]
    if peak <= 0:
        return 0.0
    n = grid.samples
    widest = 0
    for axis in range(grid.dims):
        index = list(peak_index)
        index[axis] = slice(None)
        line = np.roll(rate[tuple(index)], -peak_index[axis])
        above = line >= peak / 2.0
        if above.all():
            widest = n
            break
        right = int(np.argmin(above))
        left = int(np.argmin(above[::-1]))
        widest = max(widest, min(right + left, n))
    return widest * grid.spacing


def _kernel_image(kernel: np.ndarray, grid: GridGeometry) -> CoincidenceImage:
    # lag 0 moves to coordinate 0
    return finish_image(grid, np.fft.fftshift(kernel), Provenance.KERNEL)


def ghost_kernel(layout: OpticalLayout, grid: GridGeometry, phi: PhaseMap) -> CoincidenceImage:
    """|FT e^{2i phi_even}|^2, centred on lag 0 of the detector grid."""
    check_phase_grid(layout, grid, phi)
    even, _ = decompose_parity(phi)
    return _kernel_image(coherent_kernel(pupil_factor(even, doubling=True)), grid)


def ghost_fast(layout: OpticalLayout, obj: ObjectMask, phi: PhaseMap) -> CoincidenceImage:
    """
    Far-field coincidence image: |G|^2 cyclically convolved with the even-order
    kernel. Only phi_even enters, so odd terms cancel exactly.
    """
    grid = obj.grid
    check_phase_grid(layout, grid, phi)
    even, _ = decompose_parity(phi)
    kernel = coherent_kernel(pupil_factor(even, doubling=True))
    logger.debug(f"ghost-fast: N={grid.samples} dims={grid.dims} max|phi_even|={np.max(np.abs(even.values)):.4g} rad")

    rate = np.fft.ifftn(np.fft.fftn(obj.intensity()) * np.fft.fftn(kernel)).real * grid.cell

    warnings = ()
    width = kernel_energy_width(kernel, grid)
    if width >= settings.KERNEL_WIDTH_LIMIT * grid.extent:
        message = (f"ghost kernel 99% energy width {width:.4g} m is at least "
                   f"{settings.KERNEL_WIDTH_LIMIT:g} of the extent {grid.extent:.4g} m; cyclic wrap-around likely")
        logger.warning(message)
        warnings = (message,)
    return finish_image(grid, rate, Provenance.FAST_PATH, warnings)


def _dft_matrix(grid: GridGeometry) -> np.ndarray:
    # exp(-2 pi i c c' / N) with the product reduced mod N in integers
    c = grid.centred_indices()
    return np.exp(-2j * np.pi * (np.outer(c, c) % grid.samples) / grid.samples)


def ghost_oracle(layout: OpticalLayout, obj: ObjectMask, phi: PhaseMap, pump: PumpModel,
                 far_field: bool = True, options: Optional[ExecutionOptions] = None,
                 max_samples: int = settings.ORACLE_MAX_SAMPLES) -> Tuple[TwoPhotonAmplitude, CoincidenceImage]:
    """
    Brute-force quadrature of the two-photon amplitude.

    psi(x1, x2) = sum_xi F(xi) A(xi, x1) A(xi, x2) G(x2) dxi, times the detector
    phases e^{ik(x1^2 + x2^2)/2z2}, with
    A(xi, x) = sum_x' exp(-ik(xi/z1 + x/z2) x') e^{i phi(x')} dx'.
    The x' exponent carries the 1/z2 of the lens-to-detector leg on both terms.
    F = E_p, or E_p e^{ik xi^2/z1} when far_field is off.
    """
    grid = obj.grid
    if grid.dims != 1:
        raise GuardViolation("ghost-oracle is 1D only: the 2D amplitude needs a six-dimensional quadrature")
    if grid.samples > max_samples:
        raise GuardViolation(f"ghost-oracle supports at most {max_samples} samples, got {grid.samples}")
    check_phase_grid(layout, grid, phi)
    options = options or ExecutionOptions()

    lens = phi.grid
    source = layout.source_grid(grid)
    dft = _dft_matrix(grid)
    a = (dft * pupil_factor(phi).values[None, :]) @ dft.T * lens.spacing

    emission = sample_pump(pump, source).values
    if not far_field:
        xi = source.axis()
        emission = emission * np.exp(1j * layout.wavenumber * xi * xi / layout.z1)
    weighted = a * (emission * source.spacing)[:, None]
    bucket = a * obj.transmittance[None, :]

    x = grid.axis()
    chirp = np.exp(1j * layout.wavenumber * x * x / (2.0 * layout.z2))
    logger.debug(f"ghost-oracle: N={grid.samples} pump={pump.kind} far_field={far_field} threads={options.threads}")

    def rows(block: slice) -> np.ndarray:
        psi = weighted[:, block].T @ bucket
        return psi * chirp[block, None] * chirp[None, :]

    parts = parallel_map(rows, blocks(grid.samples, settings.ORACLE_ROW_BLOCK), options, desc="oracle rows")
    psi = np.vstack(parts)
    rate = np.sum(np.abs(psi) ** 2, axis=1) * grid.spacing
    return TwoPhotonAmplitude(grid, psi), finish_image(grid, rate, Provenance.ORACLE)


def steering_offsets(samples: int, n_steer: int) -> np.ndarray:
    """
    Lattice offsets of the steering samples: floor((s - n//2) * N / n), spread over
    the whole frequency support and centred on the on-axis sample.
    """
    return (np.arange(n_steer) - n_steer // 2) * samples // n_steer


def classical_ghost(layout: OpticalLayout, obj: ObjectMask, phi: PhaseMap, n_steer: Optional[int] = None,
                    options: Optional[ExecutionOptions] = None,
                    max_points: int = settings.CLASSICAL_MAX_POINTS) -> CoincidenceImage:
    """
    Rotating-mirror source: each steering sample s sends a beam pair at
    momenta +/- q_s through the shared lens. Beam amplitudes at the detectors are
    a_s(x1) = P(q_s + x1) and b_s(x2) = G(x2) P(q_s + x2), P the pupil spectrum;
    the coincidence amplitude sums a_s b_s over the steering samples, so the
    pairing x' <-> -x' of the entangled source comes from the steering sum.
    n_steer is a per-axis count.
    """
    grid = obj.grid
    n = grid.samples
    n_steer = n if n_steer is None else n_steer
    if not 1 <= n_steer <= n:
        raise ConfigError(f"n_steer must lie in [1, {n}], got {n_steer}")
    points = n ** grid.dims
    if points > max_points:
        raise GuardViolation(f"classical engine supports at most {max_points} grid points, got {points}")
    check_phase_grid(layout, grid, phi)
    options = options or ExecutionOptions()

    spectrum = np.fft.fftn(np.fft.ifftshift(pupil_factor(phi).values)) * phi.grid.cell
    index = (steering_offsets(n, n_steer)[:, None] + grid.centred_indices()[None, :]) % n
    if grid.dims == 1:
        beams = spectrum[index]
    else:
        beams = spectrum[index[:, None, :, None], index[None, :, None, :]].reshape(n_steer * n_steer, points)
    bucket = beams * obj.transmittance.reshape(-1)[None, :]
    logger.debug(f"classical: N={n} dims={grid.dims} n_steer={n_steer} ({beams.shape[0]} steering samples)")

    def partial(block: slice) -> np.ndarray:
        return beams[block].T @ bucket[block]

    steps = blocks(beams.shape[0], settings.STEERING_BLOCK)
    psi = tree_reduce(ordered_map(partial, steps, options, desc="steering"))
    rate = (np.sum(np.abs(psi) ** 2, axis=1) * grid.cell).reshape(grid.shape)
    return finish_image(grid, rate, Provenance.CLASSICAL)


def image_metrics(image: CoincidenceImage, reference: CoincidenceImage) -> ImageMetrics:
    if not image.grid.matches(reference.grid):
        raise GridMismatchError("image and reference grids differ")
    grid = image.grid
    diff = peak_normalize(image.rate) - peak_normalize(reference.rate)
    rms = float(np.sqrt(np.mean(diff * diff)))

    peak_index = np.unravel_index(int(np.argmax(image.rate)), image.rate.shape)
    axis = grid.axis()
    coords = tuple(float(axis[i]) for i in peak_index)
    peak = coords[0] if grid.dims == 1 else coords
    return ImageMetrics(rms, peak, kernel_fwhm(image.rate, grid))


class FastGhostEngine(IImagingEngine):
    name = 'ghost-fast'

    def render(self, scene: Scene, options: ExecutionOptions) -> CoincidenceImage:
        return ghost_fast(scene.layout, scene.obj, scene.phase)


class OracleGhostEngine(IImagingEngine):
    name = 'ghost-oracle'

    def __init__(self, max_samples: int = settings.ORACLE_MAX_SAMPLES, far_field: bool = True):
        self.max_samples = max_samples
        self.far_field = far_field

    def render(self, scene: Scene, options: ExecutionOptions) -> CoincidenceImage:
        _, image = ghost_oracle(scene.layout, scene.obj, scene.phase, scene.pump,
                                far_field=self.far_field, options=options, max_samples=self.max_samples)
        return image


class ClassicalGhostEngine(IImagingEngine):
    name = 'classical'

    def __init__(self, n_steer: Optional[int] = None, max_points: int = settings.CLASSICAL_MAX_POINTS):
        self.n_steer = n_steer
        self.max_points = max_points

    def render(self, scene: Scene, options: ExecutionOptions) -> CoincidenceImage:
        return classical_ghost(scene.layout, scene.obj, scene.phase, n_steer=self.n_steer,
                               options=options, max_points=self.max_points)
