import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

import config.settings as settings
from src.aberration import PhaseMap, pupil_factor
from src.ghost import (CoincidenceImage, ImageMetrics, Provenance, check_phase_grid, coherent_kernel,
                       finish_image, ghost_fast, ghost_kernel, image_metrics, kernel_fwhm)
from src.interfaces import IImagingEngine, Scene
from src.parallel import ExecutionOptions
from src.scene import GridGeometry, ObjectMask, OpticalLayout, PumpModel, sample_pump

logger = logging.getLogger(__name__)


def baseline_kernel(layout: OpticalLayout, grid: GridGeometry, phi: PhaseMap, oversample: int = 1) -> CoincidenceImage:
    """
    |FT e^{i phi}|^2 centred on lag 0. With oversample > 1 the result lives on a
    lattice of N * oversample samples at pitch spacing / oversample.
    """
    check_phase_grid(layout, grid, phi)
    kernel = np.fft.fftshift(coherent_kernel(pupil_factor(phi), oversample))
    fine = GridGeometry(grid.dims, grid.samples * oversample, grid.extent)
    return finish_image(fine, kernel, Provenance.KERNEL)


def _splat(intensity: np.ndarray, positions: np.ndarray, size: int) -> np.ndarray:
    """
    Deposits intensity[a] at fractional centred lattice positions (one array per
    axis) with (bi)linear weights on a lattice of `size` per axis. Corners outside
    the field [-size/2, size/2] get no weight; the two edges share one cell.
    """
    dims = len(positions)
    lower = [np.floor(p) for p in positions]
    frac = [p - lo for p, lo in zip(positions, lower)]
    lower = [lo.astype(int) for lo in lower]
    out = np.zeros((size,) * dims)
    for corner in itertools.product((0, 1), repeat=dims):
        weight = intensity
        index = []
        for axis, step in enumerate(corner):
            corner_index = lower[axis] + step
            inside = np.abs(corner_index) <= size // 2
            weight = weight * np.where(inside, frac[axis] if step else 1.0 - frac[axis], 0.0)
            index.append(corner_index % size)
        np.add.at(out, tuple(i.ravel() for i in index), weight.ravel())
    return out


def incoherent_image(layout: OpticalLayout, obj: ObjectMask, illumination: Optional[PumpModel],
                     phi: PhaseMap, oversample: int = settings.BASELINE_OVERSAMPLE) -> CoincidenceImage:
    """
    Single-lens incoherent image: each object point xi lands at -(z2/z1) xi and
    is spread by |FT e^{i phi}|^2. The kernel lives on a fine lattice
    (pitch spacing / oversample); object points are splatted linearly onto it.
    """
    grid = obj.grid
    check_phase_grid(layout, grid, phi)
    illumination = illumination or PumpModel()
    n = grid.samples
    size = n * oversample

    source = np.abs(obj.transmittance * sample_pump(illumination, grid).values) ** 2
    ratio = layout.z2 / layout.z1
    c = grid.centred_indices()
    if grid.dims == 1:
        centred = (c,)
    else:
        centred = tuple(np.meshgrid(c, c, indexing='ij'))
    positions = tuple(-ratio * ci * oversample for ci in centred)
    deposited = _splat(source, positions, size)

    kernel = coherent_kernel(pupil_factor(phi), oversample)
    fine = np.fft.ifftn(np.fft.fftn(deposited) * np.fft.fftn(kernel)).real
    pick = (c * oversample) % size
    if grid.dims == 1:
        rate = fine[pick]
    else:
        rate = fine[np.ix_(pick, pick)]
    logger.debug(f"baseline: N={n} dims={grid.dims} oversample={oversample} M={-ratio:.4g} "
                 f"illumination={illumination.kind}")
    return finish_image(grid, rate * grid.cell, Provenance.BASELINE)


@dataclass(frozen=True)
class Comparison:
    ghost: CoincidenceImage
    baseline: CoincidenceImage
    ghost_metrics: ImageMetrics
    baseline_metrics: ImageMetrics
    ghost_kernel_fwhm: float
    baseline_kernel_fwhm: float

    def to_dict(self) -> dict:
        return {
            'ghost': self.ghost_metrics.to_dict(),
            'baseline': self.baseline_metrics.to_dict(),
            'ghost_kernel_fwhm': self.ghost_kernel_fwhm,
            'baseline_kernel_fwhm': self.baseline_kernel_fwhm,
        }


def compare_ghost_vs_baseline(layout: OpticalLayout, obj: ObjectMask, phi: PhaseMap,
                              illumination: Optional[PumpModel] = None,
                              oversample: int = settings.BASELINE_OVERSAMPLE) -> Comparison:
    """
    Ghost (fast path) and baseline images of one scene, each scored against its
    own aberration-free image (ghost upright, baseline inverted).
    """
    zero = PhaseMap.zeros(phi.grid)
    ghost = ghost_fast(layout, obj, phi)
    baseline = incoherent_image(layout, obj, illumination, phi, oversample)
    ghost_metrics = image_metrics(ghost, ghost_fast(layout, obj, zero))
    baseline_metrics = image_metrics(baseline, incoherent_image(layout, obj, illumination, zero, oversample))

    grid = obj.grid
    ghost_width = kernel_fwhm(ghost_kernel(layout, grid, phi).rate, grid)
    baseline_width = kernel_fwhm(baseline_kernel(layout, grid, phi).rate, grid)
    logger.info(f"ghost rms={ghost_metrics.rms_error:.3g} baseline rms={baseline_metrics.rms_error:.3g} "
                f"kernel FWHM ghost={ghost_width:.4g} baseline={baseline_width:.4g}")
    return Comparison(ghost, baseline, ghost_metrics, baseline_metrics, ghost_width, baseline_width)


class IncoherentBaselineEngine(IImagingEngine):
    name = 'baseline'

    def __init__(self, illumination: str = 'plane', oversample: int = settings.BASELINE_OVERSAMPLE):
        self.illumination = illumination
        self.oversample = oversample

    def render(self, scene: Scene, options: ExecutionOptions) -> CoincidenceImage:
        pump = scene.pump if self.illumination == 'pump' else PumpModel()
        return incoherent_image(scene.layout, scene.obj, pump, scene.phase, self.oversample)
