import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.aberration import decompose_parity, synthesize_phase
from src.baseline import IncoherentBaselineEngine, baseline_kernel
from src.ghost import (ClassicalGhostEngine, CoincidenceImage, FastGhostEngine, OracleGhostEngine, ghost_kernel,
                       image_metrics, kernel_fwhm)
from src.interfaces import IImagingEngine, IResultWriter, Scene
from src.noise import NoiseReport, cancellation_report
from src.parallel import ExecutionOptions
from src.scenario import NoiseConfig, ScenarioConfig

logger = logging.getLogger(__name__)


def build_engines(config: ScenarioConfig) -> List[IImagingEngine]:
    factories = {
        'ghost-fast': lambda: FastGhostEngine(),
        'ghost-oracle': lambda: OracleGhostEngine(config.oracle_max_samples, config.far_field),
        'classical': lambda: ClassicalGhostEngine(config.n_steer, config.classical_max_points),
        'baseline': lambda: IncoherentBaselineEngine(config.illumination, config.oversample),
    }
    return [factories[name]() for name in config.engines]


@dataclass
class RunSummary:
    output_dir: str
    files: List[str]
    metrics: Dict[str, Any]
    warnings: List[str] = field(default_factory=list)


def _pairwise(images: Dict[str, CoincidenceImage]) -> Dict[str, Dict[str, float]]:
    return {a: {b: image_metrics(images[a], images[b]).rms_error for b in images} for a in images}


def _summary_text(config: ScenarioConfig, scene: Scene, metrics: Dict[str, Any], warnings: List[str]) -> str:
    grid, layout = scene.grid, scene.layout
    lines = [
        "ghost imaging run",
        f"grid: dims={grid.dims} N={grid.samples} extent={grid.extent:.6g} m spacing={grid.spacing:.6g} m",
        f"layout: wavelength={layout.wavelength:.6g} m z1={layout.z1:.6g} m z2={layout.z2:.6g} m "
        f"f={layout.focal_length:.6g} m",
        f"pump: {scene.pump.kind}" + (f" width={scene.pump.width:.6g} m" if scene.pump.width else ""),
        f"aberration: {len(config.aberration.terms)} term(s), projection={config.project}, "
        f"max|phi|={float(np.max(np.abs(scene.phase.values))):.6g} rad",
        f"source-edge chirp phase k (Ls/2)^2 / z1 = {metrics['edge_chirp_phase']:.6g} rad",
        f"kernel FWHM: ghost={metrics['ghost_kernel_fwhm']:.6g} m baseline={metrics['baseline_kernel_fwhm']:.6g} m",
        "",
        f"{'engine':14s} {'rms vs ideal':>14s} {'peak':>24s} {'fwhm':>14s}",
    ]
    for name, entry in metrics['engines'].items():
        peak = entry['peak_location']
        peak_text = ", ".join(f"{p:.6g}" for p in peak) if isinstance(peak, list) else f"{peak:.6g}"
        lines.append(f"{name:14s} {entry['rms_error']:14.6g} {peak_text:>24s} {entry['kernel_fwhm']:14.6g}")
    if warnings:
        lines.append("")
        lines.extend(f"warning: {w}" for w in warnings)
    return "\n".join(lines) + "\n"


class ScenarioRunner:
    """Renders every configured engine on one scene and writes the results."""

    def __init__(self, engines: List[IImagingEngine], writer: IResultWriter, options: ExecutionOptions):
        self.engines = engines
        self.writer = writer
        self.options = options

    def render_all(self, scene: Scene) -> Tuple[Dict[str, CoincidenceImage], Dict[str, CoincidenceImage]]:
        ideal_scene = scene.without_aberration()
        images, ideals = {}, {}
        pbar = tqdm(self.engines, desc="Rendering engines", unit="engine", disable=not self.options.progress)
        for engine in pbar:
            pbar.set_description(f"Rendering {engine.name}")
            logger.info(f"Rendering {engine.name}")
            images[engine.name] = engine.render(scene, self.options)
            ideals[engine.name] = engine.render(ideal_scene, self.options)
        pbar.close()
        return images, ideals

    def run(self, config: ScenarioConfig, scene: Scene, seed: Optional[int] = None) -> RunSummary:
        grid, layout = scene.grid, scene.layout
        images, ideals = self.render_all(scene)

        files = []
        for name, image in images.items():
            files.append(self.writer.write_image(f"image-{name}", image))
        files.append(self.writer.write_mask("object", scene.obj))

        kernel_ghost = ghost_kernel(layout, grid, scene.phase)
        kernel_baseline = baseline_kernel(layout, grid, scene.phase)
        files.append(self.writer.write_image("kernel-ghost", kernel_ghost))
        files.append(self.writer.write_image("kernel-baseline", kernel_baseline))

        warnings = [w for image in images.values() for w in image.warnings]
        metrics = {
            'engines': {name: {**image_metrics(image, ideals[name]).to_dict(), 'warnings': list(image.warnings)}
                        for name, image in images.items()},
            'pairwise_rms': _pairwise(images),
            'ghost_kernel_fwhm': kernel_fwhm(kernel_ghost.rate, grid),
            'baseline_kernel_fwhm': kernel_fwhm(kernel_baseline.rate, grid),
            'edge_chirp_phase': layout.edge_chirp_phase(grid),
            'grid': {'dims': grid.dims, 'samples': grid.samples, 'extent': grid.extent},
            'seed': seed,
        }
        files.append(self.writer.write_json("metrics", metrics))
        files.append(self.writer.write_text("summary", _summary_text(config, scene, metrics, warnings)))
        return RunSummary(self.writer.output_dir, files, metrics, warnings)


def run_scenario(config: ScenarioConfig, writer: IResultWriter, options: Optional[ExecutionOptions] = None,
                 seed: Optional[int] = None) -> RunSummary:
    options = options or ExecutionOptions()
    scene = config.build_scene()
    logger.info(f"Scene: {config.obj.name or config.obj.path} on {scene.grid.dims}D grid, "
                f"N={scene.grid.samples}, engines {list(config.engines)}")
    runner = ScenarioRunner(build_engines(config), writer, options)
    summary = runner.run(config, scene, seed)
    for name, entry in summary.metrics['engines'].items():
        logger.info(f"{name}: rms vs aberration-free = {entry['rms_error']:.4g}")
    return summary


def decompose_cmd(config: ScenarioConfig, writer: IResultWriter) -> Dict[str, Any]:
    """Writes the configured phase and its even and odd parts on the lens grid."""
    lens = config.lens_grid
    phi = synthesize_phase(config.aberration, lens)
    even, odd = decompose_parity(phi)
    error = float(np.max(np.abs(even.values + odd.values - phi.values)))

    files = []
    for name, part in (('phase', phi), ('phase-even', even), ('phase-odd', odd)):
        files.extend(writer.write_array(name, lens, part.values).values())
    report = {
        'reconstruction_error': error,
        'max_abs_phase': float(np.max(np.abs(phi.values))),
        'max_abs_even': float(np.max(np.abs(even.values))),
        'max_abs_odd': float(np.max(np.abs(odd.values))),
        'grid': {'dims': lens.dims, 'samples': lens.samples, 'extent': lens.extent},
        'files': sorted(os.path.basename(f) for f in files),
    }
    writer.write_json("decompose", report)
    logger.info(f"Decomposed {len(config.aberration.terms)} term(s): reconstruction error {error:.3g} rad")
    return report


def noise_cmd(config: NoiseConfig, writer: IResultWriter, options: Optional[ExecutionOptions] = None,
              seed: Optional[int] = None) -> NoiseReport:
    noise = config.noise if seed is None else replace(config.noise, seed=seed)
    report = cancellation_report(noise, options)
    writer.write_json("noise-report", report.to_dict())
    logger.info(f"Noise report: shrinks={report.shrinks} within_bound={report.within_bound} slope={report.slope}")
    return report
