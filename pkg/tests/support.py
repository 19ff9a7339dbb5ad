import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.aberration import AberrationSpec, MonomialTerm, PhaseMap, decompose_parity, synthesize_phase
from src.scene import GridGeometry, OpticalLayout, make_layout


def demo_layout() -> OpticalLayout:
    return make_layout(0.5e-6, 0.2, 0.2)


def demo_grid(samples: int = 256, dims: int = 1, extent: float = 2.0e-3) -> GridGeometry:
    return GridGeometry(dims, samples, extent)


def monomial_phase(layout: OpticalLayout, grid: GridGeometry, px: int, edge_phase: float,
                   py=None) -> PhaseMap:
    """x^px (y^py) on the lens grid, reaching `edge_phase` radians at the lens half-extent."""
    lens = layout.lens_grid(grid)
    half = lens.extent / 2.0
    coefficient = edge_phase / half ** (px + (py or 0))
    return synthesize_phase(AberrationSpec((MonomialTerm(px, py, coefficient),), half), lens)


def cubic_odd(layout: OpticalLayout, grid: GridGeometry, edge_phase: float = 40.0) -> PhaseMap:
    """Pure-odd cubic: the unpaired lattice samples are projected out."""
    return decompose_parity(monomial_phase(layout, grid, 3, edge_phase))[1]


def quadratic_even(layout: OpticalLayout, grid: GridGeometry, edge_phase: float) -> PhaseMap:
    return monomial_phase(layout, grid, 2, edge_phase)
