import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import factorial

import config.settings as settings
from src.errors import ConfigError
from src.scene import ComplexField, GridGeometry, freeze_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZernikeTerm:
    noll_index: int
    coefficient: float  # radians, Noll-normalised on the unit disk of aperture_radius

    kind = 'zernike'


@dataclass(frozen=True)
class MonomialTerm:
    px: int
    py: Optional[int] = None  # None on 1D grids
    coefficient: float = 1.0  # radians per length ** (px + py)

    kind = 'monomial'


Term = Union[ZernikeTerm, MonomialTerm]


@dataclass(frozen=True)
class AberrationSpec:
    terms: Tuple[Term, ...] = ()
    aperture_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        if not self.aperture_radius > 0:
            raise ConfigError(f"aperture_radius must be positive, got {self.aperture_radius}")
        for term in self.terms:
            if isinstance(term, ZernikeTerm):
                if term.noll_index < 1:
                    raise ConfigError(f"noll_index must be >= 1, got {term.noll_index}")
                if term.noll_index > settings.NOLL_MAX:
                    raise ConfigError(
                        f"noll_index {term.noll_index} exceeds the supported maximum {settings.NOLL_MAX}")
            elif isinstance(term, MonomialTerm):
                if term.px < 0 or (term.py is not None and term.py < 0):
                    raise ConfigError(f"monomial exponents must be non-negative, got ({term.px}, {term.py})")
            else:
                raise ConfigError(f"unsupported aberration term {term!r}")


@dataclass(frozen=True)
class PhaseMap:
    grid: GridGeometry
    values: np.ndarray  # radians

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ConfigError(f"phase shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("phase map contains non-finite values")
        object.__setattr__(self, 'values', freeze_array(values))

    def scaled(self, factor: float) -> 'PhaseMap':
        return PhaseMap(self.grid, factor * self.values)

    @classmethod
    def zeros(cls, grid: GridGeometry) -> 'PhaseMap':
        return cls(grid, np.zeros(grid.shape))


def noll_to_nm(j: int) -> Tuple[int, int]:
    """
    Noll single index -> (radial order n, signed azimuthal order m).
    Even j carry cos(m theta) (m > 0), odd j carry sin (m < 0).
    """
    if j < 1:
        raise ConfigError(f"noll_index must be >= 1, got {j}")
    n = int((math.isqrt(8 * (j - 1) + 1) - 1) // 2)
    p = j - n * (n + 1) // 2
    k = n % 2
    m = ((p + k) // 2) * 2 - k
    if m != 0 and j % 2:
        m = -m
    return n, m


@lru_cache(maxsize=None)
def zernike_radial_coefficients(n: int, m: int) -> Tuple[float, ...]:
    """
    Coefficients c_s of R_n^m(r) = r^m * sum_s c_s * (r^2)^s, highest power first.
    """
    m = abs(m)
    if (n - m) % 2:
        return (0.0,)
    half = (n - m) // 2
    coefficients = []
    for k in range(half + 1):
        c = (-1) ** k * factorial(n - k, exact=True) // (
            factorial(k, exact=True) * factorial((n + m) // 2 - k, exact=True)
            * factorial((n - m) // 2 - k, exact=True))
        coefficients.append(float(c))
    return tuple(coefficients)


def _ipow(base: np.ndarray, power: int) -> np.ndarray:
    # repeated products keep (-x)**p == (-1)**p * x**p bit for bit
    out = np.ones_like(base)
    for _ in range(power):
        out = out * base
    return out


def zernike(j: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Noll-normalised Zernike Z_j at unit-disk coordinates (x, y), continued
    as a polynomial outside the disk.
    """
    n, m = noll_to_nm(j)
    r2 = x * x + y * y
    radial = np.zeros_like(r2)
    for c in zernike_radial_coefficients(n, m):
        radial = radial * r2 + c

    if m == 0:
        return math.sqrt(n + 1) * radial

    # r^|m| cos(m theta) and r^|m| sin(|m| theta) as Re/Im of (x + iy)^|m|
    angular = _ipow(x + 1j * y, abs(m))
    angular = angular.real if m > 0 else angular.imag
    return math.sqrt(2 * (n + 1)) * radial * angular


def synthesize_phase(spec: AberrationSpec, grid: GridGeometry) -> PhaseMap:
    coords = grid.coordinates()
    values = np.zeros(grid.shape)
    for term in spec.terms:
        if isinstance(term, ZernikeTerm):
            if grid.dims != 2:
                raise ConfigError(f"Zernike term j={term.noll_index} needs a 2D grid")
            if term.noll_index > settings.NOLL_MAX:
                raise ConfigError(f"noll_index {term.noll_index} exceeds the supported maximum {settings.NOLL_MAX}")
            u = coords[0] / spec.aperture_radius
            v = coords[1] / spec.aperture_radius
            values = values + term.coefficient * zernike(term.noll_index, u, v)
        else:
            if grid.dims == 1 and term.py:
                raise ConfigError(f"monomial with py={term.py} needs a 2D grid")
            contribution = _ipow(coords[0], term.px)
            if grid.dims == 2:
                contribution = contribution * _ipow(coords[1], term.py or 0)
            values = values + term.coefficient * contribution

    logger.debug(f"Synthesized phase from {len(spec.terms)} term(s): max |phi| = {np.max(np.abs(values)):.6g} rad")
    return PhaseMap(grid, values)


def decompose_parity(phi: PhaseMap) -> Tuple[PhaseMap, PhaseMap]:
    reflected = phi.grid.reflect(phi.values)
    even = (phi.values + reflected) / 2.0
    odd = (phi.values - reflected) / 2.0
    return PhaseMap(phi.grid, even), PhaseMap(phi.grid, odd)


def project_parity(phi: PhaseMap, part: str) -> PhaseMap:
    """Keeps the 'full' map or only its 'even' or 'odd' part."""
    if part == 'full':
        return phi
    if part not in ('even', 'odd'):
        raise ConfigError(f"parity projection must be 'full', 'even' or 'odd', got '{part}'")
    even, odd = decompose_parity(phi)
    return even if part == 'even' else odd


def pupil_factor(phi: PhaseMap, doubling: bool = False) -> ComplexField:
    """
    e^{i phi} or, with doubling, e^{2i phi}. Doubling is meant for the even
    part of an aberration, giving the ghost-imaging pupil.
    """
    factor = 2.0 if doubling else 1.0
    return ComplexField(phi.grid, np.exp(1j * (factor * phi.values)))
