import math
import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings as hsettings, strategies as st

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.aberration import (AberrationSpec, MonomialTerm, PhaseMap, ZernikeTerm, decompose_parity, noll_to_nm,
                            project_parity, pupil_factor, synthesize_phase, zernike, zernike_radial_coefficients)
from src.errors import ConfigError
from src.scene import GridGeometry

GRID_1D = GridGeometry(1, 1024, 2.0)
GRID_2D = GridGeometry(2, 256, 2.0)

monomial_1d = st.builds(MonomialTerm, st.integers(0, 7), st.none(), st.floats(-5.0, 5.0))
monomial_2d = st.builds(MonomialTerm, st.integers(0, 5), st.integers(0, 5), st.floats(-5.0, 5.0))
zernike_terms = st.builds(ZernikeTerm, st.integers(1, 36), st.floats(-3.0, 3.0))


def _relative(a: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(a))) / scale if scale > 0 else float(np.max(np.abs(a)))


class TestZernike(unittest.TestCase):
    def test_noll_indices(self):
        expected = {1: (0, 0), 2: (1, 1), 3: (1, -1), 4: (2, 0), 5: (2, -2), 6: (2, 2),
                    7: (3, -1), 8: (3, 1), 11: (4, 0), 22: (6, 0)}
        for j, nm in expected.items():
            self.assertEqual(noll_to_nm(j), nm, f"j={j}")

    def test_radial_coefficients_of_spherical(self):
        # R_4^0 = 6 r^4 - 6 r^2 + 1
        self.assertEqual(zernike_radial_coefficients(4, 0), (6.0, -6.0, 1.0))

    def test_primary_spherical_at_aperture_edge(self):
        grid = GridGeometry(2, 8, 8.0)  # unit spacing, coordinates -4..3
        spec = AberrationSpec((ZernikeTerm(11, 1.0),), aperture_radius=2.0)
        phi = synthesize_phase(spec, grid)
        # x = 2 (index 6), y = 0 (index 4): r = 1
        self.assertAlmostEqual(phi.values[6, 4], math.sqrt(5.0) * (6 - 6 + 1), places=12)
        # x = 1: r = 0.5
        self.assertAlmostEqual(phi.values[5, 4], math.sqrt(5.0) * (6 / 16 - 6 / 4 + 1), places=12)

    def test_evaluated_beyond_the_unit_disk(self):
        x = np.array([2.0])
        self.assertAlmostEqual(zernike(4, x, np.zeros(1))[0], math.sqrt(3.0) * (2 * 4 - 1), places=12)

    def test_noll_index_validation(self):
        with self.assertRaises(ConfigError):
            AberrationSpec((ZernikeTerm(0, 1.0),))
        with self.assertRaises(ConfigError):
            AberrationSpec((ZernikeTerm(67, 1.0),))
        with self.assertRaises(ConfigError):
            AberrationSpec((), aperture_radius=0.0)

    def test_zernike_needs_2d(self):
        with self.assertRaises(ConfigError):
            synthesize_phase(AberrationSpec((ZernikeTerm(8, 1.0),)), GRID_1D)


class TestSynthesize(unittest.TestCase):
    def test_empty_spec_is_zero(self):
        phi = synthesize_phase(AberrationSpec(()), GRID_1D)
        self.assertTrue(np.all(phi.values == 0.0))

    def test_monomial_square(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(2, None, 1.0),)), GRID_1D)
        x = GRID_1D.axis()
        np.testing.assert_array_equal(phi.values, x * x)

    def test_monomial_2d(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(1, 2, 3.0),)), GRID_2D)
        x, y = GRID_2D.coordinates()
        np.testing.assert_allclose(phi.values, 3.0 * x * y * y, rtol=1e-14, atol=0)

    def test_1d_monomial_with_y_exponent_rejected(self):
        with self.assertRaises(ConfigError):
            synthesize_phase(AberrationSpec((MonomialTerm(1, 2, 1.0),)), GRID_1D)

    def test_phase_map_rejects_non_finite(self):
        values = np.zeros(GRID_1D.shape)
        values[3] = np.nan
        with self.assertRaises(ConfigError):
            PhaseMap(GRID_1D, values)

    def test_phase_map_is_immutable(self):
        phi = PhaseMap.zeros(GRID_1D)
        with self.assertRaises(ValueError):
            phi.values[0] = 1.0


class TestDecomposeParity(unittest.TestCase):
    def test_cubic_is_odd_on_paired_samples(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(3, None, 1.0),)), GRID_1D)
        even, odd = decompose_parity(phi)
        paired = GRID_1D.paired_mask()
        self.assertTrue(np.all(even.values[paired] == 0.0))
        np.testing.assert_array_equal(odd.values[paired], phi.values[paired])

    def test_square_is_even(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(2, None, 1.0),)), GRID_1D)
        even, odd = decompose_parity(phi)
        np.testing.assert_array_equal(even.values, phi.values)
        self.assertTrue(np.all(odd.values == 0.0))

    def test_coma_is_odd(self):
        phi = synthesize_phase(AberrationSpec((ZernikeTerm(8, 1.0),), aperture_radius=1.0), GRID_2D)
        even, odd = decompose_parity(phi)
        paired = GRID_2D.paired_mask()
        scale = np.max(np.abs(phi.values))
        self.assertLessEqual(_relative(even.values[paired], scale), 1e-12)
        self.assertLessEqual(_relative(odd.values[paired] - phi.values[paired], scale), 1e-12)

    def test_zernike_parity_law(self):
        paired = GRID_2D.paired_mask()
        for j in range(1, 37):
            n, m = noll_to_nm(j)
            phi = synthesize_phase(AberrationSpec((ZernikeTerm(j, 1.0),), aperture_radius=1.0), GRID_2D)
            even, odd = decompose_parity(phi)
            scale = np.max(np.abs(phi.values))
            vanishing = odd if m % 2 == 0 else even
            self.assertLessEqual(_relative(vanishing.values[paired], scale), 1e-12, f"j={j} (n={n}, m={m})")

    @hsettings(max_examples=100, deadline=None)
    @given(st.lists(monomial_1d, max_size=4))
    def test_reconstruction_and_parity_1d(self, terms):
        self._check_decomposition(synthesize_phase(AberrationSpec(tuple(terms)), GRID_1D))

    @hsettings(max_examples=100, deadline=None)
    @given(st.lists(st.one_of(monomial_2d, zernike_terms), max_size=4))
    def test_reconstruction_and_parity_2d(self, terms):
        self._check_decomposition(synthesize_phase(AberrationSpec(tuple(terms), aperture_radius=1.0), GRID_2D))

    def _check_decomposition(self, phi: PhaseMap):
        even, odd = decompose_parity(phi)
        grid = phi.grid
        scale = float(np.max(np.abs(phi.values)))
        self.assertLessEqual(float(np.max(np.abs(even.values + odd.values - phi.values))), 1e-12 * scale)
        np.testing.assert_array_equal(grid.reflect(even.values), even.values)
        np.testing.assert_array_equal(grid.reflect(odd.values), -odd.values)

    @hsettings(max_examples=30, deadline=None)
    @given(st.lists(monomial_1d, min_size=1, max_size=4))
    def test_idempotence(self, terms):
        phi = synthesize_phase(AberrationSpec(tuple(terms)), GRID_1D)
        even, odd = decompose_parity(phi)
        even_even, even_odd = decompose_parity(even)
        odd_even, odd_odd = decompose_parity(odd)
        np.testing.assert_array_equal(even_even.values, even.values)
        self.assertTrue(np.all(even_odd.values == 0.0))
        self.assertTrue(np.all(odd_even.values == 0.0))
        np.testing.assert_array_equal(odd_odd.values, odd.values)

    def test_project_parity(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(2, None, 1.0), MonomialTerm(3, None, 1.0))), GRID_1D)
        even, odd = decompose_parity(phi)
        self.assertIs(project_parity(phi, 'full'), phi)
        np.testing.assert_array_equal(project_parity(phi, 'even').values, even.values)
        np.testing.assert_array_equal(project_parity(phi, 'odd').values, odd.values)
        with self.assertRaises(ConfigError):
            project_parity(phi, 'both')


class TestPupilFactor(unittest.TestCase):
    def test_zero_phase_is_one(self):
        field = pupil_factor(PhaseMap.zeros(GRID_1D))
        self.assertTrue(np.all(field.values == 1.0 + 0.0j))

    def test_quarter_turn_is_i(self):
        field = pupil_factor(PhaseMap(GRID_1D, np.full(GRID_1D.shape, math.pi / 2)))
        np.testing.assert_allclose(field.values, 1j, atol=1e-15)

    def test_doubling_matches_twice_the_phase(self):
        phi = synthesize_phase(AberrationSpec((MonomialTerm(2, None, 3.0),)), GRID_1D)
        np.testing.assert_array_equal(pupil_factor(phi, doubling=True).values,
                                      pupil_factor(phi.scaled(2.0)).values)

    @hsettings(max_examples=30, deadline=None)
    @given(st.lists(st.one_of(monomial_2d, zernike_terms), max_size=4), st.booleans())
    def test_unimodular(self, terms, doubling):
        phi = synthesize_phase(AberrationSpec(tuple(terms), aperture_radius=1.0), GRID_2D)
        modulus = np.abs(pupil_factor(phi, doubling).values)
        self.assertLessEqual(float(np.max(np.abs(modulus - 1.0))), 1e-12)


if __name__ == '__main__':
    unittest.main()
