import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings as hsettings, strategies as st

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.aberration import AberrationSpec, MonomialTerm, PhaseMap, decompose_parity, synthesize_phase
from src.baseline import IncoherentBaselineEngine, baseline_kernel, compare_ghost_vs_baseline, incoherent_image
from src.ghost import Provenance, ghost_fast, ghost_kernel, image_metrics, kernel_fwhm
from src.interfaces import Scene
from src.parallel import ExecutionOptions
from src.scene import GridGeometry, ObjectMask, PumpModel, make_layout, standard_objects
from tests.support import cubic_odd, demo_grid, demo_layout, quadratic_even


class TestIncoherentImage(unittest.TestCase):
    def setUp(self):
        self.layout = demo_layout()
        self.grid = demo_grid()
        self.lens = self.layout.lens_grid(self.grid)

    def test_inverts_at_unit_distance_ratio(self):
        values = np.zeros(self.grid.shape)
        values[100:110] = 1.0
        values[150:153] = 0.5
        obj = ObjectMask(self.grid, values)
        image = incoherent_image(self.layout, obj, None, PhaseMap.zeros(self.lens))
        self.assertEqual(image.provenance, Provenance.BASELINE)
        expected = self.grid.reflect(obj.intensity())
        np.testing.assert_allclose(image.rate, expected / expected.max(), atol=1e-9)

    def test_magnification_follows_distance_ratio(self):
        layout = make_layout(0.5e-6, 0.3, 0.15)
        lens = layout.lens_grid(self.grid)
        offset = self.grid.extent / 4
        point = standard_objects('point', self.grid, offset=offset)
        baseline = incoherent_image(layout, point, None, PhaseMap.zeros(lens))
        ghost = ghost_fast(layout, point, PhaseMap.zeros(lens))
        self.assertAlmostEqual(image_metrics(baseline, baseline).peak_location, -offset / 2, delta=1e-12)
        self.assertAlmostEqual(image_metrics(ghost, ghost).peak_location, offset, delta=1e-12)

    def test_points_imaged_outside_the_field_are_dropped(self):
        layout = make_layout(0.5e-6, 0.15, 0.3)
        lens = layout.lens_grid(self.grid)
        outside = standard_objects('point', self.grid, offset=0.3 * self.grid.extent)
        image = incoherent_image(layout, outside, None, PhaseMap.zeros(lens))
        np.testing.assert_array_equal(image.rate, np.zeros(self.grid.shape))

        half = self.grid.samples // 2
        values = np.zeros(self.grid.shape)
        values[half + 51] = 1.0
        values[half + 77] = 1.0
        image = incoherent_image(layout, ObjectMask(self.grid, values), None, PhaseMap.zeros(lens))
        self.assertAlmostEqual(image_metrics(image, image).peak_location, -102 * self.grid.spacing, delta=1e-12)
        self.assertLess(float(image.rate[half + 102]), 1e-9)

    def test_odd_phase_blurs_baseline(self):
        slit = standard_objects('double-slit', self.grid)
        phi = cubic_odd(self.layout, self.grid, 40.0)
        ideal = incoherent_image(self.layout, slit, None, PhaseMap.zeros(self.lens))
        image = incoherent_image(self.layout, slit, None, phi)
        self.assertGreater(image_metrics(image, ideal).rms_error, 0.05)
        self.assertGreater(kernel_fwhm(baseline_kernel(self.layout, self.grid, phi).rate, self.grid),
                           self.grid.spacing)

    def test_pump_illumination_weights_the_object(self):
        uniform = standard_objects('uniform', self.grid)
        pump = PumpModel('gaussian', width=self.grid.extent / 8)
        image = incoherent_image(self.layout, uniform, pump, PhaseMap.zeros(self.lens))
        self.assertAlmostEqual(image_metrics(image, image).peak_location, 0.0, delta=1e-12)
        self.assertLess(float(image.rate[0]), 1e-6)

    def test_two_dimensional_point(self):
        grid = GridGeometry(2, 32, 2.0e-3)
        offset = (grid.extent / 4, -grid.extent / 8)
        point = standard_objects('point', grid, offset=offset)
        image = incoherent_image(self.layout, point, None, PhaseMap.zeros(self.layout.lens_grid(grid)))
        peak = image_metrics(image, image).peak_location
        self.assertAlmostEqual(peak[0], -offset[0], delta=1e-12)
        self.assertAlmostEqual(peak[1], -offset[1], delta=1e-12)

    def test_oversampled_kernel_grid(self):
        kernel = baseline_kernel(self.layout, self.grid, PhaseMap.zeros(self.lens), oversample=4)
        self.assertEqual(kernel.grid.samples, 4 * self.grid.samples)
        self.assertEqual(kernel.grid.extent, self.grid.extent)


class TestKernelIdentity(unittest.TestCase):
    def setUp(self):
        self.layout = demo_layout()
        self.grid = demo_grid()
        self.lens = self.layout.lens_grid(self.grid)

    @hsettings(max_examples=20, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from([0, 2, 4, 6]), st.floats(-10.0, 10.0)), min_size=1, max_size=3))
    def test_ghost_kernel_is_baseline_kernel_of_doubled_even_part(self, terms):
        half = self.lens.extent / 2.0
        spec = AberrationSpec(tuple(MonomialTerm(p, None, c / half ** p) for p, c in terms), half)
        phi = synthesize_phase(spec, self.lens)
        even, _ = decompose_parity(phi)
        np.testing.assert_array_equal(ghost_kernel(self.layout, self.grid, phi).rate,
                                      baseline_kernel(self.layout, self.grid, even.scaled(2.0)).rate)

    def test_odd_part_does_not_reach_ghost_kernel(self):
        phi = cubic_odd(self.layout, self.grid, 40.0)
        kernel = ghost_kernel(self.layout, self.grid, phi)
        self.assertEqual(kernel_fwhm(kernel.rate, self.grid), self.grid.spacing)


class TestComparison(unittest.TestCase):
    def setUp(self):
        self.layout = demo_layout()
        self.grid = demo_grid()
        self.slit = standard_objects('double-slit', self.grid)

    def test_odd_aberration_only_hurts_baseline(self):
        comparison = compare_ghost_vs_baseline(self.layout, self.slit, cubic_odd(self.layout, self.grid, 40.0))
        self.assertEqual(comparison.ghost_metrics.rms_error, 0.0)
        self.assertGreater(comparison.baseline_metrics.rms_error, 0.05)
        self.assertEqual(comparison.ghost_kernel_fwhm, self.grid.spacing)
        self.assertGreater(comparison.baseline_kernel_fwhm, self.grid.spacing)
        report = comparison.to_dict()
        self.assertEqual(set(report), {'ghost', 'baseline', 'ghost_kernel_fwhm', 'baseline_kernel_fwhm'})

    def test_even_aberration_hurts_ghost_more(self):
        comparison = compare_ghost_vs_baseline(self.layout, self.slit, quadratic_even(self.layout, self.grid, 5.0))
        self.assertGreater(comparison.ghost_metrics.rms_error, 0.0)
        self.assertGreater(comparison.ghost_metrics.rms_error, comparison.baseline_metrics.rms_error)


class TestEngine(unittest.TestCase):
    def test_plane_and_pump_illumination(self):
        layout = demo_layout()
        grid = demo_grid()
        scene = Scene(layout, standard_objects('uniform', grid), PhaseMap.zeros(layout.lens_grid(grid)),
                      PumpModel('gaussian', width=grid.extent / 8))
        plane = IncoherentBaselineEngine('plane').render(scene, ExecutionOptions())
        pump = IncoherentBaselineEngine('pump').render(scene, ExecutionOptions())
        np.testing.assert_allclose(plane.rate, 1.0, atol=1e-9)
        self.assertLess(float(pump.rate[0]), 1e-6)


if __name__ == '__main__':
    unittest.main()
