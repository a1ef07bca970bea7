import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import GridSpecError, KernelSpecError
from geo.models import CartesianPoint
from trajectories.models import Trajectory, TrajectorySet
from trajectories.services import flatten, parse_ais_csv
from trajectories.synthetic import SyntheticTraffic, write_synthetic_csv
from .kernels import build_kernel, raw_kernel
from .models import KERNEL_FAMILIES, DensityMatrix, GridCell, GridSpec, KernelSpec, parse_grid_size
from .rendering import dump_density, load_density_dump, render, render_pgm
from .services import convolve, convolve_ndimage, convolve_serial, grid_project, interpolate_cells, rasterize


def make_store(*tracks):
    trajectories = []
    for k, (xs, ys) in enumerate(tracks):
        n = len(xs)
        trajectories.append(Trajectory(k, np.arange(n, dtype=float), xs, ys, np.zeros(n), np.zeros(n)))
    return flatten(TrajectorySet(tuple(trajectories)))


def random_store(seed, count=60, max_len=80):
    rng = np.random.default_rng(seed)
    tracks = []
    for _ in range(count):
        n = int(rng.integers(1, max_len))
        xy = rng.uniform(0, 1000, size=2) + np.cumsum(rng.normal(0, 40, size=(n, 2)), axis=0)
        tracks.append((xy[:, 0], xy[:, 1]))
    return make_store(*tracks)


def reference_raster(store, grid, interpolate):
    """Point-by-point rasterizer built on the single-cell operations."""
    cells = np.zeros((grid.v, grid.u))
    for k in range(len(store)):
        part = store.slice_of(k)
        previous = None
        for x, y in zip(store.x[part], store.y[part]):
            cell = grid_project(CartesianPoint(x, y), grid)
            if cell is not None:
                cells[cell.y - 1, cell.x - 1] += 1
                if interpolate and previous is not None:
                    for between in interpolate_cells(previous, cell):
                        cells[between.y - 1, between.x - 1] += 1
            previous = cell
    return cells


def quadruple_loop(cells, weights):
    v, u = cells.shape
    a = (weights.shape[0] - 1) // 2
    out = np.zeros_like(cells)
    cells, weights = cells.tolist(), weights.tolist()
    for y in range(v):
        for x in range(u):
            total = 0.0
            for t in range(-a, a + 1):
                for s in range(-a, a + 1):
                    if 0 <= y - t < v and 0 <= x - s < u:
                        total += weights[s + a][t + a] * cells[y - t][x - s]
            out[y, x] = total
    return out


class GridTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(3, 3, 0.0, 10.0, 0.0, 10.0)

    def test_endpoints(self):
        self.assertEqual(grid_project(CartesianPoint(0.0, 0.0), self.grid), GridCell(1, 1))
        self.assertEqual(grid_project(CartesianPoint(10.0, 10.0), self.grid), GridCell(3, 3))

    def test_midpoint(self):
        self.assertEqual(grid_project(CartesianPoint(5.0, 5.0), self.grid), GridCell(2, 2))

    def test_outside_point(self):
        self.assertIsNone(grid_project(CartesianPoint(10.5, 5.0), self.grid))

    def test_parse_grid_size(self):
        self.assertEqual(parse_grid_size("1024x768"), (1024, 768))
        for bad in ("1x5", "abc", "10x"):
            with self.subTest(text=bad), self.assertRaises(GridSpecError):
                parse_grid_size(bad)

    def test_flat_axis_widened(self):
        grid = GridSpec.covering((5.0, 5.0, 0.0, 10.0), 4, 4)
        self.assertEqual((grid.x_min, grid.x_max), (4.5, 5.5))

    def test_histogram_matches_formula(self):
        rng = np.random.default_rng(0)
        grid = GridSpec(50, 40, -100.0, 300.0, 20.0, 90.0)
        x = rng.uniform(-100.0, 300.0, size=100_000)
        y = rng.uniform(20.0, 90.0, size=100_000)
        expected = np.zeros((grid.v, grid.u))
        for px, py in zip(x, y):
            cx = math.ceil((px + 100.0) / 400.0 * 49) + 1
            cy = math.ceil((py - 20.0) / 70.0 * 39) + 1
            expected[cy - 1, cx - 1] += 1
        got = rasterize(make_store((x, y)), grid, workers=4)
        np.testing.assert_array_equal(got.cells, expected)


class InterpolationTests(SimpleTestCase):
    def test_adjacent_cells(self):
        self.assertEqual(interpolate_cells(GridCell(1, 1), GridCell(2, 2)), [])

    def test_axis_line(self):
        self.assertEqual(interpolate_cells(GridCell(1, 1), GridCell(4, 1)), [GridCell(2, 1), GridCell(3, 1)])

    def test_chains_are_connected_and_monotone(self):
        rng = np.random.default_rng(1)
        for xa, ya, xb, yb in rng.integers(1, 60, size=(10_000, 4)):
            a, b = GridCell(int(xa), int(ya)), GridCell(int(xb), int(yb))
            chain = [a] + interpolate_cells(a, b) + [b]
            self.assertEqual(len(chain), max(max(abs(b.x - a.x), abs(b.y - a.y)) + 1, 2))
            for p, q in zip(chain, chain[1:]):
                self.assertLessEqual(max(abs(q.x - p.x), abs(q.y - p.y)), 1)
                self.assertGreaterEqual((q.x - p.x) * np.sign(b.x - a.x), 0)
                self.assertGreaterEqual((q.y - p.y) * np.sign(b.y - a.y), 0)


class RasterizeTests(SimpleTestCase):
    def test_single_point(self):
        store = make_store(([3.0], [4.0]))
        grid = GridSpec.covering((3.0, 3.0, 4.0, 4.0), 8, 8)
        m = rasterize(store, grid)
        self.assertEqual(m.total, 1.0)
        self.assertEqual(np.count_nonzero(m.cells), 1)

    def test_interpolated_row(self):
        store = make_store(([0.0, 3.0], [0.0, 0.0]))
        grid = GridSpec(4, 2, 0.0, 3.0, 0.0, 1.0)
        m = rasterize(store, grid, interpolate=True)
        np.testing.assert_array_equal(m.cells[0], [1, 1, 1, 1])
        self.assertEqual(m.interpolated_cells, 2)

    def test_no_interpolation_across_trajectories(self):
        store = make_store(([0.0], [0.0]), ([3.0], [0.0]))
        grid = GridSpec(4, 2, 0.0, 3.0, 0.0, 1.0)
        m = rasterize(store, grid, interpolate=True, workers=2)
        np.testing.assert_array_equal(m.cells[0], [1, 0, 0, 1])

    def test_outside_points_counted(self):
        store = make_store(([0.0, 50.0, 2.0], [0.0, 0.0, 0.0]))
        m = rasterize(store, GridSpec(4, 4, 0.0, 3.0, 0.0, 3.0), interpolate=True)
        self.assertEqual(m.skipped_points, 1)
        self.assertEqual(m.total, 2.0)

    def test_workers_agree_with_reference(self):
        store = random_store(2)
        grid = GridSpec(64, 48, 100.0, 900.0, 150.0, 850.0)
        for interpolate in (False, True):
            expected = reference_raster(store, grid, interpolate)
            one = rasterize(store, grid, interpolate=interpolate, workers=1)
            eight = rasterize(store, grid, interpolate=interpolate, workers=8)
            with self.subTest(interpolate=interpolate):
                np.testing.assert_array_equal(one.cells, expected)
                np.testing.assert_array_equal(eight.cells, expected)


class KernelTests(SimpleTestCase):
    def test_uniform_three(self):
        np.testing.assert_allclose(build_kernel(KernelSpec("uniform", 3)).weights, np.full((3, 3), 1 / 9), rtol=1e-15)

    def test_gaussian_raw_center(self):
        raw = raw_kernel(KernelSpec("gaussian", 5))
        self.assertAlmostEqual(raw[2, 2], 1 / (2 * math.pi), places=15)

    def test_epanechnikov_five(self):
        w = np.array([-2 / 3, -1 / 3, 0.0, 1 / 3, 2 / 3])
        g = 0.75 * (1 - w * w)
        expected = np.outer(g, g)
        np.testing.assert_allclose(build_kernel(KernelSpec("Epanechnikov", 5)).weights, expected / expected.sum(), rtol=1e-14)

    def test_every_family_normalized_and_symmetric(self):
        for family in KERNEL_FAMILIES:
            for bandwidth in range(1, 16, 2):
                with self.subTest(family=family, bandwidth=bandwidth):
                    w = build_kernel(KernelSpec(family, bandwidth)).weights
                    self.assertAlmostEqual(w.sum(), 1.0, places=12)
                    self.assertTrue(np.all(w > 0))
                    np.testing.assert_allclose(w, w.T, rtol=1e-14)
                    np.testing.assert_allclose(w, w[::-1, ::-1], rtol=1e-14)

    def test_even_bandwidth_rejected(self):
        with self.assertRaises(KernelSpecError):
            KernelSpec("gaussian", 4)

    def test_unknown_family_rejected(self):
        with self.assertRaises(KernelSpecError):
            KernelSpec("boxcar", 3)


class ConvolveTests(SimpleTestCase):
    def setUp(self):
        self.cells = np.random.default_rng(3).random((64, 64))

    def test_identity_kernel(self):
        m = DensityMatrix(self.cells)
        np.testing.assert_array_equal(convolve(m, build_kernel(KernelSpec("gaussian", 1))).cells, self.cells)

    def test_impulse_reproduces_kernel(self):
        impulse = np.zeros((9, 9))
        impulse[4, 4] = 1.0
        k = build_kernel(KernelSpec("triangular", 5))
        out = convolve(DensityMatrix(impulse), k).cells
        np.testing.assert_allclose(out[2:7, 2:7], k.weights.T, atol=1e-15)
        self.assertEqual(np.count_nonzero(out), 25)

    def test_matches_quadruple_loop(self):
        m = DensityMatrix(self.cells)
        cases = [(family, bandwidth) for family in KERNEL_FAMILIES for bandwidth in (3, 7)] + [("gaussian", 15)]
        for family, bandwidth in cases:
            k = build_kernel(KernelSpec(family, bandwidth))
            with self.subTest(family=family, bandwidth=bandwidth):
                np.testing.assert_allclose(convolve(m, k, workers=4).cells, quadruple_loop(self.cells, k.weights), rtol=0, atol=1e-12)

    def test_serial_and_tiled_agree(self):
        m = DensityMatrix(self.cells)
        k = build_kernel(KernelSpec("quartic", 7))
        np.testing.assert_allclose(convolve_serial(m, k).cells, convolve(m, k).cells, rtol=0, atol=1e-12)

    def test_tiling_and_workers_bit_identical(self):
        m = DensityMatrix(self.cells)
        k = build_kernel(KernelSpec("cosine", 9))
        reference = convolve(m, k, workers=1)
        for tile, workers in ((7, 4), (16, 8), (64, 2)):
            with self.subTest(tile=tile, workers=workers):
                np.testing.assert_array_equal(convolve(m, k, workers=workers, tile=tile).cells, reference.cells)

    def test_interior_mass_conserved(self):
        cells = np.zeros((40, 40))
        cells[15:25, 15:25] = np.random.default_rng(4).random((10, 10))
        out = convolve(DensityMatrix(cells), build_kernel(KernelSpec("tricube", 9)))
        self.assertAlmostEqual(out.total, cells.sum(), delta=1e-10)

    def test_widest_kernels_match_quadruple_loop(self):
        cells = np.random.default_rng(9).random((20, 24))
        m = DensityMatrix(cells)
        for family in KERNEL_FAMILIES:
            k = build_kernel(KernelSpec(family, 15))
            with self.subTest(family=family):
                np.testing.assert_allclose(convolve(m, k, workers=3, tile=8).cells, quadruple_loop(cells, k.weights), rtol=0, atol=1e-12)

    def test_matches_ndimage(self):
        m = DensityMatrix(self.cells)
        for family, bandwidth in (("gaussian", 5), ("triweight", 9), ("cosine", 15)):
            k = build_kernel(KernelSpec(family, bandwidth))
            with self.subTest(family=family, bandwidth=bandwidth):
                np.testing.assert_allclose(convolve(m, k, workers=4).cells, convolve_ndimage(m, k).cells, rtol=0, atol=1e-12)

    def test_mass_leaks_at_the_border(self):
        cells = np.zeros((30, 30))
        cells[0, :] = 1.0
        cells[:, -1] = 2.0
        cells[12:18, 12:18] = 3.0
        for family in KERNEL_FAMILIES:
            out = convolve(DensityMatrix(cells), build_kernel(KernelSpec(family, 7)))
            with self.subTest(family=family):
                self.assertLess(out.total, cells.sum())

    def test_kernel_larger_than_grid(self):
        with self.assertRaises(KernelSpecError):
            convolve(DensityMatrix(np.zeros((5, 5))), build_kernel(KernelSpec("uniform", 7)))


class RenderingTests(SimpleTestCase):
    def test_all_zero_matrix(self):
        data = render_pgm(DensityMatrix(np.zeros((2, 3))))
        self.assertEqual(data, b"P5\n3 2\n255\n" + bytes(6))

    def test_single_max_cell_north_up(self):
        cells = np.zeros((2, 3))
        cells[0, 1] = 5.0
        data = render_pgm(DensityMatrix(cells))
        self.assertEqual(data[len(b"P5\n3 2\n255\n"):], bytes([0, 0, 0, 0, 255, 0]))

    def test_log_scale(self):
        cells = np.array([[0.0, 3.0, 63.0]])
        body = render_pgm(DensityMatrix(cells), scale="log")[len(b"P5\n3 1\n255\n"):]
        self.assertEqual(list(body), [0, 85, 255])

    def test_png(self):
        data = render(DensityMatrix(np.eye(4)), colormap="viridis", image_format="png")
        self.assertTrue(data.startswith(b"\x89PNG"))

    def test_dump_round_trip(self):
        m = DensityMatrix(np.random.default_rng(5).random((3, 4)))
        data = dump_density(m)
        self.assertEqual(data[:4], b"TFDM")
        self.assertEqual(len(data), 16 + 8 * 12)
        self.assertEqual(load_density_dump(data), m)

    def test_dump_bad_magic(self):
        data = b"XXXX" + dump_density(DensityMatrix(np.zeros((2, 2))))[4:]
        with self.assertRaises(GridSpecError):
            load_density_dump(data)

    def test_dump_truncated(self):
        with self.assertRaises(GridSpecError):
            load_density_dump(dump_density(DensityMatrix(np.zeros((2, 2))))[:-8])


class RenderCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.input = self.dir / "in.csv"
        with self.input.open("w", encoding="utf-8", newline="") as stream:
            write_synthetic_csv(SyntheticTraffic(n_points=2000, n_vessels=4, seed=8), stream)

    def tearDown(self):
        self.tmp.cleanup()

    def render(self, **options):
        call_command("render", str(self.input), grid="48x40", stderr=io.StringIO(), **options)

    def test_workers_give_identical_dumps(self):
        one, eight = self.dir / "one.tfdm", self.dir / "eight.tfdm"
        self.render(dump=str(one), interpolate=True, workers=1)
        self.render(dump=str(eight), interpolate=True, workers=8)
        self.assertEqual(one.read_bytes(), eight.read_bytes())

    def test_workers_give_identical_images(self):
        for suffix in ("pgm", "png"):
            one, eight = self.dir / f"one.{suffix}", self.dir / f"eight.{suffix}"
            self.render(image=str(one), interpolate=True, workers=1)
            self.render(image=str(eight), interpolate=True, workers=8)
            with self.subTest(suffix=suffix):
                self.assertEqual(one.read_bytes(), eight.read_bytes())

    def test_identity_kernel_dumps_raw_counts(self):
        dump = self.dir / "counts.tfdm"
        self.render(dump=str(dump), kernel="uniform", bandwidth=1)
        with self.input.open("rb") as stream:
            trajectories = parse_ais_csv(stream)
        grid = GridSpec.covering(trajectories.bounds, 48, 40)
        self.assertEqual(load_density_dump(dump.read_bytes()), rasterize(flatten(trajectories), grid))

    def test_every_kernel_name_accepted(self):
        for family in KERNEL_FAMILIES:
            with self.subTest(family=family):
                image = self.dir / f"{family}.pgm"
                self.render(kernel=family, bandwidth=3, image=str(image))
                self.assertTrue(image.read_bytes().startswith(b"P5\n48 40\n255\n"))

    def test_unknown_kernel_is_a_usage_error(self):
        with self.assertRaises(CommandError):
            self.render(kernel="boxcar")

    def test_even_bandwidth_is_a_usage_error(self):
        with self.assertRaises(CommandError):
            self.render(bandwidth=4)

    def test_png_output(self):
        image = self.dir / "map.png"
        self.render(image=str(image), colormap="viridis", scale="log")
        self.assertTrue(image.read_bytes().startswith(b"\x89PNG"))
