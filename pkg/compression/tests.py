import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.test import SimpleTestCase

from core.workers import WorkerPool
from geo.models import CartesianPoint
from primitives.models import Block
from trajectories.models import Trajectory, TrajectorySet
from trajectories.services import flatten, parse_ais_csv, unflatten
from trajectories.synthetic import SyntheticTraffic, write_synthetic_csv
from .models import CompressionThreshold
from .parallel import dp_compress_parallel, init_state, iterate, parallel_retained_indices
from .services import compress_set, dp_compress, dp_retained_indices, ved


def make_traj(xs, ys, mmsi=1):
    n = len(xs)
    return Trajectory(mmsi, np.arange(n, dtype=float), xs, ys, np.zeros(n), np.zeros(n))


def random_walks(seed, count, max_len=60, step=5.0, min_len=1):
    rng = np.random.default_rng(seed)
    trajectories = []
    for k in range(count):
        n = int(rng.integers(min_len, max_len + 1))
        xy = np.cumsum(rng.normal(0.0, step, size=(n, 2)), axis=0)
        trajectories.append(make_traj(xy[:, 0], xy[:, 1], mmsi=k))
    return TrajectorySet(tuple(trajectories))


def recursive_dp(points, eps):
    """Textbook recursive Douglas-Peucker over (x, y) tuples; returns kept indices."""
    def distance(p, s, e):
        dx, dy = e[0] - s[0], e[1] - s[1]
        base = math.sqrt(dx * dx + dy * dy)
        if base == 0:
            rx, ry = p[0] - s[0], p[1] - s[1]
            return math.sqrt(rx * rx + ry * ry)
        return abs((p[0] - s[0]) * dy - (p[1] - s[1]) * dx) / base

    def split(s, e):
        best, where = -1.0, None
        for i in range(s + 1, e):
            dist = distance(points[i], points[s], points[e])
            if dist > best:
                best, where = dist, i
        if where is None or best <= eps:
            return []
        return split(s, where) + [where] + split(where, e)

    if len(points) <= 2:
        return list(range(len(points)))
    return [0] + split(0, len(points) - 1) + [len(points) - 1]


class VedTests(SimpleTestCase):
    def test_point_on_chord(self):
        self.assertEqual(ved(CartesianPoint(1, 1), CartesianPoint(0, 0), CartesianPoint(2, 2)), 0.0)

    def test_axis_aligned(self):
        self.assertEqual(ved(CartesianPoint(0, 1), CartesianPoint(0, 0), CartesianPoint(2, 0)), 1.0)

    def test_degenerate_chord(self):
        self.assertEqual(ved(CartesianPoint(3, 4), CartesianPoint(0, 0), CartesianPoint(0, 0)), 5.0)

    def test_matches_shoelace_area(self):
        rng = np.random.default_rng(0)
        for p, s, e in rng.uniform(-1e5, 1e5, size=(500, 3, 2)):
            area = abs((s[0] * (e[1] - p[1]) + e[0] * (p[1] - s[1]) + p[0] * (s[1] - e[1])) / 2)
            expected = 2 * area / math.hypot(e[0] - s[0], e[1] - s[1])
            got = ved(CartesianPoint(*p), CartesianPoint(*s), CartesianPoint(*e))
            self.assertLessEqual(abs(got - expected), 1e-12 * max(expected, 1e-300) + 1e-9)


class SerialCompressionTests(SimpleTestCase):
    def test_two_points_unchanged(self):
        traj = make_traj([0.0, 10.0], [0.0, 3.0])
        self.assertEqual(dp_compress(traj, 100.0), traj)

    def test_single_point_unchanged(self):
        traj = make_traj([1.0], [2.0])
        self.assertEqual(dp_compress(traj, 1.0), traj)

    def test_collinear_points_reduce_to_endpoints(self):
        traj = make_traj([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(dp_retained_indices(traj.x, traj.y, 0.5), [0, 4])

    def test_zigzag_matches_recursive_oracle(self):
        rng = np.random.default_rng(1)
        xs = np.arange(14, dtype=float) * 10.0
        ys = np.where(np.arange(14) % 2 == 0, 0.0, 1.0) * rng.uniform(1.0, 30.0, size=14)
        points = list(zip(xs, ys))
        for eps in (0.0, 0.5, 2.0, 5.0, 10.0, 20.0, 40.0):
            with self.subTest(eps=eps):
                np.testing.assert_array_equal(dp_retained_indices(xs, ys, eps), recursive_dp(points, eps))

    def test_random_walks_match_recursive_oracle(self):
        for traj in random_walks(2, 50):
            points = list(zip(traj.x, traj.y))
            for eps in (0.1, 1.0, 10.0):
                np.testing.assert_array_equal(dp_retained_indices(traj.x, traj.y, eps), recursive_dp(points, eps))

    def test_epsilon_zero_keeps_every_turning_point(self):
        traj = random_walks(3, 1, max_len=200)[0]
        kept = dp_retained_indices(traj.x, traj.y, 0.0)
        self.assertEqual(len(kept), len(traj))

    def test_larger_epsilon_keeps_a_subset(self):
        for traj in random_walks(4, 30):
            previous = set(range(len(traj)))
            for eps in (0.0, 0.5, 2.0, 8.0, 32.0):
                kept = set(dp_retained_indices(traj.x, traj.y, eps).tolist())
                self.assertTrue(kept <= previous)
                previous = kept

    def test_idempotent(self):
        for traj in random_walks(5, 30):
            once = dp_compress(traj, 3.0)
            self.assertEqual(dp_compress(once, 3.0), once)

    def test_negative_epsilon_rejected(self):
        with self.assertRaises(ValueError):
            CompressionThreshold(-1.0)


class ParallelStateTests(SimpleTestCase):
    def test_length_two_has_nothing_to_split(self):
        state = init_state(make_traj([0.0, 1.0], [0.0, 1.0]))
        np.testing.assert_array_equal(state.kept, [0, 1])
        state, done = iterate(state, 0.0, workers=1, block=Block(4, 4))
        self.assertTrue(done)
        self.assertEqual(state.rounds, 0)

    def test_length_one_builds_no_state(self):
        self.assertIsNone(init_state(make_traj([0.0], [0.0])))

    def test_initial_labels_of_fourteen_points(self):
        rng = np.random.default_rng(6)
        state = init_state(make_traj(rng.random(14), rng.random(14)))
        np.testing.assert_array_equal(state.lp, [1] * 13 + [2])
        np.testing.assert_array_equal(state.kept, [0, 13])

    def test_initial_labels_of_a_merged_batch(self):
        store = flatten(TrajectorySet((make_traj([0.0, 1, 2], [0.0, 1, 0]), make_traj([5.0], [5.0], mmsi=2), make_traj([0.0, 1], [0.0, 1], mmsi=3))))
        state = init_state(store)
        np.testing.assert_array_equal(state.kept, [0, 2, 3, 4, 5])
        np.testing.assert_array_equal(state.lp, [1, 1, 2, 3, 4, 5])

    def test_everything_within_epsilon_stops_in_round_one(self):
        state = init_state(make_traj([0.0, 1.0, 2.0, 3.0], [0.0, 0.1, -0.1, 0.0]))
        state, done = iterate(state, 1.0, workers=1, block=Block(4, 4))
        self.assertTrue(done)
        np.testing.assert_array_equal(state.kept, [0, 3])

    def test_labels_stay_consistent_every_round(self):
        xy = np.cumsum(np.random.default_rng(7).normal(0.0, 5.0, size=(300, 2)), axis=0)
        traj = make_traj(xy[:, 0], xy[:, 1])
        state = init_state(traj)
        done = False
        while not done:
            state, done = iterate(state, 0.5, workers=2, block=Block(4, 4))
            self.assertTrue(np.all(np.diff(state.lp) >= 0))
            np.testing.assert_array_equal(state.lp[state.kept], np.arange(1, state.n_kept + 1))
        np.testing.assert_array_equal(state.kept, dp_retained_indices(traj.x, traj.y, 0.5))


class ParallelCompressionTests(SimpleTestCase):
    def test_length_two_store_unchanged(self):
        trajectories = TrajectorySet(tuple(make_traj([0.0, k], [k, 0.0], mmsi=k) for k in range(1, 5)))
        store = flatten(trajectories)
        out, _ = dp_compress_parallel(store, 1.0, workers=2, block=Block(4, 4))
        self.assertEqual(unflatten(out), trajectories)

    def test_collinear_trajectories_reduce_to_endpoints(self):
        trajectories = TrajectorySet(tuple(
            make_traj(np.arange(6, dtype=float) * k, np.arange(6, dtype=float), mmsi=k) for k in range(1, 4)
        ))
        out, report = dp_compress_parallel(flatten(trajectories), 0.1, workers=2, block=Block(4, 2))
        np.testing.assert_array_equal(out.t_len, [2, 2, 2])
        np.testing.assert_array_equal(out.t, [0, 5, 0, 5, 0, 5])
        np.testing.assert_array_equal(report.iterations, [0, 0, 0])

    def test_matches_serial_over_random_sets(self):
        trajectories = random_walks(8, 1000)
        store = flatten(trajectories)
        with WorkerPool(4) as pool:
            for eps in (0.1, 0.5, 1.0, 5.0, 10.0):
                expected, serial = compress_set(trajectories, eps, backend="serial", workers=1)
                out, report = dp_compress_parallel(store, eps, pool, block=Block(8, 8))
                with self.subTest(eps=eps):
                    self.assertEqual(unflatten(out), expected)
                    np.testing.assert_array_equal(report.iterations, serial.iterations)

    def test_block_shapes_workers_and_batches(self):
        trajectories = random_walks(9, 200, max_len=120)
        expected, _ = compress_set(trajectories, 2.0, backend="serial", workers=1)
        store = flatten(trajectories)
        for block in (Block(2, 1), Block(4, 4), Block(5, 3), Block(32, 32)):
            for workers in (1, 3, 8):
                for batch_points in (None, 150):
                    with self.subTest(capacity=block.capacity, workers=workers, batch_points=batch_points):
                        retained, _ = parallel_retained_indices(
                            store, 2.0, workers=workers, block=block, batch_points=batch_points,
                        )
                        self.assertEqual([len(r) for r in retained], [len(t) for t in expected])
                        got = TrajectorySet(tuple(t.take(r) for t, r in zip(trajectories, retained)))
                        self.assertEqual(got, expected)

    def test_long_skewed_trajectories_over_every_configuration(self):
        trajectories = random_walks(21, 24, max_len=2000, min_len=2)
        store = flatten(trajectories)
        for eps in (0.0, 0.1, 0.5, 1.0, 5.0, 10.0):
            expected, serial = compress_set(trajectories, eps, backend="serial", workers=1)
            for block in (Block(32, 32), Block(5, 3)):
                for workers in (1, 2, 8):
                    for batch_points in (None, 2500):
                        with self.subTest(eps=eps, width=block.width, workers=workers, batch_points=batch_points):
                            out, report = dp_compress_parallel(
                                store, eps, workers, block=block, batch_points=batch_points,
                            )
                            self.assertEqual(unflatten(out), expected)
                            np.testing.assert_array_equal(report.iterations, serial.iterations)

    def test_report_counts(self):
        trajectories = random_walks(10, 40)
        _, report = compress_set(trajectories, 1.0, backend="parallel", workers=2, block=Block(4, 4))
        self.assertEqual(report.total_original, trajectories.total_points)
        self.assertTrue(np.all(report.n_compressed <= report.n_original))
        self.assertTrue(np.all(report.n_compressed >= np.minimum(report.n_original, 2)))
        self.assertGreaterEqual(report.total_seconds, report.compute_seconds)
        self.assertEqual(report.as_dict()["trajectories"], 40)

    def test_unknown_backend_rejected(self):
        with self.assertRaises(ValueError):
            compress_set(TrajectorySet(), 1.0, backend="gpu")

    def test_empty_set(self):
        out, report = compress_set(TrajectorySet(), 1.0, backend="parallel", workers=2)
        self.assertEqual(len(out), 0)
        self.assertEqual(report.compression_ratio, 0.0)


class CompressCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.input = self.dir / "in.csv"
        with self.input.open("w", encoding="utf-8", newline="") as stream:
            write_synthetic_csv(SyntheticTraffic(n_points=3000, n_vessels=5, seed=4), stream)

    def tearDown(self):
        self.tmp.cleanup()

    def compress(self, output, **options):
        out = io.StringIO()
        call_command("compress", str(self.input), str(output), stdout=out, stderr=io.StringIO(), **options)
        return out.getvalue()

    def test_backends_write_identical_files(self):
        serial, parallel = self.dir / "serial.csv", self.dir / "parallel.csv"
        self.compress(serial, epsilon=5.0, backend="serial", workers=1)
        self.compress(parallel, epsilon=5.0, backend="parallel", workers=4)
        self.assertEqual(serial.read_bytes(), parallel.read_bytes())

    def test_report_lines(self):
        text = self.compress(self.dir / "out.csv", epsilon=5.0, workers=2)
        values = dict(line.split("=", 1) for line in text.splitlines())
        self.assertEqual(values["backend"], "parallel")
        self.assertEqual(values["points_original"], "3000")
        self.assertLess(int(values["points_compressed"]), 3000)

    def test_epsilon_zero_keeps_noisy_points(self):
        output = self.dir / "out.csv"
        self.compress(output, epsilon=0.0, report=str(self.dir / "report.txt"))
        with output.open("rb") as stream:
            self.assertEqual(parse_ais_csv(stream).total_points, 3000)

    def test_empty_input_gives_empty_output(self):
        self.input.write_text("mmsi,timestamp,lon,lat\n", encoding="utf-8")
        output = self.dir / "out.csv"
        self.compress(output, epsilon=1.0)
        self.assertEqual(output.read_text(encoding="utf-8"), "mmsi,timestamp,lon,lat\n")
