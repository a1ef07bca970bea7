import io
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.template import Context, Template
from django.test import SimpleTestCase

from compression.services import compress_set
from core.exceptions import MetricInputError
from trajectories.models import Trajectory, TrajectorySet
from trajectories.services import parse_ais_csv, write_ais_csv
from trajectories.synthetic import SyntheticTraffic, generate_trajectories, write_synthetic_csv
from .services import (
    align_to,
    compression_ratio,
    dtw_distance,
    dtw_stats,
    evaluate,
    rate_of_length_loss,
    render_report,
    render_table,
    speedup_ratio,
)


def track(points, mmsi=1, t=None):
    xy = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(xy)
    t = np.arange(n, dtype=float) if t is None else np.asarray(t, dtype=float)
    return Trajectory(mmsi, t, xy[:, 0], xy[:, 1], np.zeros(n), np.zeros(n))


def enumerate_paths(a, b):
    """Minimal squared cost over every monotone warping path, by exhaustive search.

    Partial paths already costlier than the best complete one are abandoned;
    costs are non-negative, so no cheaper completion can exist.
    """
    cost = ((np.asarray(a)[:, None, :] - np.asarray(b)[None, :, :]) ** 2).sum(axis=2).tolist()
    n, m = len(cost), len(cost[0])
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += cost[i][j]
        if acc >= best:
            return
        if i == n - 1 and j == m - 1:
            best = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best


class CompressionRatioTests(SimpleTestCase):
    def test_nothing_removed(self):
        self.assertEqual(compression_ratio(10, 10), 0.0)

    def test_quarter_kept(self):
        self.assertEqual(compression_ratio(100, 25), 0.75)

    def test_empty_input_rejected(self):
        with self.assertRaises(MetricInputError):
            compression_ratio(0, 0)

    def test_compressed_larger_than_original_rejected(self):
        with self.assertRaises(MetricInputError):
            compression_ratio(5, 6)


class RateOfLengthLossTests(SimpleTestCase):
    def test_identical_sets(self):
        s = TrajectorySet((track([(0, 0), (3, 4), (6, 0)]),))
        self.assertEqual(rate_of_length_loss(s, s), 0.0)

    def test_right_angle(self):
        originals = TrajectorySet((track([(0, 0), (1, 0), (1, 1)]),))
        compressed = TrajectorySet((track([(0, 0), (1, 1)], t=[0, 2]),))
        self.assertAlmostEqual(rate_of_length_loss(originals, compressed), 1 - math.sqrt(2) / 2, places=14)

    def test_matches_direct_summation(self):
        originals = generate_trajectories(3000, n_vessels=6, seed=3)
        compressed, _ = compress_set(originals, 4.0, backend="serial", workers=1)

        def length(traj):
            return sum(math.dist((traj.x[i], traj.y[i]), (traj.x[i + 1], traj.y[i + 1])) for i in range(len(traj) - 1))

        total = sum(length(t) for t in originals)
        expected = (total - sum(length(t) for t in compressed)) / total
        self.assertAlmostEqual(rate_of_length_loss(originals, compressed), expected, delta=1e-12)

    def test_zero_length_rejected(self):
        s = TrajectorySet((track([(1, 1)]),))
        with self.assertRaises(MetricInputError):
            rate_of_length_loss(s, s)

    def test_count_mismatch_rejected(self):
        s = TrajectorySet((track([(0, 0), (1, 0)]),))
        with self.assertRaises(MetricInputError):
            rate_of_length_loss(s, TrajectorySet())


class DtwTests(SimpleTestCase):
    def test_identical(self):
        t = track([(0, 0), (1, 2), (5, 5), (6, 1)])
        result = dtw_distance(t, t)
        self.assertEqual(result.distance, 0.0)
        self.assertEqual(result.path_length, 4)

    def test_single_cell(self):
        result = dtw_distance(track([(0, 0)]), track([(3, 4)]))
        self.assertEqual(result.distance, 5.0)
        self.assertEqual(result.path_length, 1)

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n, m = (int(v) for v in rng.integers(1, 11, size=2))
            a, b = rng.normal(size=(n, 2)), rng.normal(size=(m, 2))
            result = dtw_distance(track(a), track(b))
            self.assertAlmostEqual(result.distance, math.sqrt(enumerate_paths(a, b)), delta=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = track(rng.normal(size=(30, 2))), track(rng.normal(size=(17, 2)))
        self.assertAlmostEqual(dtw_distance(a, b).distance, dtw_distance(b, a).distance, delta=1e-12)

    def test_self_distance_and_symmetry_on_sampled_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(1_000):
            n, m = (int(v) for v in rng.integers(1, 40, size=2))
            a = track(rng.normal(scale=100.0, size=(n, 2)))
            b = track(rng.normal(scale=100.0, size=(m, 2)))
            self.assertEqual(dtw_distance(a, a).distance, 0.0)
            self.assertAlmostEqual(dtw_distance(a, b).distance, dtw_distance(b, a).distance, delta=1e-9)

    def test_path_length_bounds(self):
        rng = np.random.default_rng(2)
        for n, m in ((5, 9), (12, 3), (20, 20)):
            result = dtw_distance(track(rng.normal(size=(n, 2))), track(rng.normal(size=(m, 2))))
            self.assertGreaterEqual(result.path_length, max(n, m))
            self.assertLessEqual(result.path_length, n + m - 1)

    def test_rolling_mode_keeps_distance(self):
        rng = np.random.default_rng(3)
        a, b = track(rng.normal(size=(40, 2))), track(rng.normal(size=(25, 2)))
        full = dtw_distance(a, b)
        rolling = dtw_distance(a, b, full_matrix_limit=10)
        self.assertEqual(rolling.distance, full.distance)
        self.assertFalse(rolling.path_available)
        self.assertTrue(full.path_available)


class DtwStatsTests(SimpleTestCase):
    def test_identical_pairs(self):
        t = track([(0, 0), (2, 2)])
        self.assertEqual(dtw_stats([(t, t), (t, t)]), (0.0, 0.0))

    def test_population_spread(self):
        pairs = [(track([(0, 0)]), track([(1, 0)])), (track([(0, 0)]), track([(3, 0)]))]
        self.assertEqual(dtw_stats(pairs, workers=2), (2.0, 1.0))

    def test_matches_two_pass(self):
        rng = np.random.default_rng(4)
        pairs = [
            (track(rng.normal(size=(int(rng.integers(1, 15)), 2))), track(rng.normal(size=(int(rng.integers(1, 15)), 2))))
            for _ in range(100)
        ]
        distances = [dtw_distance(a, b).distance for a, b in pairs]
        mu = sum(distances) / len(distances)
        delta = math.sqrt(sum((d - mu) ** 2 for d in distances) / len(distances))
        got_mu, got_delta = dtw_stats(pairs, workers=4)
        self.assertAlmostEqual(got_mu, mu, delta=1e-12)
        self.assertAlmostEqual(got_delta, delta, delta=1e-12)

    def test_no_pairs_rejected(self):
        with self.assertRaises(MetricInputError):
            dtw_stats([])


class SpeedupRatioTests(SimpleTestCase):
    def test_ratios(self):
        self.assertEqual(speedup_ratio(2.5, 2.5), 1.0)
        self.assertEqual(speedup_ratio(10.0, 1.0), 10.0)

    def test_non_positive_rejected(self):
        with self.assertRaises(MetricInputError):
            speedup_ratio(0.0, 1.0)


class AlignTests(SimpleTestCase):
    def test_recut_along_original_spans(self):
        originals = TrajectorySet((
            track([(0, 0), (1, 1), (2, 0)], t=[0, 1, 2]),
            track([(5, 5), (6, 6)], t=[10_000, 10_001]),
        ))
        merged = TrajectorySet((track([(0, 0), (2, 0), (5, 5), (6, 6)], t=[0, 2, 10_000, 10_001]),))
        aligned = align_to(originals, merged)
        self.assertEqual([len(t) for t in aligned], [2, 2])
        np.testing.assert_array_equal(aligned[1].t, [10_000, 10_001])

    def test_missing_vessel_rejected(self):
        originals = TrajectorySet((track([(0, 0)], mmsi=1), track([(0, 0)], mmsi=2)))
        with self.assertRaises(MetricInputError):
            align_to(originals, TrajectorySet((track([(0, 0)], mmsi=1),)))

    def test_leftover_points_rejected(self):
        originals = TrajectorySet((track([(0, 0), (1, 1)], t=[0, 1]),))
        with self.assertRaises(MetricInputError):
            align_to(originals, TrajectorySet((track([(0, 0), (1, 1), (2, 2)], t=[0, 1, 50]),)))


class EvaluateTests(SimpleTestCase):
    def setUp(self):
        self.originals = generate_trajectories(2000, n_vessels=5, seed=6)

    def test_epsilon_zero_loses_nothing(self):
        compressed, _ = compress_set(self.originals, 0.0, workers=2)
        report = evaluate(self.originals, compressed, epsilon=0.0, workers=2)
        self.assertEqual((report.cr, report.rll, report.dtw_mean, report.dtw_std), (0.0, 0.0, 0.0, 0.0))

    def test_cr_and_rll_grow_with_epsilon(self):
        reports = []
        for eps in (0.1, 0.5, 1.0, 5.0, 10.0):
            compressed, _ = compress_set(self.originals, eps, workers=2)
            reports.append(evaluate(self.originals, compressed, epsilon=eps, workers=2))
        for before, after in zip(reports, reports[1:]):
            self.assertGreaterEqual(after.cr, before.cr)
            self.assertGreaterEqual(after.rll, before.rll - 1e-12)

    def test_report_rendering(self):
        compressed, _ = compress_set(self.originals, 5.0, workers=1)
        report = evaluate(self.originals, compressed, epsilon=5.0, timings={"speedup_ratio": 3.5})
        values = dict(line.split("=", 1) for line in render_report(report).splitlines())
        self.assertEqual(values["epsilon"], "5")
        self.assertEqual(values["trajectories"], "5")
        self.assertEqual(values["speedup_ratio"], "3.5")
        table = render_table([report]).splitlines()
        self.assertTrue(table[0].startswith("Threshold (m)"))
        self.assertTrue(table[1].startswith("5.0"))
        self.assertIn(" ± ", table[1])


class MetricFormatTests(SimpleTestCase):
    def render(self, text, **context):
        return Template("{% load metric_format %}" + text).render(Context(context))

    def test_plain(self):
        self.assertEqual(self.render("{{ v|plain }}", v=3), "3")
        self.assertEqual(self.render("{{ v|plain }}", v=0.25), "0.25")
        self.assertEqual(self.render("{{ v|plain }}", v=True), "true")
        self.assertEqual(self.render("{{ v|plain }}", v=1 / 3), "0.3333333333")

    def test_pct_and_threshold(self):
        self.assertEqual(self.render("{{ v|pct }}", v=0.75), "75.000")
        self.assertEqual(self.render("{{ v|threshold }}", v=0.1), "0.1")

    def test_mu_delta(self):
        self.assertEqual(self.render("{% mu_delta 1.23456 0.5 %}"), "1.2346 ± 0.5000")
        self.assertEqual(self.render("{% mu_delta 1.23456 0.5 2 %}"), "1.23 ± 0.50")


class MetricsCommandsTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.original = self.dir / "original.csv"
        with self.original.open("w", encoding="utf-8", newline="") as stream:
            write_synthetic_csv(SyntheticTraffic(n_points=1500, n_vessels=4, seed=12), stream)

    def tearDown(self):
        self.tmp.cleanup()

    def key_values(self, text):
        return dict(line.split("=", 1) for line in text.splitlines())

    def test_identical_files_give_zeros(self):
        out = io.StringIO()
        call_command("metrics", str(self.original), str(self.original), stdout=out, stderr=io.StringIO())
        values = self.key_values(out.getvalue())
        self.assertEqual(values["cr"], "0")
        self.assertEqual(values["rll"], "0")
        self.assertEqual(values["dtw_mean"], "0")
        self.assertEqual(values["trajectories"], "4")

    def test_compressed_file(self):
        compressed = self.dir / "compressed.csv"
        call_command(
            "compress", str(self.original), str(compressed), epsilon=5.0,
            report=str(self.dir / "report.txt"), stderr=io.StringIO(),
        )
        out = io.StringIO()
        call_command("metrics", str(self.original), str(compressed), epsilon=5.0, stdout=out, stderr=io.StringIO())
        values = self.key_values(out.getvalue())
        self.assertGreater(float(values["cr"]), 0.0)
        self.assertGreater(float(values["dtw_mean"]), 0.0)

    def test_missing_vessel_is_an_error(self):
        with self.original.open("rb") as stream:
            originals = parse_ais_csv(stream)
        partial = self.dir / "partial.csv"
        with partial.open("w", encoding="utf-8", newline="") as stream:
            write_ais_csv(TrajectorySet(originals.trajectories[:-1]), stream)
        with self.assertRaises(CommandError):
            call_command("metrics", str(self.original), str(partial), stdout=io.StringIO(), stderr=io.StringIO())

    def test_table_layout(self):
        out = io.StringIO()
        call_command("metrics", str(self.original), str(self.original), table=True, stdout=out, stderr=io.StringIO())
        self.assertTrue(out.getvalue().startswith("Threshold (m)"))

    def test_bench_compress(self):
        out = io.StringIO()
        call_command("bench", synthetic=1000, vessels=3, runs=2, workers=2, stdout=out, stderr=io.StringIO())
        frame = pd.read_csv(io.StringIO(out.getvalue()))
        runs = frame[frame["run"].isin(["1", "2"])]
        self.assertEqual(sorted(runs["backend"].value_counts().to_dict().items()), [("parallel", 2), ("serial", 2)])
        self.assertEqual(frame.iloc[-1]["backend"], "speedup_ratio")
        self.assertGreater(frame.iloc[-1]["seconds"], 0.0)

    def test_bench_density(self):
        output = self.dir / "bench.csv"
        call_command(
            "bench", str(self.original), stage="density", runs=1, grid="32x32", bandwidth=3,
            output=str(output), stderr=io.StringIO(),
        )
        frame = pd.read_csv(output)
        self.assertEqual(
            list(frame["backend"]),
            ["serial", "parallel", "ndimage", "serial", "parallel", "ndimage", "speedup_ratio"],
        )
        runs = frame[frame["run"] == "1"]
        self.assertTrue((runs["seconds"] >= runs["staging_seconds"]).all())
        self.assertTrue((runs["staging_seconds"] > 0).all())
        self.assertEqual(set(runs["epsilon"]), {1.0})
        self.assertFalse(runs["interpolate"].any())

    def test_bench_density_follows_threshold_and_interpolation(self):
        def bench(**options):
            out = io.StringIO()
            call_command(
                "bench", str(self.original), stage="density", runs=1, grid="64x64", bandwidth=3,
                stdout=out, stderr=io.StringIO(), **options,
            )
            frame = pd.read_csv(io.StringIO(out.getvalue()))
            return frame[frame["run"] == "1"]

        plain = bench(epsilons=[0.0, 50.0])
        self.assertEqual(list(plain["epsilon"].drop_duplicates()), [0.0, 50.0])
        points = plain.groupby("epsilon")["points"].first()
        with self.original.open("rb") as stream:
            self.assertLessEqual(points[0.0], parse_ais_csv(stream).total_points)
        self.assertLess(points[50.0], points[0.0])

        filled = bench(epsilons=[50.0], interpolate=True)
        self.assertTrue(filled["interpolate"].all())
        self.assertEqual(set(filled["points"]), {points[50.0]})

    def test_bench_rejects_negative_threshold_list(self):
        with self.assertRaises(CommandError):
            call_command("bench", str(self.original), "--epsilons", "1,-2", stdout=io.StringIO(), stderr=io.StringIO())

    def test_bench_needs_input(self):
        with self.assertRaises(CommandError):
            call_command("bench", runs=1, stdout=io.StringIO(), stderr=io.StringIO())

    def test_sweep(self):
        out = io.StringIO()
        table = self.dir / "sweep.csv"
        call_command(
            "sweep", str(self.original), epsilons=[0.0, 1.0, 10.0], csv=str(table), workers=2,
            stdout=out, stderr=io.StringIO(),
        )
        lines = out.getvalue().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[1].startswith("0.0"))
        frame = pd.read_csv(table)
        self.assertEqual(list(frame["epsilon"]), [0.0, 1.0, 10.0])
        self.assertEqual(frame["cr"].iloc[0], 0.0)
        self.assertTrue((frame["speedup_ratio"] > 0).all())
