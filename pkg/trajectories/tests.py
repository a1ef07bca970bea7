#
# trajectories/tests.py
#
import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.test import SimpleTestCase

from core.exceptions import CsvFormatError, EmptyTrajectorySetError, InvariantViolation
from geo.models import WGS84
from geo.services import project_arrays
from primitives.services import exclusive_scan_parallel
from primitives.models import Block
from .models import FlatTrajectoryStore, Trajectory, TrajectorySet
from .services import bounds, flatten, parse_ais_csv, subset, unflatten, write_ais_csv
from .synthetic import SyntheticTraffic, generate_ais_frame, generate_trajectories


def make_traj(xs, ys, mmsi=1, t0=0.0):
    xs = np.asarray(xs, dtype=float)
    return Trajectory(mmsi, t0 + np.arange(len(xs), dtype=float), xs, np.asarray(ys, dtype=float), np.zeros(len(xs)), np.zeros(len(xs)))


def csv_bytes(*rows, header="mmsi,timestamp,lon,lat"):
    return io.BytesIO(("\n".join((header,) + rows) + "\n").encode("utf-8"))


class TrajectoryModelTests(SimpleTestCase):
    def test_timestamps_must_ascend(self):
        with self.assertRaises(InvariantViolation):
            Trajectory(1, [0.0, 0.0], [0, 1], [0, 1], [0, 0], [0, 0])

    def test_needs_a_point(self):
        with self.assertRaises(InvariantViolation):
            Trajectory(1, [], [], [], [], [])

    def test_take_and_point_view(self):
        traj = make_traj([0, 1, 2, 3], [5, 6, 7, 8])
        part = traj.take([0, 3])
        self.assertEqual(len(part), 2)
        self.assertEqual(part.point(1).pos.x, 3.0)
        self.assertEqual(part.point(1).t, 3.0)

    def test_points_in_time_order(self):
        traj = make_traj([0, 1, 2], [5, 6, 7])
        points = traj.points
        self.assertEqual([p.t for p in points], [0.0, 1.0, 2.0])
        self.assertEqual([(p.pos.x, p.pos.y) for p in points], [(0.0, 5.0), (1.0, 6.0), (2.0, 7.0)])
        self.assertEqual(points[2], traj.point(2))

    def test_columns_are_read_only(self):
        traj = make_traj([0, 1], [0, 1])
        with self.assertRaises(ValueError):
            traj.x[0] = 5.0


class ParseAisCsvTests(SimpleTestCase):
    def test_rows_sorted_by_timestamp(self):
        result = parse_ais_csv(csv_bytes("1,30,121.2,31.0", "1,10,121.0,31.0", "1,20,121.1,31.0"))
        self.assertEqual(len(result), 1)
        np.testing.assert_array_equal(result[0].t, [10, 20, 30])
        self.assertTrue(np.all(np.diff(result[0].x) > 0))

    def test_identical_rows_kept_once(self):
        result = parse_ais_csv(csv_bytes("7,10,121.0,31.0", "7,10,121.0,31.0"))
        self.assertEqual(result.total_points, 1)

    def test_grouped_by_mmsi(self):
        result = parse_ais_csv(csv_bytes("2,10,121.0,31.0", "1,10,121.0,31.0", "2,20,121.1,31.0"))
        self.assertEqual([t.mmsi for t in result], [1, 2])
        self.assertEqual([len(t) for t in result], [1, 2])

    def test_long_gap_opens_new_trajectory(self):
        result = parse_ais_csv(csv_bytes("1,0,121.0,31.0", "1,60,121.1,31.0", "1,7260,121.2,31.0"), gap_seconds=3600)
        self.assertEqual([len(t) for t in result], [2, 1])

    def test_projection_applied(self):
        result = parse_ais_csv(csv_bytes("1,0,121.9842,31.1166"), ell=WGS84)
        x, y = project_arrays(np.radians([121.9842]), np.radians([31.1166]), WGS84)
        self.assertEqual(result[0].x[0], x[0])
        self.assertEqual(result[0].y[0], y[0])
        self.assertAlmostEqual(result[0].lat[0], math.radians(31.1166), places=15)

    def test_malformed_value_reports_line(self):
        with self.assertRaises(CsvFormatError) as ctx:
            parse_ais_csv(csv_bytes("1,10,121.0,31.0", "1,abc,121.0,31.0"))
        self.assertEqual(ctx.exception.line_number, 3)

    def test_missing_field_reports_line(self):
        with self.assertRaises(CsvFormatError) as ctx:
            parse_ais_csv(csv_bytes("1,10,121.0,31.0", "1,20,121.0,31.0", "1,30,121.0"))
        self.assertEqual(ctx.exception.line_number, 4)

    def test_extra_field_rejected(self):
        with self.assertRaises(CsvFormatError):
            parse_ais_csv(csv_bytes("1,10,121.0,31.0", "1,20,121.0,31.0,9"))

    def test_out_of_range_latitude_reports_line(self):
        with self.assertRaises(CsvFormatError) as ctx:
            parse_ais_csv(csv_bytes("1,10,121.0,31.0", "1,20,121.0,95.0"))
        self.assertEqual(ctx.exception.line_number, 3)

    def test_near_pole_latitude_reports_line(self):
        for lat in ("89.95", "-89.95", "89.99"):
            with self.subTest(lat=lat), self.assertRaises(CsvFormatError) as ctx:
                parse_ais_csv(csv_bytes("1,10,121.0,31.0", "1,20,121.0,32.0", f"1,30,121.0,{lat}"))
            self.assertEqual(ctx.exception.line_number, 4)

    def test_latitude_limit_accepted(self):
        result = parse_ais_csv(csv_bytes("1,10,121.0,89.9", "1,20,121.0,-89.9"))
        self.assertEqual(result.total_points, 2)
        self.assertTrue(np.all(np.isfinite(result[0].y)))

    def test_out_of_range_longitude_rejected(self):
        with self.assertRaises(CsvFormatError) as ctx:
            parse_ais_csv(csv_bytes("1,10,181.0,31.0"))
        self.assertEqual(ctx.exception.line_number, 2)

    def test_wrong_header_rejected(self):
        with self.assertRaises(CsvFormatError) as ctx:
            parse_ais_csv(csv_bytes("1,10,121.0,31.0", header="id,time,x,y"))
        self.assertEqual(ctx.exception.line_number, 1)

    def test_empty_file_gives_empty_set(self):
        self.assertEqual(len(parse_ais_csv(io.BytesIO(b""))), 0)

    def test_header_only_gives_empty_set(self):
        self.assertEqual(len(parse_ais_csv(io.BytesIO(b"mmsi,timestamp,lon,lat\n"))), 0)

    def test_crlf_line_endings_accepted(self):
        data = b"mmsi,timestamp,lon,lat\r\n1,10,121.0,31.0\r\n1,20,121.1,31.0\r\n"
        self.assertEqual(parse_ais_csv(io.BytesIO(data)).total_points, 2)

    def test_synthetic_rows_over_seven_vessels(self):
        traffic = SyntheticTraffic(n_points=9_900, n_vessels=7, seed=11, duplicate_fraction=0.01)
        frame = generate_ais_frame(traffic)
        self.assertEqual(len(frame), 9_900 + 99)
        stream = io.StringIO()
        frame.to_csv(stream, index=False, float_format="%.10f", lineterminator="\n")
        result = parse_ais_csv(io.StringIO(stream.getvalue()))
        self.assertEqual(len(result), 7)
        self.assertEqual(result.total_points, 9_900)


class FlattenTests(SimpleTestCase):
    def test_single_trajectory(self):
        store = flatten(TrajectorySet((make_traj(range(5), range(5)),)))
        np.testing.assert_array_equal(store.t_len, [5])
        np.testing.assert_array_equal(store.offsets, [0])

    def test_offsets_are_prefix_sums(self):
        store = flatten(TrajectorySet((make_traj(range(3), range(3)), make_traj(range(4), range(4), mmsi=2))))
        np.testing.assert_array_equal(store.offsets, [0, 3])
        self.assertEqual(store.total_points, 7)
        np.testing.assert_array_equal(store.x, [0, 1, 2, 0, 1, 2, 3])
        np.testing.assert_array_equal(store.trajectory_labels(), [0, 0, 0, 1, 1, 1, 1])

    def test_round_trip_on_random_sets(self):
        rng = np.random.default_rng(3)
        trajectories = []
        for k in range(1000):
            n = int(rng.integers(1, 20))
            trajectories.append(make_traj(rng.normal(size=n), rng.normal(size=n), mmsi=k, t0=float(k)))
        original = TrajectorySet(tuple(trajectories))
        store = flatten(original)
        self.assertEqual(unflatten(store), original)
        np.testing.assert_array_equal(store.offsets, exclusive_scan_parallel(store.t_len, Block(4, 2), workers=3))

    def test_inconsistent_store_rejected(self):
        with self.assertRaises(InvariantViolation):
            FlatTrajectoryStore(
                t=np.arange(4.0), x=np.zeros(4), y=np.zeros(4), lon=np.zeros(4), lat=np.zeros(4),
                t_len=np.array([2, 2]), offsets=np.array([0, 1]), mmsi_index=np.array([1, 2]),
            )

    def test_empty_set(self):
        store = flatten(TrajectorySet())
        self.assertEqual(len(store), 0)
        self.assertEqual(len(unflatten(store)), 0)


class BoundsTests(SimpleTestCase):
    def test_single_point(self):
        self.assertEqual(bounds(TrajectorySet((make_traj([3.0], [4.0]),))), (3.0, 3.0, 4.0, 4.0))

    def test_two_points(self):
        s = TrajectorySet((make_traj([3.0], [-1.0]), make_traj([-2.0], [4.0], mmsi=2)))
        self.assertEqual(bounds(s), (-2.0, 3.0, -1.0, 4.0))

    def test_matches_linear_scan(self):
        s = generate_trajectories(100_000, n_vessels=20, seed=5)
        xs = np.concatenate([t.x for t in s])
        ys = np.concatenate([t.y for t in s])
        self.assertEqual(bounds(s), (xs.min(), xs.max(), ys.min(), ys.max()))

    def test_empty_set_rejected(self):
        with self.assertRaises(EmptyTrajectorySetError):
            bounds(TrajectorySet())


class WriteAisCsvTests(SimpleTestCase):
    def test_fixed_format(self):
        stream = io.StringIO()
        write_ais_csv(parse_ais_csv(csv_bytes("412000001,10,121.5,31.25")), stream)
        self.assertEqual(stream.getvalue(), "mmsi,timestamp,lon,lat\n412000001,10,121.5000000000,31.2500000000\n")

    def test_empty_set_writes_header(self):
        stream = io.StringIO()
        write_ais_csv(TrajectorySet(), stream)
        self.assertEqual(stream.getvalue(), "mmsi,timestamp,lon,lat\n")

    def test_written_file_parses_back(self):
        original = generate_trajectories(500, n_vessels=3, seed=2)
        stream = io.StringIO()
        write_ais_csv(original, stream)
        again = parse_ais_csv(io.StringIO(stream.getvalue()))
        self.assertEqual(len(again), len(original))
        for a, b in zip(original, again):
            np.testing.assert_array_equal(a.t, b.t)
            np.testing.assert_allclose(a.x, b.x, atol=1e-3)


class SubsetTests(SimpleTestCase):
    def test_keeps_given_indices(self):
        s = TrajectorySet((make_traj(range(5), range(5)), make_traj(range(3), range(3), mmsi=2)))
        kept = subset(s, [np.array([0, 2, 4]), np.array([0, 2])])
        np.testing.assert_array_equal(kept[0].x, [0, 2, 4])
        np.testing.assert_array_equal(kept[1].t, [0, 2])

    def test_count_mismatch_rejected(self):
        with self.assertRaises(ValueError):
            subset(TrajectorySet((make_traj([0], [0]),)), [])


class SynthesizeCommandTests(SimpleTestCase):
    def test_same_seed_same_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp) / "a.csv", Path(tmp) / "b.csv"
            for path in (a, b):
                call_command("synthesize", str(path), points=300, vessels=4, seed=9, stderr=io.StringIO())
            self.assertEqual(a.read_bytes(), b.read_bytes())
            with a.open("rb") as stream:
                result = parse_ais_csv(stream)
            self.assertEqual(len(result), 4)
            self.assertEqual(result.total_points, 300)

    def test_sampling_intervals_within_ais_range(self):
        s = generate_trajectories(2_000, n_vessels=2, seed=1)
        for traj in s:
            dt = np.diff(traj.t)
            self.assertTrue(np.all((dt >= 2) & (dt <= 180)))
