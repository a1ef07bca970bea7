import numpy as np
from django.test import SimpleTestCase, override_settings

from core.workers import WorkerPool
from .models import Block
from .services import (
    exclusive_scan_parallel,
    exclusive_scan_serial,
    segmented_max_scan_parallel,
    segmented_max_scan_serial,
)


def fold_scan(values):
    out, total = [], 0
    for v in values:
        out.append(total)
        total += int(v)
    return out


def brute_segmented_max(d, lp):
    d_max, i_max = [], []
    for i in range(len(d)):
        start = i
        while start > 0 and lp[start - 1] == lp[i]:
            start -= 1
        seg = list(d[start:i + 1])
        best = max(seg)
        d_max.append(best)
        i_max.append(start + seg.index(best))
    return np.array(d_max), np.array(i_max)


def random_labels(rng, n, mean_len):
    starts = rng.random(n) < 1.0 / mean_len
    starts[0] = False
    return np.cumsum(starts) + 1


class ExclusiveScanTests(SimpleTestCase):
    def test_empty(self):
        self.assertEqual(len(exclusive_scan_serial([])), 0)
        self.assertEqual(len(exclusive_scan_parallel([], Block(4, 4), workers=2)), 0)

    def test_definition(self):
        np.testing.assert_array_equal(exclusive_scan_serial([1, 1, 0, 1]), [0, 1, 2, 2])
        np.testing.assert_array_equal(exclusive_scan_parallel([1, 1, 0, 1], Block(2, 1), workers=2), [0, 1, 2, 2])

    def test_serial_matches_fold(self):
        values = np.random.default_rng(0).integers(0, 1000, size=100_000)
        np.testing.assert_array_equal(exclusive_scan_serial(values), fold_scan(values))

    def test_counting(self):
        np.testing.assert_array_equal(exclusive_scan_parallel(np.ones(1000, dtype=int), Block(8, 8), workers=4), np.arange(1000))

    def test_single_block_equals_serial(self):
        values = np.random.default_rng(1).integers(0, 50, size=300)
        np.testing.assert_array_equal(exclusive_scan_parallel(values, Block(32, 32), workers=1), exclusive_scan_serial(values))

    def test_block_shapes_and_workers(self):
        values = np.random.default_rng(2).integers(0, 2**20, size=1_000_000)
        expected = exclusive_scan_serial(values)
        for block in (Block(8, 8), Block(16, 16), Block(32, 32)):
            for workers in (1, 2, 8):
                with self.subTest(capacity=block.capacity, workers=workers):
                    np.testing.assert_array_equal(exclusive_scan_parallel(values, block, workers), expected)

    def test_non_power_of_two_block_and_recursion(self):
        # 3 x 1 blocks over 100 elements: the block totals span several blocks themselves
        values = np.random.default_rng(3).integers(0, 10, size=100)
        np.testing.assert_array_equal(exclusive_scan_parallel(values, Block(3, 1), workers=3), exclusive_scan_serial(values))

    def test_64_bit_accumulator(self):
        values = np.full(10, 2**40, dtype=np.int64)
        self.assertEqual(exclusive_scan_parallel(values, Block(2, 2), workers=2)[-1], 9 * 2**40)

    def test_shared_pool(self):
        values = np.arange(5000)
        with WorkerPool(4) as pool:
            np.testing.assert_array_equal(exclusive_scan_parallel(values, Block(8, 4), pool), exclusive_scan_serial(values))

    def test_capacity_one_rejected(self):
        with self.assertRaises(ValueError):
            exclusive_scan_parallel([1, 2, 3], Block(1, 1))

    @override_settings(TRAJFORGE_BLOCK_WIDTH=4, TRAJFORGE_BLOCK_HEIGHT=2)
    def test_block_from_settings(self):
        self.assertEqual(Block.from_settings().capacity, 8)
        np.testing.assert_array_equal(exclusive_scan_parallel(np.ones(20, dtype=int), workers=1), np.arange(20))


class SegmentedMaxScanSerialTests(SimpleTestCase):
    def test_single_segment(self):
        result = segmented_max_scan_serial([3, 1, 2], [1, 1, 1])
        np.testing.assert_array_equal(result.d_max, [3, 3, 3])
        np.testing.assert_array_equal(result.i_max, [0, 0, 0])

    def test_reset_per_segment(self):
        result = segmented_max_scan_serial([1, 5, 2, 4], [1, 1, 2, 2])
        np.testing.assert_array_equal(result.d_max, [1, 5, 2, 4])
        np.testing.assert_array_equal(result.i_max, [0, 1, 2, 3])

    def test_ties_keep_earliest(self):
        result = segmented_max_scan_serial([2, 2, 1, 2], [1, 1, 1, 1])
        np.testing.assert_array_equal(result.i_max, [0, 0, 0, 0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        d = rng.integers(0, 20, size=2000).astype(float)
        lp = random_labels(rng, 2000, 15)
        expected_max, expected_idx = brute_segmented_max(d, lp)
        result = segmented_max_scan_serial(d, lp)
        np.testing.assert_array_equal(result.d_max, expected_max)
        np.testing.assert_array_equal(result.i_max, expected_idx)

    def test_length_mismatch_rejected(self):
        with self.assertRaises(ValueError):
            segmented_max_scan_serial([1.0, 2.0], [1])

    def test_decreasing_labels_rejected(self):
        with self.assertRaises(ValueError):
            segmented_max_scan_serial([1.0, 2.0], [2, 1])


class SegmentedMaxScanParallelTests(SimpleTestCase):
    def assertMatchesSerial(self, d, lp, block, workers):
        self.assertEqual(segmented_max_scan_parallel(d, lp, block, workers), segmented_max_scan_serial(d, lp))

    def test_short_segment(self):
        self.assertMatchesSerial([0.5, 3.0, 1.0], [1, 1, 1], Block(8, 4), 1)

    def test_segment_spanning_rows(self):
        # W = 4: the maximum sits in row 0 and must reach the rest of the segment in rows 1 and 2
        d = [0, 9, 1, 2, 3, 4, 5, 6, 7, 8, 0, 1]
        lp = [1] * 10 + [2, 2]
        result = segmented_max_scan_parallel(d, lp, Block(4, 4), 2)
        np.testing.assert_array_equal(result.d_max[:10], [0] + [9] * 9)
        np.testing.assert_array_equal(result.i_max[:10], [0] + [1] * 9)
        self.assertMatchesSerial(d, lp, Block(4, 4), 2)

    def test_segment_spanning_blocks(self):
        d = np.zeros(40)
        d[2] = 7.0
        d[30] = 7.0
        lp = np.ones(40, dtype=int)
        result = segmented_max_scan_parallel(d, lp, Block(2, 2), 3)
        np.testing.assert_array_equal(result.i_max[2:], 2)
        self.assertMatchesSerial(d, lp, Block(2, 2), 3)

    def test_adversarial_ties(self):
        rng = np.random.default_rng(5)
        d = rng.integers(0, 3, size=5000).astype(float)
        lp = random_labels(rng, 5000, 40)
        for block in (Block(4, 4), Block(5, 3), Block(1, 7), Block(7, 1)):
            with self.subTest(width=block.width, height=block.height):
                self.assertMatchesSerial(d, lp, block, 4)

    def test_random_segments(self):
        rng = np.random.default_rng(6)
        d = rng.random(100_000)
        for mean_len in (3, 50, 5000):
            lp = random_labels(rng, len(d), mean_len)
            for block in (Block(8, 8), Block(16, 16), Block(32, 32)):
                for workers in (1, 2, 8):
                    with self.subTest(mean_len=mean_len, capacity=block.capacity, workers=workers):
                        self.assertMatchesSerial(d, lp, block, workers)

    def test_single_segment_over_many_blocks(self):
        d = np.random.default_rng(7).random(10_000)
        self.assertMatchesSerial(d, np.ones(len(d), dtype=int), Block(4, 2), 8)

    def test_empty(self):
        self.assertEqual(len(segmented_max_scan_parallel([], [], Block(4, 4), 2)), 0)

    def test_capacity_one_rejected(self):
        with self.assertRaises(ValueError):
            segmented_max_scan_parallel([1.0], [1], Block(1, 1))
