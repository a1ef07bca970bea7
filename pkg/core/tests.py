import threading
from unittest.mock import patch

from django.test import SimpleTestCase, override_settings

from .forms import RunConfig, RunConfigForm, errors_as_text
from .workers import WorkerPool, ensure_pool, resolve_workers, split_range


class RunConfigFormTests(SimpleTestCase):
    def config(self, **data):
        form = RunConfigForm(data={"command": "render", **data})
        self.assertTrue(form.is_valid(), errors_as_text(form))
        return form.to_config()

    def errors(self, **data):
        form = RunConfigForm(data={"command": "render", **data})
        self.assertFalse(form.is_valid())
        return form.errors

    @override_settings(TRAJFORGE_WORKERS=3, TRAJFORGE_GRID="256x128", TRAJFORGE_KERNEL="cosine", TRAJFORGE_BANDWIDTH=5)
    def test_defaults_come_from_settings(self):
        config = self.config()
        self.assertIsInstance(config, RunConfig)
        self.assertEqual((config.workers, config.grid, config.kernel, config.bandwidth), (3, (256, 128), "cosine", 5))
        self.assertEqual(config.epsilon, 0.0)
        self.assertEqual(config.backend, "parallel")

    def test_options_override_settings(self):
        config = self.config(workers=2, grid="64x32", kernel="Quartic", bandwidth=9, epsilon=2.5, interpolate=True)
        self.assertEqual((config.workers, config.grid, config.kernel, config.bandwidth), (2, (64, 32), "quartic", 9))
        self.assertEqual(config.epsilon, 2.5)
        self.assertTrue(config.interpolate)

    def test_negative_epsilon(self):
        self.assertIn("epsilon", self.errors(epsilon=-1))

    def test_unknown_kernel(self):
        self.assertIn("kernel", self.errors(kernel="boxcar"))

    def test_even_bandwidth(self):
        self.assertIn("bandwidth", self.errors(bandwidth=8))

    def test_bad_grid(self):
        self.assertIn("grid", self.errors(grid="1x10"))

    def test_zero_workers(self):
        self.assertIn("workers", self.errors(workers=0))

    def test_unknown_colormap(self):
        self.assertIn("colormap", self.errors(colormap="no-such-map"))

    def test_unknown_command(self):
        form = RunConfigForm(data={"command": "plot"})
        self.assertFalse(form.is_valid())
        self.assertIn("command", errors_as_text(form))


class WorkerPoolTests(SimpleTestCase):
    def test_split_range_covers_everything_once(self):
        for n_items in (1, 7, 100, 101):
            for parts in (1, 3, 8, 200):
                ranges = split_range(n_items, parts)
                covered = [i for start, stop in ranges for i in range(start, stop)]
                self.assertEqual(covered, list(range(n_items)))
                self.assertLessEqual(len(ranges), min(parts, n_items))
                sizes = [stop - start for start, stop in ranges]
                self.assertLessEqual(max(sizes) - min(sizes), 1)

    def test_split_range_empty(self):
        self.assertEqual(split_range(0, 4), [])

    def test_map_keeps_task_order(self):
        with WorkerPool(4) as pool:
            self.assertEqual(pool.map(lambda v: v * v, range(50)), [v * v for v in range(50)])

    def test_single_worker_runs_inline(self):
        seen = []
        with WorkerPool(1) as pool:
            pool.map(lambda _: seen.append(threading.get_ident()), range(5))
        self.assertEqual(set(seen), {threading.get_ident()})

    def test_no_threads_for_one_worker(self):
        with patch("core.workers.ThreadPool") as thread_pool:
            WorkerPool(1).close()
            WorkerPool(3).close()
        self.assertEqual(thread_pool.call_count, 1)
        thread_pool.assert_called_with(processes=3)

    def test_map_ranges(self):
        with WorkerPool(3) as pool:
            self.assertEqual(pool.map_ranges(lambda s, e: (s, e), 10), [(0, 4), (4, 7), (7, 10)])

    @override_settings(TRAJFORGE_WORKERS=5)
    def test_resolve_workers(self):
        self.assertEqual(resolve_workers(), 5)
        self.assertEqual(resolve_workers(2), 2)
        self.assertEqual(resolve_workers(0), 1)

    def test_ensure_pool_ownership(self):
        with WorkerPool(2) as shared:
            pool, owned = ensure_pool(shared)
            self.assertIs(pool, shared)
            self.assertFalse(owned)
        pool, owned = ensure_pool(2)
        self.assertTrue(owned)
        pool.close()
