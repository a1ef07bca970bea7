import time

import pandas as pd

from compression.services import compress_set
from core.commands import TrajForgeCommand, epsilon_list
from core.workers import WorkerPool
from density.kernels import build_kernel
from density.models import GridSpec, KernelSpec
from density.services import convolve, convolve_ndimage, convolve_serial, rasterize
from metrics.services import speedup_ratio
from trajectories.services import flatten

STAGES = ("compress", "density")
COLUMNS = [
    "stage", "backend", "run", "epsilon", "interpolate", "workers", "bandwidth", "points",
    "seconds", "staging_seconds", "compute_seconds",
]


class Command(TrajForgeCommand):
    """
    Times the serial and the parallel implementation of one stage R times
    each and writes per-run rows, the per-backend means and the speedup
    ratio (serial mean / parallel mean) as CSV, once per threshold.

    The density stage first compresses the input at the threshold, then
    times rasterization (interpolated when asked) plus smoothing. Staging
    is the rasterization and compute is the smoothing. An ``ndimage`` row
    times the same pipeline with scipy's convolution as a library baseline.
    """
    help = "Benchmark serial against parallel compression or density mapping"
    command_name = "bench"

    def add_arguments(self, parser):
        self.add_input_arguments(parser)
        parser.add_argument("--stage", choices=STAGES, default="compress")
        parser.add_argument("--runs", type=int, default=None, help="Runs per backend (default TRAJFORGE_BENCH_RUNS)")
        parser.add_argument("--epsilon", type=float, default=1.0)
        parser.add_argument(
            "--epsilons", type=epsilon_list, default=None,
            help="Comma-separated thresholds, one group of rows each (overrides --epsilon)",
        )
        parser.add_argument("--kernel", default=None)
        parser.add_argument("--bandwidth", type=int, default=None)
        parser.add_argument("--grid", default=None)
        parser.add_argument("--interpolate", action="store_true")
        parser.add_argument("--output", default=None, help="CSV file (default stdout)")
        self.add_workers_argument(parser)

    def run(self, config, **options):
        trajectories = self.load_trajectories(config, options)
        epsilons = options.get("epsilons") or [config.epsilon]
        stage = options["stage"]
        bench = self._bench_compress if stage == "compress" else self._bench_density

        rows = []
        with WorkerPool(config.workers) as pool:
            for eps in epsilons:
                rows.extend(bench(trajectories, eps, config, pool))

        frame = pd.DataFrame(rows, columns=COLUMNS)
        summary = []
        for eps, group in frame.groupby("epsilon", sort=False):
            means = group.groupby("backend", sort=False)["seconds"].mean()
            for backend, seconds in means.items():
                summary.append({
                    "stage": stage, "backend": backend, "run": "mean", "epsilon": eps,
                    "interpolate": config.interpolate, "seconds": seconds,
                })
            summary.append({
                "stage": stage, "backend": "speedup_ratio", "run": "", "epsilon": eps,
                "interpolate": config.interpolate, "seconds": speedup_ratio(means["serial"], means["parallel"]),
            })
        means = frame.groupby("backend", sort=False)["seconds"].mean()
        frame = pd.concat([frame, pd.DataFrame(summary, columns=COLUMNS)], ignore_index=True)

        if options["output"]:
            frame.to_csv(options["output"], index=False, lineterminator="\n")
        else:
            self.stdout.write(frame.to_csv(index=False, lineterminator="\n"), ending="")
        self.success(
            f"{stage}: serial {means['serial']:.4f}s, parallel {means['parallel']:.4f}s "
            f"over {config.runs} run(s) x {len(epsilons)} threshold(s), "
            f"SR {speedup_ratio(means['serial'], means['parallel']):.2f}."
        )

    def _bench_compress(self, trajectories, eps, config, pool):
        rows = []
        self.note(f"Timing compression of {trajectories.total_points} point(s), eps={eps}...")
        for run in range(1, config.runs + 1):
            _, serial = compress_set(trajectories, eps, backend="serial", workers=1)
            _, parallel = compress_set(trajectories, eps, backend="parallel", workers=pool)
            for report in (serial, parallel):
                rows.append([
                    "compress", report.backend, run, eps, config.interpolate, report.workers, "",
                    report.total_original, report.total_seconds, report.staging_seconds, report.compute_seconds,
                ])
        return rows

    def _bench_density(self, trajectories, eps, config, pool):
        u, v = config.grid
        grid = GridSpec.covering(trajectories.bounds, u, v)
        kernel = build_kernel(KernelSpec(config.kernel, config.bandwidth))
        compressed, _ = compress_set(trajectories, eps, workers=pool)
        store = flatten(compressed)
        self.note(
            f"Timing {config.kernel}/{config.bandwidth} density maps of {store.total_points} point(s) "
            f"on a {u}x{v} grid, eps={eps}, interpolate={config.interpolate}..."
        )
        backends = (
            ("serial", 1, lambda counts: convolve_serial(counts, kernel)),
            ("parallel", pool, lambda counts: convolve(counts, kernel, workers=pool)),
            ("ndimage", 1, lambda counts: convolve_ndimage(counts, kernel)),
        )
        rows = []
        for run in range(1, config.runs + 1):
            for backend, workers, smooth in backends:
                started = time.perf_counter()
                counts = rasterize(store, grid, interpolate=config.interpolate, workers=workers)
                staged = time.perf_counter()
                smooth(counts)
                finished = time.perf_counter()
                rows.append([
                    "density", backend, run, eps, config.interpolate, 1 if workers == 1 else pool.workers,
                    config.bandwidth, store.total_points,
                    finished - started, staged - started, finished - staged,
                ])
        return rows
