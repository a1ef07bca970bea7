import pandas as pd
from django.conf import settings

from compression.services import compress_set
from core.commands import TrajForgeCommand, epsilon_list
from core.workers import WorkerPool
from metrics.services import evaluate, render_table, speedup_ratio


class Command(TrajForgeCommand):
    """
    Compresses the same data at every threshold of the epsilon grid and prints
    one table row per threshold: points kept, CR, RLL, DTW mean and std,
    with serial and parallel timings.
    """
    help = "Sweep compression thresholds and tabulate CR, RLL, DTW and speedup"
    command_name = "sweep"

    def add_arguments(self, parser):
        self.add_input_arguments(parser)
        parser.add_argument(
            "--epsilons", type=epsilon_list, default=None,
            help="Comma-separated thresholds in meters (default TRAJFORGE_EPSILON_GRID)",
        )
        parser.add_argument("--csv", default=None, help="Also write the rows as CSV")
        self.add_workers_argument(parser)

    def run(self, config, **options):
        trajectories = self.load_trajectories(config, options)
        epsilons = options["epsilons"] or settings.TRAJFORGE_EPSILON_GRID
        reports = []
        with WorkerPool(config.workers) as pool:
            for eps in epsilons:
                _, serial = compress_set(trajectories, eps, backend="serial", workers=1)
                compressed, parallel = compress_set(trajectories, eps, backend="parallel", workers=pool)
                timings = {
                    "serial_seconds": serial.total_seconds,
                    "parallel_seconds": parallel.total_seconds,
                    "speedup_ratio": speedup_ratio(serial.total_seconds, parallel.total_seconds),
                }
                reports.append(evaluate(trajectories, compressed, epsilon=eps, workers=pool, timings=timings))
                self.note(f"eps={eps:g}: kept {parallel.total_compressed} of {parallel.total_original} point(s).")

        self.stdout.write(render_table(reports), ending="")
        if options["csv"]:
            pd.DataFrame([r.as_dict() for r in reports]).to_csv(options["csv"], index=False, lineterminator="\n")
        self.success(f"Swept {len(reports)} threshold(s).")
