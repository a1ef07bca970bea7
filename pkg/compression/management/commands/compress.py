from compression.services import BACKENDS, compress_set
from core.commands import TrajForgeCommand
from core.workers import WorkerPool
from metrics.services import render_key_values
from trajectories.services import parse_ais_csv, write_ais_csv


class Command(TrajForgeCommand):
    """
    Compresses every trajectory of an AIS CSV with Douglas-Peucker and writes
    the retained points in the same schema. Both backends write identical files.
    """
    help = "Compress AIS trajectories with Douglas-Peucker (serial or parallel backend)"
    command_name = "compress"

    def add_arguments(self, parser):
        parser.add_argument("input", help="AIS CSV (mmsi,timestamp,lon,lat)")
        parser.add_argument("output", help="Compressed CSV, same schema")
        parser.add_argument("--epsilon", type=float, default=0.0, help="Distance threshold in meters")
        parser.add_argument("--backend", choices=BACKENDS, default="parallel")
        parser.add_argument("--report", default=None, help="Write the key=value run report here instead of stdout")
        self.add_workers_argument(parser)

    def run(self, config, **options):
        with open(options["input"], "rb") as stream:
            trajectories = parse_ais_csv(stream)
        self.note(f"Compressing {trajectories.total_points} point(s) in {len(trajectories)} trajectories...")

        with WorkerPool(config.workers) as pool:
            compressed, report = compress_set(trajectories, config.epsilon, backend=config.backend, workers=pool)

        with open(options["output"], "w", encoding="utf-8", newline="") as stream:
            write_ais_csv(compressed, stream)

        text = render_key_values(report.as_dict())
        if options["report"]:
            with open(options["report"], "w", encoding="utf-8") as stream:
                stream.write(text)
        else:
            self.stdout.write(text, ending="")

        self.success(
            f"Kept {report.total_compressed} of {report.total_original} point(s) "
            f"(CR {report.compression_ratio:.3%}) in {report.total_seconds:.3f}s."
        )
