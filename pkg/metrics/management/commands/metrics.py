from core.commands import TrajForgeCommand
from metrics.services import align_to, evaluate, render_report, render_table
from trajectories.services import parse_ais_csv


class Command(TrajForgeCommand):
    """
    Compares an original AIS CSV with its compressed version. Compressed tracks
    are matched to the originals by MMSI and time span; an unmatched track is
    an error.
    """
    help = "Report CR, RLL and DTW (mean and std) for a compressed AIS file"
    command_name = "metrics"

    def add_arguments(self, parser):
        parser.add_argument("original", help="Uncompressed AIS CSV")
        parser.add_argument("compressed", help="Compressed AIS CSV")
        parser.add_argument("--epsilon", type=float, default=0.0, help="Threshold used, for the report only")
        parser.add_argument("--table", action="store_true", help="Table layout instead of key=value")
        self.add_workers_argument(parser)

    def run(self, config, **options):
        with open(options["original"], "rb") as stream:
            originals = parse_ais_csv(stream)
        with open(options["compressed"], "rb") as stream:
            compressed = align_to(originals, parse_ais_csv(stream, gap_seconds=float("inf")))
        report = evaluate(originals, compressed, epsilon=config.epsilon, workers=config.workers)
        text = render_table([report]) if options["table"] else render_report(report)
        self.stdout.write(text, ending="")
        self.success(f"Compared {report.n_trajectories} trajectory pair(s).")
