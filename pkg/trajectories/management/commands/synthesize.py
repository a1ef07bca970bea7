from dateutil import parser as dateparser
from django.core.management.base import CommandError

from core.commands import TrajForgeCommand
from trajectories.synthetic import DEFAULT_START, SyntheticTraffic, write_synthetic_csv


class Command(TrajForgeCommand):
    """Writes seeded synthetic AIS rows, for benchmarks and demos without real data."""
    help = "Generate a synthetic AIS CSV from seeded random walks"
    command_name = "synthesize"

    def add_arguments(self, parser):
        parser.add_argument("output", help="CSV file to write")
        parser.add_argument("--points", type=int, default=10_000)
        parser.add_argument("--vessels", type=int, default=10)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--turn-rate", type=float, default=0.05, help="Heading noise per report, radians")
        parser.add_argument("--noise", type=float, default=3.0, help="Position noise, meters")
        parser.add_argument("--duplicates", type=float, default=0.0, help="Fraction of rows repeated verbatim")
        parser.add_argument("--start", default=None, help="First timestamp, ISO 8601 (default 2021-01-01T00:00:00Z)")
        parser.add_argument("--no-shuffle", action="store_true", help="Keep rows grouped by vessel")

    def run(self, config, **options):
        start = DEFAULT_START
        if options["start"]:
            try:
                start = dateparser.isoparse(options["start"])
            except ValueError as exc:
                raise CommandError(f"--start: {exc}") from exc
        try:
            traffic = SyntheticTraffic(
                n_points=options["points"],
                n_vessels=options["vessels"],
                seed=config.seed,
                turn_rate=options["turn_rate"],
                noise_m=options["noise"],
                duplicate_fraction=options["duplicates"],
                start=start,
                shuffle=not options["no_shuffle"],
            )
        except ValueError as exc:
            raise CommandError(str(exc)) from exc
        with open(options["output"], "w", encoding="utf-8", newline="") as stream:
            rows = write_synthetic_csv(traffic, stream)
        self.success(f"Wrote {rows} row(s) for {traffic.n_vessels} vessel(s) to {options['output']}.")
