#
# core/commands.py
#
"""
Shared plumbing for the management commands: option validation through
RunConfigForm, error translation, and stderr summaries.
"""
from __future__ import annotations

import argparse
import logging

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import TrajForgeError
from core.forms import RunConfig, RunConfigForm, errors_as_text

logger = logging.getLogger(__name__)

CONFIG_OPTIONS = (
    "epsilon", "kernel", "bandwidth", "grid", "interpolate", "workers",
    "backend", "seed", "colormap", "scale", "runs",
)


def epsilon_list(text: str) -> list[float]:
    """Parse a comma-separated list of thresholds such as "0,0.5,1"."""
    values = [float(part) for part in text.split(",") if part.strip()]
    if any(not v >= 0 for v in values):
        raise argparse.ArgumentTypeError(f"thresholds must be >= 0, got {text!r}")
    return values


class TrajForgeCommand(BaseCommand):
    """
    Subclasses set ``command_name`` and implement ``run(config, **options)``.
    Data goes to files or stdout; progress and summaries go to stderr.
    """
    command_name = ""

    def add_workers_argument(self, parser) -> None:
        parser.add_argument(
            "--workers", type=int, default=None,
            help="Worker pool size (default: TRAJFORGE_WORKERS, else the CPU count).",
        )

    def build_config(self, options: dict) -> RunConfig:
        data = {"command": self.command_name}
        data.update({key: options.get(key) for key in CONFIG_OPTIONS if options.get(key) is not None})
        form = RunConfigForm(data=data)
        if not form.is_valid():
            raise CommandError(errors_as_text(form))
        return form.to_config()

    def add_input_arguments(self, parser) -> None:
        parser.add_argument("input", nargs="?", default=None, help="AIS CSV (mmsi,timestamp,lon,lat)")
        parser.add_argument("--synthetic", type=int, default=None, metavar="N", help="Use N synthetic points instead of a file")
        parser.add_argument("--vessels", type=int, default=10, help="Vessels in the synthetic data")
        parser.add_argument("--seed", type=int, default=None)

    def load_trajectories(self, config: RunConfig, options: dict):
        from trajectories.services import parse_ais_csv
        from trajectories.synthetic import generate_trajectories

        if options.get("synthetic"):
            self.note(f"Generating {options['synthetic']} synthetic point(s), seed {config.seed}...")
            return generate_trajectories(options["synthetic"], n_vessels=options.get("vessels") or 1, seed=config.seed)
        if not options.get("input"):
            raise CommandError("give an input CSV or --synthetic N")
        with open(options["input"], "rb") as stream:
            return parse_ais_csv(stream)

    def note(self, message: str) -> None:
        self.stderr.write(message, style_func=self.style.NOTICE)

    def success(self, message: str) -> None:
        self.stderr.write(message, style_func=self.style.SUCCESS)

    def handle(self, *args, **options):
        config = self.build_config(options)
        logger.debug("%s: %s", self.command_name, config)
        try:
            self.run(config, **options)
        except (TrajForgeError, OSError) as exc:
            raise CommandError(str(exc)) from exc

    def run(self, config: RunConfig, **options) -> None:
        raise NotImplementedError
