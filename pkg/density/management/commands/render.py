from pathlib import Path

from compression.services import compress_set
from core.commands import TrajForgeCommand
from core.workers import WorkerPool
from density.kernels import build_kernel
from density.models import KERNEL_FAMILIES, GridSpec, KernelSpec
from density.rendering import SCALES, dump_density, render
from density.services import density_map
from trajectories.services import flatten, parse_ais_csv


class Command(TrajForgeCommand):
    """
    Builds the traffic density map of an AIS CSV: grid counts, optional gap
    interpolation, kernel smoothing. Writes the TFDM matrix dump and an image.
    """
    help = "Render a kernel-smoothed vessel density map"
    command_name = "render"

    def add_arguments(self, parser):
        parser.add_argument("input", help="AIS CSV (mmsi,timestamp,lon,lat)")
        parser.add_argument("--dump", default=None, help="Smoothed matrix dump (TFDM)")
        parser.add_argument("--image", default=None, help="Image file; .png uses the colormap, anything else is PGM")
        parser.add_argument("--kernel", choices=KERNEL_FAMILIES, default=None)
        parser.add_argument("--bandwidth", type=int, default=None, help="Odd kernel size")
        parser.add_argument("--grid", default=None, help="UxV, e.g. 1024x1024")
        parser.add_argument("--interpolate", action="store_true", help="Fill cells between distant consecutive points")
        parser.add_argument("--colormap", default="gray")
        parser.add_argument("--scale", choices=SCALES, default="linear")
        parser.add_argument(
            "--compress-epsilon", type=float, default=None,
            help="Compress with this threshold first; the grid still covers the original points",
        )
        self.add_workers_argument(parser)

    def run(self, config, **options):
        with open(options["input"], "rb") as stream:
            trajectories = parse_ais_csv(stream)
        u, v = config.grid
        grid = GridSpec.covering(trajectories.bounds, u, v)
        kernel = build_kernel(KernelSpec(config.kernel, config.bandwidth))

        with WorkerPool(config.workers) as pool:
            if options["compress_epsilon"] is not None:
                trajectories, report = compress_set(trajectories, options["compress_epsilon"], workers=pool)
                self.note(f"Compressed to {report.total_compressed} of {report.total_original} point(s).")
            counts, smoothed = density_map(
                flatten(trajectories), grid, kernel, interpolate=config.interpolate, workers=pool,
            )

        if options["dump"]:
            Path(options["dump"]).write_bytes(dump_density(smoothed))
        if options["image"]:
            image_format = "png" if options["image"].lower().endswith(".png") else "pgm"
            Path(options["image"]).write_bytes(render(smoothed, config.colormap, config.scale, image_format))

        if counts.skipped_points:
            self.note(f"{counts.skipped_points} point(s) fell outside the grid.")
        self.success(
            f"Rendered {u}x{v} map from {trajectories.total_points} point(s) "
            f"and {counts.interpolated_cells} interpolated cell(s) with {config.kernel}/{config.bandwidth}."
        )
