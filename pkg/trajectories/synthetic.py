#
# trajectories/synthetic.py
#
"""
Seeded synthetic AIS traffic: one correlated random walk per vessel, sampled
at irregular 2-180 s intervals like real AIS reports.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from geo.models import EllipsoidParams
from .models import TrajectorySet
from .services import CSV_COLUMNS, trajectory_set_from_columns

logger = logging.getLogger(__name__)

METERS_PER_DEGREE = 111_320.0
DEFAULT_START = datetime(2021, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SyntheticTraffic:
    """Generator knobs. The bounding box is in degrees (lon_min, lon_max, lat_min, lat_max)."""
    n_points: int
    n_vessels: int = 1
    seed: int = 0
    turn_rate: float = 0.05
    min_interval: int = 2
    max_interval: int = 180
    speed_range: tuple[float, float] = (2.0, 10.0)
    noise_m: float = 3.0
    bbox: tuple[float, float, float, float] = (121.0, 122.5, 30.5, 31.5)
    duplicate_fraction: float = 0.0
    start: datetime = DEFAULT_START
    shuffle: bool = True

    def __post_init__(self):
        if self.n_vessels < 1 or self.n_points < self.n_vessels:
            raise ValueError("need at least one vessel and one point per vessel")
        if not 1 <= self.min_interval <= self.max_interval:
            raise ValueError("sampling interval range must satisfy 1 <= min <= max")
        if not 0 <= self.duplicate_fraction < 1:
            raise ValueError("duplicate_fraction must lie in [0, 1)")


def _vessel_track(rng: np.random.Generator, cfg: SyntheticTraffic, n: int, t0: float) -> tuple[np.ndarray, ...]:
    lon_min, lon_max, lat_min, lat_max = cfg.bbox
    lon0 = rng.uniform(lon_min, lon_max)
    lat0 = rng.uniform(lat_min, lat_max)
    speed = rng.uniform(*cfg.speed_range)

    dt = rng.integers(cfg.min_interval, cfg.max_interval + 1, size=n - 1)
    heading = rng.uniform(0.0, 2 * math.pi) + np.cumsum(rng.normal(0.0, cfg.turn_rate, size=n - 1))
    step = speed * dt
    north = np.concatenate(([0.0], np.cumsum(step * np.cos(heading))))
    east = np.concatenate(([0.0], np.cumsum(step * np.sin(heading))))
    north += rng.normal(0.0, cfg.noise_m, size=n)
    east += rng.normal(0.0, cfg.noise_m, size=n)

    lat = np.clip(lat0 + north / METERS_PER_DEGREE, -85.0, 85.0)
    lon = lon0 + east / (METERS_PER_DEGREE * math.cos(math.radians(lat0)))
    lon = (lon + 180.0) % 360.0 - 180.0
    t = t0 + np.concatenate(([0], np.cumsum(dt))).astype(np.float64)
    return t, lon, lat


def generate_ais_frame(cfg: SyntheticTraffic) -> pd.DataFrame:
    """Rows in the ingest schema; with ``duplicate_fraction`` some rows are repeated verbatim."""
    rng = np.random.default_rng(cfg.seed)
    counts = 1 + rng.multinomial(cfg.n_points - cfg.n_vessels, np.full(cfg.n_vessels, 1 / cfg.n_vessels))
    start = cfg.start if cfg.start.tzinfo else cfg.start.replace(tzinfo=timezone.utc)
    t0 = start.timestamp()

    parts = []
    for k, n in enumerate(counts):
        t, lon, lat = _vessel_track(rng, cfg, int(n), t0 + float(rng.integers(0, 600)))
        parts.append(pd.DataFrame({"mmsi": 412_000_000 + k, "timestamp": t.astype(np.int64), "lon": lon, "lat": lat}))
    frame = pd.concat(parts, ignore_index=True)

    n_dup = int(round(cfg.duplicate_fraction * len(frame)))
    if n_dup:
        picks = rng.choice(len(frame), size=n_dup, replace=False)
        frame = pd.concat([frame, frame.iloc[np.sort(picks)]], ignore_index=True)
    if cfg.shuffle:
        frame = frame.iloc[rng.permutation(len(frame))].reset_index(drop=True)
    logger.debug("synthesized %d row(s) for %d vessel(s), %d duplicate(s)", len(frame), cfg.n_vessels, n_dup)
    return frame[CSV_COLUMNS]


def write_synthetic_csv(cfg: SyntheticTraffic, stream) -> int:
    frame = generate_ais_frame(cfg)
    frame.to_csv(stream, index=False, float_format="%.10f", lineterminator="\n")
    return len(frame)


def generate_trajectories(
    n_points: int,
    n_vessels: int = 1,
    seed: int = 0,
    *,
    ell: EllipsoidParams | None = None,
    **options,
) -> TrajectorySet:
    """Projected trajectories straight from the generator, without a CSV round-trip."""
    frame = generate_ais_frame(SyntheticTraffic(n_points=n_points, n_vessels=n_vessels, seed=seed, **options))
    return trajectory_set_from_columns(
        frame["mmsi"].to_numpy(dtype=np.int64),
        frame["timestamp"].to_numpy(dtype=np.float64),
        frame["lon"].to_numpy(dtype=np.float64),
        frame["lat"].to_numpy(dtype=np.float64),
        ell=ell,
    )
