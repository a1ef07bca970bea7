#
# trajectories/services.py
#
"""
AIS CSV ingestion and writing, and the merged (flat) layout the parallel
compressor runs on.
"""
from __future__ import annotations

import logging
import re
from typing import IO, Sequence

import numpy as np
import pandas as pd
from django.conf import settings

from core.exceptions import CsvFormatError, EmptyTrajectorySetError
from geo.models import EllipsoidParams
from geo.services import project_arrays
from primitives.services import exclusive_scan_serial
from .models import FlatTrajectoryStore, Trajectory, TrajectorySet

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["mmsi", "timestamp", "lon", "lat"]
MAX_ABS_LON_DEG = 180.0
# rows closer to a pole are rejected, not clamped
MAX_ABS_LAT_DEG = 89.9

_PARSER_LINE = re.compile(r"line (\d+)")


def _first_bad_line(mask: np.ndarray) -> int:
    # header is line 1, first data row is line 2
    return int(np.flatnonzero(mask)[0]) + 2


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        line = _first_bad_line(bad)
        raise CsvFormatError(f"{column} {frame[column].iloc[line - 2]!r} is not a finite number", line)
    return values


def _read_frame(stream: IO) -> pd.DataFrame | None:
    try:
        frame = pd.read_csv(
            stream,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        return None
    except pd.errors.ParserError as exc:
        match = _PARSER_LINE.search(str(exc))
        raise CsvFormatError("wrong number of fields", int(match.group(1)) if match else 1) from exc
    if list(frame.columns) != CSV_COLUMNS:
        raise CsvFormatError(f"header must be {','.join(CSV_COLUMNS)}, got {','.join(map(str, frame.columns))}", 1)
    frame = frame.fillna("")
    # a trailing empty line is not a row
    blank = (frame == "").all(axis=1).to_numpy()
    while len(frame) and blank[len(frame) - 1]:
        frame = frame.iloc[:-1]
        blank = blank[:-1]
    return frame


def parse_ais_csv(stream: IO, ell: EllipsoidParams | None = None, gap_seconds: float | None = None) -> TrajectorySet:
    """
    Read `mmsi,timestamp,lon,lat` rows (degrees, Unix seconds) into projected
    trajectories.

    Rows are grouped by MMSI and sorted by timestamp; exact duplicates are
    dropped. A same-MMSI pause longer than ``gap_seconds`` starts a new
    trajectory. An empty file gives an empty set.
    """
    ell = ell or EllipsoidParams.from_settings()
    gap = settings.TRAJFORGE_GAP_SECONDS if gap_seconds is None else gap_seconds

    frame = _read_frame(stream)
    if frame is None or frame.empty:
        logger.info("empty AIS input")
        return TrajectorySet()

    mmsi = _numeric_column(frame, "mmsi")
    t = _numeric_column(frame, "timestamp")
    lon_deg = _numeric_column(frame, "lon")
    lat_deg = _numeric_column(frame, "lat")

    fractional = mmsi != np.floor(mmsi)
    if fractional.any():
        raise CsvFormatError("mmsi must be an integer", _first_bad_line(fractional))
    off_range = ~(np.abs(lon_deg) <= MAX_ABS_LON_DEG) | ~(np.abs(lat_deg) <= MAX_ABS_LAT_DEG)
    if off_range.any():
        line = _first_bad_line(off_range)
        raise CsvFormatError(f"coordinates ({lon_deg[line - 2]}, {lat_deg[line - 2]}) out of range", line)

    return trajectory_set_from_columns(mmsi.astype(np.int64), t, lon_deg, lat_deg, ell=ell, gap_seconds=gap)


def trajectory_set_from_columns(
    mmsi: np.ndarray,
    t: np.ndarray,
    lon_deg: np.ndarray,
    lat_deg: np.ndarray,
    *,
    ell: EllipsoidParams | None = None,
    gap_seconds: float | None = None,
) -> TrajectorySet:
    """Group, sort, dedupe, split on gaps and project already-validated columns."""
    ell = ell or EllipsoidParams.from_settings()
    gap = settings.TRAJFORGE_GAP_SECONDS if gap_seconds is None else gap_seconds
    n_rows = len(t)
    if n_rows == 0:
        return TrajectorySet()

    order = np.lexsort((t, mmsi))
    mmsi, t, lon_deg, lat_deg = mmsi[order], t[order], lon_deg[order], lat_deg[order]

    same_key = np.zeros(n_rows, dtype=bool)
    same_key[1:] = (mmsi[1:] == mmsi[:-1]) & (t[1:] == t[:-1])
    exact = np.zeros(n_rows, dtype=bool)
    exact[1:] = same_key[1:] & (lon_deg[1:] == lon_deg[:-1]) & (lat_deg[1:] == lat_deg[:-1])
    if exact.any():
        logger.info("dropped %d duplicate row(s)", int(exact.sum()))
    conflicting = int((same_key & ~exact).sum())
    if conflicting:
        logger.warning("dropped %d row(s) repeating an (mmsi, timestamp) with another position", conflicting)
    keep = ~same_key
    mmsi, t, lon_deg, lat_deg = mmsi[keep], t[keep], lon_deg[keep], lat_deg[keep]

    lon = np.radians(lon_deg)
    lat = np.radians(lat_deg)
    x, y = project_arrays(lon, lat, ell)

    starts = np.ones(len(t), dtype=bool)
    starts[1:] = (mmsi[1:] != mmsi[:-1]) | (np.diff(t) > gap)
    bounds = np.append(np.flatnonzero(starts), len(t))
    trajectories = tuple(
        Trajectory(int(mmsi[s]), t[s:e], x[s:e], y[s:e], lon[s:e], lat[s:e])
        for s, e in zip(bounds[:-1], bounds[1:])
    )
    logger.info(
        "parsed %d row(s) into %d trajectories over %d vessel(s)",
        n_rows, len(trajectories), len(np.unique(mmsi)),
    )
    return TrajectorySet(trajectories)


def _format_timestamp(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_ais_csv(trajectories: TrajectorySet, stream: IO) -> None:
    """
    Write the set back in the ingest schema. Output is fixed-format (integral
    timestamps without a fraction, 10-decimal degrees), so equal sets give
    byte-identical files.
    """
    if len(trajectories):
        t = np.concatenate([traj.t for traj in trajectories])
        frame = pd.DataFrame({
            "mmsi": np.repeat([traj.mmsi for traj in trajectories], [len(traj) for traj in trajectories]),
            "timestamp": [_format_timestamp(v) for v in t],
            "lon": np.degrees(np.concatenate([traj.lon for traj in trajectories])),
            "lat": np.degrees(np.concatenate([traj.lat for traj in trajectories])),
        })
    else:
        frame = pd.DataFrame(columns=CSV_COLUMNS)
    frame.to_csv(stream, index=False, float_format="%.10f", lineterminator="\n")


def flatten(trajectories: TrajectorySet) -> FlatTrajectoryStore:
    """Merge every trajectory back-to-back; offsets are the exclusive scan of the lengths."""
    t_len = np.array([len(traj) for traj in trajectories], dtype=np.int64)
    if len(t_len) == 0:
        empty = np.zeros(0)
        return FlatTrajectoryStore(empty, empty, empty, empty, empty, t_len, t_len, t_len)

    def merged(name: str) -> np.ndarray:
        return np.concatenate([getattr(traj, name) for traj in trajectories])

    return FlatTrajectoryStore(
        t=merged("t"),
        x=merged("x"),
        y=merged("y"),
        lon=merged("lon"),
        lat=merged("lat"),
        t_len=t_len,
        offsets=exclusive_scan_serial(t_len),
        mmsi_index=np.array([traj.mmsi for traj in trajectories], dtype=np.int64),
    )


def unflatten(store: FlatTrajectoryStore) -> TrajectorySet:
    trajectories = []
    for k in range(len(store)):
        part = store.slice_of(k)
        trajectories.append(Trajectory(
            int(store.mmsi_index[k]),
            store.t[part], store.x[part], store.y[part], store.lon[part], store.lat[part],
        ))
    return TrajectorySet(tuple(trajectories))


def bounds(trajectories: TrajectorySet) -> tuple[float, float, float, float]:
    if trajectories.total_points == 0:
        raise EmptyTrajectorySetError("bounds of an empty trajectory set are undefined")
    return trajectories.bounds


def subset(trajectories: TrajectorySet, indices: Sequence[np.ndarray]) -> TrajectorySet:
    """Keep, per trajectory, the points at the given ascending indices."""
    if len(indices) != len(trajectories):
        raise ValueError(f"{len(indices)} index lists for {len(trajectories)} trajectories")
    return TrajectorySet(tuple(traj.take(idx) for traj, idx in zip(trajectories, indices)))
