"""Track file reading and writing.

Format: CSV with header ``time,x[,y,z,...]``, comma separated, UTF-8,
decimal points.  The time column is either plain numbers or ISO-8601
timestamps; timestamps are converted to fractional hours since the
first fix.  Times must arrive strictly increasing; nothing is sorted
silently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .mrme_model import Track

__all__ = ["TrackFile", "read_track", "write_track"]


@dataclass(frozen=True)
class TrackFile:
    """A track location on disk plus its labeling conventions."""

    path: str
    delimiter: str = ","
    header: bool = True
    time_unit: str = "hours"
    length_unit: str = "km"


def _parse_time(text: str, row: int, origin: datetime | None):
    """Returns (hours, origin). Accepts a float or an ISO-8601 timestamp."""
    try:
        return float(text), origin
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"row {row}: cannot parse time {text!r}") from None
    if origin is None:
        origin = stamp
    return (stamp - origin).total_seconds() / 3600.0, origin


def read_track(file: TrackFile | str | Path) -> Track:
    """Parse and validate a track file.

    Errors name the offending row (1-based, header included).
    """
    if not isinstance(file, TrackFile):
        file = TrackFile(path=str(file))
    path = Path(file.path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")

    times: list[float] = []
    rows: list[list[float]] = []
    origin = None
    dim = None
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter=file.delimiter)
        start_row = 1
        if file.header:
            header = next(reader, None)
            if not header or header[0].strip().lower() != "time":
                raise ValidationError("row 1: header must start with a 'time' column")
            dim = len(header) - 1
            if dim < 1:
                raise ValidationError("row 1: header needs at least one coordinate column")
            start_row = 2
        for k, row in enumerate(reader, start=start_row):
            if not row or all(not cell.strip() for cell in row):
                continue
            if dim is None:
                dim = len(row) - 1
            if len(row) != dim + 1:
                raise ValidationError(
                    f"row {k}: expected {dim + 1} columns, found {len(row)}"
                )
            t, origin = _parse_time(row[0].strip(), k, origin)
            try:
                coords = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise ValidationError(f"row {k}: {exc}") from None
            if not all(np.isfinite(coords)) or not np.isfinite(t):
                raise ValidationError(f"row {k}: non-finite value")
            if times and t <= times[-1]:
                raise ValidationError(
                    f"row {k}: time {t!r} does not increase past the previous row"
                )
            times.append(t)
            rows.append(coords)
    if len(times) < 2:
        raise ValidationError(f"{path}: track too short ({len(times)} usable rows)")
    return Track(times=np.array(times), locations=np.array(rows))


def write_track(track: Track, path, length_unit: str = "km") -> None:
    """Write a track as CSV (header time,x[,y,...]); full float precision."""
    names = ["x", "y", "z"] + [f"x{k}" for k in range(4, track.dim + 1)]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time"] + names[: track.dim])
        for t, row in zip(track.times, track.locations):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
