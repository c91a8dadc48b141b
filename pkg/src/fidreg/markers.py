"""Marker point sets and their CSV form.

CSV layout: header ``frame,id,x_mm,y_mm,z_mm``, one row per marker. The id
column is an optional integer tag identity and may be left empty; frames are
``ct`` (segmented from a scan) or ``device`` (optically detected).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import format_float
from .errors import FormatError

VALID_FRAMES = ("ct", "device")
CSV_HEADER = "frame,id,x_mm,y_mm,z_mm"


@dataclass(eq=False)
class MarkerSet:
    """3D marker positions (mm) in a named frame, optionally tagged with ids."""

    frame: str
    points: np.ndarray  # (n, 3) float64, read-only
    ids: tuple | None = field(default=None)  # per-point int or None

    def __post_init__(self):
        if self.frame not in VALID_FRAMES:
            raise ValueError(f"frame must be one of {VALID_FRAMES}, got {self.frame!r}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (n, 3), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if pts.flags.writeable:
            pts = pts.copy()
            pts.setflags(write=False)
        self.points = pts
        if self.ids is not None:
            ids = tuple(None if i is None else int(i) for i in self.ids)
            if len(ids) != len(pts):
                raise ValueError(f"ids length {len(ids)} != point count {len(pts)}")
            self.ids = ids

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkerSet):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.ids == other.ids
            and np.array_equal(self.points, other.points)
        )


def write_marker_csv(markers: MarkerSet, path) -> None:
    lines = [CSV_HEADER]
    for row, point in enumerate(markers.points):
        tag = ""
        if markers.ids is not None and markers.ids[row] is not None:
            tag = str(markers.ids[row])
        lines.append(
            f"{markers.frame},{tag},{format_float(point[0])},"
            f"{format_float(point[1])},{format_float(point[2])}"
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_marker_csv(path) -> MarkerSet:
    with open(path, "r", encoding="ascii", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        got = lines[0] if lines else "<empty file>"
        raise FormatError(f"marker csv line 1: expected header {CSV_HEADER!r}, got {got!r}")

    frame: str | None = None
    points: list[list[float]] = []
    ids: list[int | None] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 5:
            raise FormatError(f"marker csv line {lineno}: expected 5 fields, got {len(fields)}")
        row_frame, tag, xs, ys, zs = (f.strip() for f in fields)
        if row_frame not in VALID_FRAMES:
            raise FormatError(f"marker csv line {lineno}: bad frame {row_frame!r}")
        if frame is None:
            frame = row_frame
        elif row_frame != frame:
            raise FormatError(
                f"marker csv line {lineno}: mixed frames ({frame!r} then {row_frame!r})"
            )
        if tag:
            try:
                ids.append(int(tag, 10))
            except ValueError as exc:
                raise FormatError(f"marker csv line {lineno}: bad id {tag!r}") from exc
        else:
            ids.append(None)
        try:
            points.append([float(xs), float(ys), float(zs)])
        except ValueError as exc:
            raise FormatError(f"marker csv line {lineno}: non-numeric coordinate") from exc

    if frame is None:
        raise FormatError("marker csv has no data rows")
    id_tuple = tuple(ids) if any(i is not None for i in ids) else None
    return MarkerSet(frame=frame, points=np.array(points, dtype=np.float64), ids=id_tuple)
