"""Event stream, trajectory, and camera intrinsics I/O.

Defines the EVT1 binary event container and readers for CSV event dumps,
TUM-style trajectory text files, and JSON intrinsics. All readers return
immutable-by-convention numpy-backed containers that the rest of the
package consumes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "Event",
    "EventStream",
    "PoseStamped",
    "CameraIntrinsics",
    "FormatError",
    "read_events",
    "write_events",
    "read_trajectory",
    "read_intrinsics",
    "EVENT_RECORD_DTYPE",
    "EVT1_MAGIC",
    "EVT1_HEADER_SIZE",
]


class FormatError(ValueError):
    """Raised for malformed input files (bad magic, fields, ordering)."""


class Event(NamedTuple):
    """Single camera event: timestamp (µs), pixel column/row, polarity ±1."""

    t: int
    x: int
    y: int
    p: int


# Packed little-endian record layout shared by EVT1 files and in-memory bulk
# storage: u64 timestamp, u16 x, u16 y, i8 polarity = 13 bytes.
EVENT_RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")]
)

EVT1_MAGIC = b"EVT1"
EVT1_VERSION = 1
# magic(4) version(2) width(2) height(2) reserved(2) pad(4) count(8); the pad
# keeps the u64 count 8-byte aligned and the header a round 24 bytes.
_EVT1_HEADER = struct.Struct("<4sHHHHIQ")
EVT1_HEADER_SIZE = _EVT1_HEADER.size
assert EVT1_HEADER_SIZE == 24


@dataclass(frozen=True)
class EventStream:
    """Time-ordered events plus the sensor geometry they live on.

    ``events`` is a structured array with EVENT_RECORD_DTYPE fields. The
    constructor validates bounds, polarity, and temporal order, so any
    constructed instance satisfies the container invariants.
    """

    width: int
    height: int
    events: np.ndarray = field(default_factory=lambda: np.empty(0, EVENT_RECORD_DTYPE))

    def __post_init__(self) -> None:
        ev = np.ascontiguousarray(self.events, dtype=EVENT_RECORD_DTYPE)
        object.__setattr__(self, "events", ev)
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"sensor size must be positive, got {self.width}x{self.height}")
        if len(ev) == 0:
            return
        if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
            bad = int(np.argmax((ev["x"] >= self.width) | (ev["y"] >= self.height)))
            raise ValueError(
                f"event {bad} at ({ev['x'][bad]},{ev['y'][bad]}) outside "
                f"{self.width}x{self.height} sensor"
            )
        if not np.isin(ev["p"], (-1, 1)).all():
            bad = int(np.argmin(np.isin(ev["p"], (-1, 1))))
            raise ValueError(f"event {bad} has polarity {ev['p'][bad]}, expected -1/+1")
        dt = np.diff(ev["t"].astype(np.int64))
        if (dt < 0).any():
            bad = int(np.argmax(dt < 0)) + 1
            raise ValueError(f"event {bad} breaks timestamp order")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        for rec in self.events:
            yield Event(int(rec["t"]), int(rec["x"]), int(rec["y"]), int(rec["p"]))

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p) -> "EventStream":
        ev = np.empty(len(t), EVENT_RECORD_DTYPE)
        ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
        return cls(width, height, ev)


@dataclass(frozen=True)
class PoseStamped:
    """Ground-truth pose sample: time (s), position (m), unit quaternion.

    The quaternion is stored in (w, x, y, z) order.
    """

    t: float
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        quat = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(quat))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {norm} not unit")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model with radial-tangential distortion (k1, k2, p1, p2)."""

    fx: float
    fy: float
    cx: float
    cy: float
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        dist = np.asarray(self.distortion, dtype=np.float64)
        if dist.shape != (4,):
            raise ValueError(f"expected 4 distortion coefficients, got shape {dist.shape}")
        object.__setattr__(self, "distortion", dist)


def _check_regressions(t: np.ndarray, slack_us: int, where: str) -> bool:
    """Return True if any (allowed) regression occurred; raise if beyond slack."""
    if len(t) < 2:
        return False
    running = np.maximum.accumulate(t.astype(np.int64))
    lag = running[:-1] - t[1:].astype(np.int64)
    if (lag > slack_us).any():
        bad = int(np.argmax(lag > slack_us)) + 1
        raise FormatError(
            f"{where}: timestamp at index {bad} regresses by {int(lag[bad - 1])} µs "
            f"(slack {slack_us} µs)"
        )
    return bool((lag > 0).any())


def _finish_stream(width, height, ev, slack_us, where) -> EventStream:
    regressed = _check_regressions(ev["t"], slack_us, where)
    if regressed:
        # Within-slack regressions are tolerated but the container invariant
        # demands monotonicity; a stable sort keeps same-timestamp order.
        ev = ev[np.argsort(ev["t"], kind="stable")]
    return EventStream(width, height, ev)


def _read_events_csv(path: Path, width, height, slack_us) -> EventStream:
    ts, xs, ys, ps = [], [], [], []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if lineno == 1 and parts[0].strip().lower() in ("t", "t_us", "timestamp"):
                continue  # optional header row
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                t, x, y, p = (int(v) for v in parts)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if p == 0:
                p = -1
            if p not in (-1, 1):
                raise FormatError(f"{path}:{lineno}: polarity {p} not in {{0,1}} or {{-1,1}}")
            if t < 0:
                raise FormatError(f"{path}:{lineno}: negative timestamp {t}")
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    ev = np.empty(len(ts), EVENT_RECORD_DTYPE)
    ev["t"], ev["x"], ev["y"], ev["p"] = ts, xs, ys, ps
    if width is None or height is None:
        if len(ev) == 0:
            raise FormatError(f"{path}: sensor size required for an empty CSV")
        width = int(ev["x"].max()) + 1 if width is None else width
        height = int(ev["y"].max()) + 1 if height is None else height
    return _finish_stream(width, height, ev, slack_us, str(path))


def _read_events_evt1(path: Path, slack_us) -> EventStream:
    raw = Path(path).read_bytes()
    if len(raw) < EVT1_HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, width, height, _reserved, _pad, count = _EVT1_HEADER.unpack_from(raw)
    if magic != EVT1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EVT1_VERSION:
        raise FormatError(f"{path}: unsupported EVT1 version {version}")
    body = raw[EVT1_HEADER_SIZE:]
    expected = count * EVENT_RECORD_DTYPE.itemsize
    if len(body) != expected:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes at offset {EVT1_HEADER_SIZE}, "
            f"expected {expected} for {count} records"
        )
    ev = np.frombuffer(body, dtype=EVENT_RECORD_DTYPE).copy()
    return _finish_stream(width, height, ev, slack_us, str(path))


def read_events(
    path: Union[str, Path],
    format: str | None = None,
    *,
    width: int | None = None,
    height: int | None = None,
    slack_us: int = 0,
) -> EventStream:
    """Read an event stream from a CSV (`t_us,x,y,p`) or EVT1 binary file.

    CSV polarity 0 is mapped to -1. Timestamp regressions beyond ``slack_us``
    raise FormatError naming the first offending index; regressions within
    the slack are re-sorted (stable) to restore monotonic order. Format is
    inferred from the suffix when not given.
    """
    path = Path(path)
    if format is None:
        format = "evt1" if path.suffix.lower() in (".evt1", ".evt") else "csv"
    if format == "csv":
        return _read_events_csv(path, width, height, slack_us)
    if format == "evt1":
        return _read_events_evt1(path, slack_us)
    raise ValueError(f"unknown event format {format!r}")


def write_events(stream: EventStream, path: Union[str, Path]) -> None:
    """Write an EventStream as an EVT1 file; read_events inverts it exactly."""
    header = _EVT1_HEADER.pack(
        EVT1_MAGIC, EVT1_VERSION, stream.width, stream.height, 0, 0, len(stream.events)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(stream.events.tobytes())


def read_trajectory(path: Union[str, Path]) -> list[PoseStamped]:
    """Read a TUM-format trajectory: rows `t tx ty tz qx qy qz qw`.

    `#` comments are skipped. Quaternions within 1e-3 of unit norm are
    renormalized; anything further off is an error, as are non-monotonic
    timestamps.
    """
    poses: list[PoseStamped] = []
    prev_t = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise FormatError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            t = vals[0]
            if prev_t is not None and t <= prev_t:
                raise FormatError(f"{path}:{lineno}: timestamp {t} does not increase past {prev_t}")
            prev_t = t
            qx, qy, qz, qw = vals[4:8]
            quat = np.array([qw, qx, qy, qz], dtype=np.float64)
            norm = float(np.linalg.norm(quat))
            if abs(norm - 1.0) > 1e-3:
                raise FormatError(f"{path}:{lineno}: quaternion norm {norm:.6f} too far from 1")
            poses.append(PoseStamped(t, np.array(vals[1:4]), quat / norm))
    return poses


def read_intrinsics(path: Union[str, Path]) -> CameraIntrinsics:
    """Read pinhole intrinsics + 4 distortion coefficients from JSON."""
    with open(path, "r") as fh:
        doc = json.load(fh)
    for key in ("fx", "fy", "cx", "cy", "dist"):
        if key not in doc:
            raise FormatError(f"{path}: missing intrinsics key {key!r}")
    dist = np.asarray(doc["dist"], dtype=np.float64)
    if dist.shape != (4,):
        raise FormatError(f"{path}: 'dist' must have 4 entries, got {dist.shape}")
    try:
        return CameraIntrinsics(
            float(doc["fx"]), float(doc["fy"]), float(doc["cx"]), float(doc["cy"]), dist
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
