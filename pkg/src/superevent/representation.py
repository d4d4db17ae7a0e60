"""Time-surface event representations.

A time surface assigns each pixel the linearly decayed age of its most
recent event of one polarity: value = 1 - (tau - t) / dt, zero once the
event falls out of the window. Stacking surfaces for both polarities over
several window lengths gives the multi-channel tensor used as model input
(negative-polarity channels first, windows ascending).

Two construction routes are provided: `build_mcts` scans the full event
list (brute force, max over per-event decay values) while
`ActiveEventSurface` keeps only the latest event timestamp per pixel and
polarity. Because the decay is strictly increasing in t, the per-pixel max
is attained by the most recent event, so both routes agree bitwise at
float32 precision — a property the test suite checks exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union
import struct

import numpy as np

from .events import EVENT_RECORD_DTYPE, Event, EventStream

__all__ = [
    "TimeWindowSet",
    "DEFAULT_WINDOWS",
    "Mcts",
    "ActiveEventSurface",
    "time_surface",
    "build_mcts",
    "mcts_from_aes",
    "write_mcts",
    "read_mcts",
]


@dataclass(frozen=True)
class TimeWindowSet:
    """Strictly increasing window lengths in seconds, at least one."""

    deltas: tuple[float, ...]

    def __post_init__(self) -> None:
        deltas = tuple(float(d) for d in self.deltas)
        if len(deltas) == 0:
            raise ValueError("need at least one time window")
        if any(d <= 0 for d in deltas):
            raise ValueError(f"window lengths must be positive: {deltas}")
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError(f"window lengths must be strictly increasing: {deltas}")
        object.__setattr__(self, "deltas", deltas)

    def __iter__(self) -> Iterator[float]:
        return iter(self.deltas)

    def __len__(self) -> int:
        return len(self.deltas)


# 1 ms .. 100 ms, logarithmically spaced.
DEFAULT_WINDOWS = TimeWindowSet((0.001, 0.003, 0.01, 0.03, 0.1))

WindowsLike = Union[TimeWindowSet, Sequence[float]]


def as_windows(windows: WindowsLike) -> TimeWindowSet:
    if isinstance(windows, TimeWindowSet):
        return windows
    return TimeWindowSet(tuple(windows))


@dataclass(frozen=True)
class Mcts:
    """Stack of time surfaces: 2N float32 channels in [0, 1].

    Channel order: all negative-polarity windows ascending, then positive.
    """

    width: int
    height: int
    windows: TimeWindowSet
    tau_us: int
    data: np.ndarray

    def __post_init__(self) -> None:
        expected = (2 * len(self.windows), self.height, self.width)
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape}, expected {expected}")
        if self.data.dtype != np.float32:
            raise ValueError(f"data dtype {self.data.dtype}, expected float32")

    @property
    def channels(self) -> int:
        return 2 * len(self.windows)

    def channel(self, polarity: int, delta_t: float) -> np.ndarray:
        deltas = self.windows.deltas
        base = 0 if polarity < 0 else len(deltas)
        return self.data[base + deltas.index(delta_t)]


def _window_us(delta_t: float) -> float:
    """Window length in µs; the decay denominator for both routes.

    Working in the µs domain keeps integer ages exact, so ages of 0, dt/2,
    and dt map to exactly 1.0, 0.5, and 0.0 (excluded) at float32.
    """
    return delta_t * 1e6


def _decay(age_us: np.ndarray, window_us: float) -> np.ndarray:
    """Linear decay 1 - age/window (float64 in, float64 out).

    Shared by both construction routes so their float32 results can agree
    bitwise: whichever route wins a pixel computes this exact expression.
    """
    return 1.0 - age_us / window_us


def _event_fields(events, width, height):
    if isinstance(events, EventStream):
        return events.events, events.width, events.height
    ev = np.asarray(events, dtype=EVENT_RECORD_DTYPE)
    if width is None or height is None:
        raise ValueError("width/height required when passing a bare event array")
    return ev, width, height


def time_surface(
    events,
    tau_us: int,
    delta_t: float,
    polarity: int,
    width: int | None = None,
    height: int | None = None,
) -> np.ndarray:
    """Single-polarity surface at time tau: max of per-event decay values.

    Events after tau are ignored; events older than delta_t decay to <= 0
    and never beat the zero-initialized surface, which is equivalent to
    excluding them. Returns a float32 (height, width) array in [0, 1].
    """
    if delta_t <= 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    if polarity not in (-1, 1):
        raise ValueError(f"polarity must be -1 or +1, got {polarity}")
    ev, width, height = _event_fields(events, width, height)
    surface = np.zeros(height * width, dtype=np.float64)
    window_us = _window_us(delta_t)
    if tau_us < 0:
        mask = np.zeros(len(ev), dtype=bool)
    else:
        mask = (ev["p"] == polarity) & (ev["t"] <= np.uint64(tau_us))
    if mask.any():
        sel = ev[mask]
        age_us = (tau_us - sel["t"].astype(np.int64)).astype(np.float64)
        keep = age_us < window_us  # age == dt decays to 0: same as exclusion
        values = _decay(age_us[keep], window_us)
        idx = sel["y"].astype(np.int64)[keep] * width + sel["x"].astype(np.int64)[keep]
        np.maximum.at(surface, idx, values)
    return surface.reshape(height, width).astype(np.float32)


def build_mcts(
    events,
    tau_us: int,
    windows: WindowsLike = DEFAULT_WINDOWS,
    width: int | None = None,
    height: int | None = None,
) -> Mcts:
    """Assemble the full channel stack by brute force over the event list."""
    windows = as_windows(windows)
    ev, width, height = _event_fields(events, width, height)
    data = np.empty((2 * len(windows), height, width), dtype=np.float32)
    for ci, (polarity, delta_t) in enumerate(
        [(-1, d) for d in windows] + [(+1, d) for d in windows]
    ):
        data[ci] = time_surface(ev, tau_us, delta_t, polarity, width, height)
    return Mcts(width, height, windows, tau_us, data)


class ActiveEventSurface:
    """Latest event timestamp per pixel and polarity (-1 when never hit).

    Single-writer: ingestion must follow stream order. All read paths are
    pure; snapshots taken at time tau can be materialized into surfaces in
    parallel.
    """

    def __init__(self, width: int, height: int, slack_us: int = 0):
        if width <= 0 or height <= 0:
            raise ValueError(f"sensor size must be positive, got {width}x{height}")
        self.width = width
        self.height = height
        self.slack_us = int(slack_us)
        # plane 0 holds polarity -1, plane 1 polarity +1
        self.stamps = np.full((2, height, width), -1, dtype=np.int64)
        self.last_t = -1

    def ingest(self, event: Event) -> None:
        """Ingest one event; rejects per-cell timestamp regressions."""
        t, x, y, p = int(event.t), int(event.x), int(event.y), int(event.p)
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"event at ({x},{y}) outside {self.width}x{self.height} sensor")
        if p not in (-1, 1):
            raise ValueError(f"polarity {p} not -1/+1")
        plane = 0 if p < 0 else 1
        stored = self.stamps[plane, y, x]
        if t < stored - self.slack_us:
            raise ValueError(
                f"event at ({x},{y}) regresses cell timestamp {stored} -> {t} "
                f"(slack {self.slack_us} µs)"
            )
        if t > stored:
            self.stamps[plane, y, x] = t
        if t > self.last_t:
            self.last_t = t

    def ingest_stream(self, events) -> None:
        """Bulk ingestion of a time-ordered block (vectorized hot path)."""
        ev = events.events if isinstance(events, EventStream) else np.asarray(
            events, dtype=EVENT_RECORD_DTYPE
        )
        if len(ev) == 0:
            return
        t = ev["t"].astype(np.int64)
        x = ev["x"].astype(np.int64)
        y = ev["y"].astype(np.int64)
        if x.max() >= self.width or y.max() >= self.height:
            bad = int(np.argmax((x >= self.width) | (y >= self.height)))
            raise ValueError(f"event {bad} at ({x[bad]},{y[bad]}) out of bounds")
        dt = np.diff(t)
        sorted_block = not (dt < 0).any()
        if not sorted_block:
            run = np.maximum.accumulate(t)
            lag = run[:-1] - t[1:]
            if (lag > self.slack_us).any():
                bad = int(np.argmax(lag > self.slack_us)) + 1
                raise ValueError(f"event {bad} breaks stream order beyond slack")
        if t[0] < self.last_t - self.slack_us:
            raise ValueError(
                f"block starts at {int(t[0])} µs, before last ingested {self.last_t} µs"
            )
        plane = (ev["p"] > 0).astype(np.int64)
        idx = (plane * self.height + y) * self.width + x
        flat = self.stamps.reshape(-1)
        if sorted_block and t[0] >= self.last_t:
            # time-ordered: the last assignment per cell is also the max
            flat[idx] = t
        else:
            np.maximum.at(flat, idx, t)
        self.last_t = max(self.last_t, int(t.max()))


def mcts_from_aes(
    surface: ActiveEventSurface, tau_us: int, windows: WindowsLike = DEFAULT_WINDOWS
) -> Mcts:
    """Materialize the channel stack from the latest-timestamp planes.

    Requires the surface to contain exactly the events with t <= tau.
    Bitwise-identical (float32) to `build_mcts` over the same events.
    """
    windows = as_windows(windows)
    height, width = surface.height, surface.width
    n = len(windows)
    data = np.empty((2 * n, height, width), dtype=np.float32)
    buf = np.empty((height, width), dtype=np.float64)
    for plane in (0, 1):
        stamps = surface.stamps[plane]
        age_us = (tau_us - stamps).astype(np.float64)
        # poisoned ages fail every `age < window` test below
        age_us[(stamps < 0) | (stamps > tau_us)] = np.inf
        for wi, delta_t in enumerate(windows):
            window_us = _window_us(delta_t)
            np.divide(age_us, window_us, out=buf)
            np.subtract(1.0, buf, out=buf)  # matches _decay bit for bit
            buf[age_us >= window_us] = 0.0
            data[plane * n + wi] = buf
    return Mcts(width, height, windows, tau_us, data)


MCTS_MAGIC = b"MCTS"
MCTS_VERSION = 1
_MCTS_HEADER = struct.Struct("<4sHHHHQ")


def write_mcts(mcts: Mcts, path: Union[str, Path]) -> None:
    """Serialize to the binary container (header, f64 windows, f32 planes)."""
    header = _MCTS_HEADER.pack(
        MCTS_MAGIC, MCTS_VERSION, mcts.width, mcts.height, mcts.channels, mcts.tau_us
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(mcts.windows.deltas, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(mcts.data, dtype="<f4").tobytes())


def read_mcts(path: Union[str, Path]) -> Mcts:
    from .events import FormatError  # local import to avoid cycle at module load

    raw = Path(path).read_bytes()
    if len(raw) < _MCTS_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, width, height, channels, tau_us = _MCTS_HEADER.unpack_from(raw)
    if magic != MCTS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != MCTS_VERSION:
        raise FormatError(f"{path}: unsupported MCTS version {version}")
    if channels % 2 != 0:
        raise FormatError(f"{path}: odd channel count {channels}")
    n = channels // 2
    offset = _MCTS_HEADER.size
    need = n * 8 + channels * height * width * 4
    if len(raw) - offset != need:
        raise FormatError(f"{path}: payload {len(raw) - offset} bytes, expected {need}")
    deltas = np.frombuffer(raw, dtype="<f8", count=n, offset=offset)
    offset += n * 8
    data = np.frombuffer(raw, dtype="<f4", count=channels * height * width, offset=offset)
    return Mcts(
        width,
        height,
        TimeWindowSet(tuple(deltas)),
        tau_us,
        data.reshape(channels, height, width).copy(),
    )
