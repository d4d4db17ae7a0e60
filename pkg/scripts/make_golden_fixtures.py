#!/usr/bin/env python3
"""Regenerate the checked-in golden container fixtures.

The fixtures pin the on-disk byte layout of every binary format; tests
compare both hashes and decoded values, so regenerating this file's
outputs is an intentional format change.
"""

import hashlib
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from superevent.events import EVENT_RECORD_DTYPE, EventStream, write_events
from superevent.matching import KeypointSet, MatchSet, write_keypoints, write_matches
from superevent.representation import build_mcts, write_mcts

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def golden_stream() -> EventStream:
    ev = np.array([(100, 1, 2, 1), (150, 3, 0, -1), (200, 0, 3, 1)], EVENT_RECORD_DTYPE)
    return EventStream(4, 4, ev)


def golden_keypoints() -> KeypointSet:
    return KeypointSet(
        123456,
        np.array([1.5, 8.0], np.float32),
        np.array([2.5, 8.0], np.float32),
        np.array([0.5, 1.0], np.float32),
        np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.6, 0.8, 0.0]], np.float32),
    )


def golden_matches() -> MatchSet:
    return MatchSet(
        123456, 234567,
        np.array([0, 1], np.uint32),
        np.array([1, 0], np.uint32),
        np.array([0.25, 0.75], np.float32),
    )


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    write_events(golden_stream(), FIXTURES / "golden.evt1")
    write_keypoints(golden_keypoints(), FIXTURES / "golden.sekp")
    write_matches(golden_matches(), FIXTURES / "golden.semt")
    write_mcts(build_mcts(golden_stream(), 1000, (0.001, 0.01)), FIXTURES / "golden.mcts")
    for name in ("golden.evt1", "golden.sekp", "golden.semt", "golden.mcts"):
        digest = hashlib.sha256((FIXTURES / name).read_bytes()).hexdigest()
        print(f"{name}: {digest}")


if __name__ == "__main__":
    main()
