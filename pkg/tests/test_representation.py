import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superevent.events import EVENT_RECORD_DTYPE, Event
from superevent.representation import (
    DEFAULT_WINDOWS,
    ActiveEventSurface,
    Mcts,
    TimeWindowSet,
    build_mcts,
    mcts_from_aes,
    read_mcts,
    time_surface,
    write_mcts,
)


def events_from(rows):
    return np.array(rows, dtype=EVENT_RECORD_DTYPE)


class TestTimeSurfacePointValues:
    def test_age_zero_scores_one(self):
        ev = events_from([(1000, 2, 3, 1)])
        surface = time_surface(ev, 1000, 0.001, +1, 8, 8)
        assert surface[3, 2] == np.float32(1.0)

    def test_age_half_window_scores_half(self):
        ev = events_from([(500, 2, 3, 1)])
        surface = time_surface(ev, 1000, 0.001, +1, 8, 8)
        assert surface[3, 2] == np.float32(0.5)

    def test_age_at_window_scores_zero(self):
        ev = events_from([(0, 2, 3, 1)])
        surface = time_surface(ev, 1000, 0.001, +1, 8, 8)
        assert surface[3, 2] == np.float32(0.0)
        assert not surface.any()

    def test_event_after_tau_is_ignored(self):
        ev = events_from([(2000, 2, 3, 1)])
        assert not time_surface(ev, 1000, 0.001, +1, 8, 8).any()

    def test_wrong_polarity_pixels_stay_zero(self):
        ev = events_from([(1000, 2, 3, -1)])
        assert not time_surface(ev, 1000, 0.001, +1, 8, 8).any()

    def test_most_recent_event_wins(self):
        ev = events_from([(200, 1, 1, 1), (800, 1, 1, 1)])
        surface = time_surface(ev, 1000, 0.001, +1, 4, 4)
        assert surface[1, 1] == np.float32(0.8)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError, match="delta_t"):
            time_surface(events_from([]), 0, 0.0, +1, 4, 4)


class TestBuildMcts:
    def test_five_windows_make_ten_channels(self):
        mcts = build_mcts(events_from([]), 0, DEFAULT_WINDOWS, 16, 8)
        assert mcts.data.shape == (10, 8, 16)

    def test_default_window_lengths(self):
        assert DEFAULT_WINDOWS.deltas == (0.001, 0.003, 0.01, 0.03, 0.1)

    def test_empty_events_all_zero(self):
        mcts = build_mcts(events_from([]), 5000, DEFAULT_WINDOWS, 8, 8)
        assert not mcts.data.any()

    def test_channel_order_negative_first_ascending(self):
        ev = events_from([(1000, 0, 0, -1), (1000, 1, 1, 1)])
        mcts = build_mcts(ev, 1000, (0.001, 0.01), 4, 4)
        assert mcts.channel(-1, 0.001)[0, 0] == 1.0
        assert mcts.channel(-1, 0.01)[0, 0] == 1.0
        assert mcts.channel(+1, 0.001)[1, 1] == 1.0
        assert not mcts.channel(-1, 0.001)[1, 1]
        np.testing.assert_array_equal(mcts.data[0], mcts.channel(-1, 0.001))
        np.testing.assert_array_equal(mcts.data[3], mcts.channel(+1, 0.01))


class TestWindows:
    def test_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            TimeWindowSet((0.01, 0.01))

    def test_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            TimeWindowSet((0.0, 0.1))

    def test_must_be_nonempty(self):
        with pytest.raises(ValueError, match="at least one"):
            TimeWindowSet(())


class TestActiveEventSurface:
    def test_single_event_populates_one_cell(self):
        aes = ActiveEventSurface(4, 4)
        aes.ingest(Event(10, 1, 2, 1))
        assert (aes.stamps >= 0).sum() == 1
        assert aes.stamps[1, 2, 1] == 10

    def test_later_event_wins_cell(self):
        aes = ActiveEventSurface(4, 4)
        aes.ingest(Event(10, 1, 2, 1))
        aes.ingest(Event(20, 1, 2, 1))
        assert aes.stamps[1, 2, 1] == 20

    def test_out_of_order_same_cell_rejected(self):
        aes = ActiveEventSurface(4, 4)
        aes.ingest(Event(20, 1, 2, 1))
        with pytest.raises(ValueError, match="regresses"):
            aes.ingest(Event(10, 1, 2, 1))

    def test_slack_allows_small_regressions(self):
        aes = ActiveEventSurface(4, 4, slack_us=15)
        aes.ingest(Event(20, 1, 2, 1))
        aes.ingest(Event(10, 1, 2, 1))
        assert aes.stamps[1, 2, 1] == 20

    def test_out_of_bounds_rejected(self):
        aes = ActiveEventSurface(4, 4)
        with pytest.raises(ValueError, match="outside"):
            aes.ingest(Event(1, 4, 0, 1))

    def test_bulk_matches_per_event(self):
        rng = np.random.default_rng(0)
        ev = np.empty(500, EVENT_RECORD_DTYPE)
        ev["t"] = np.sort(rng.integers(0, 10_000, 500))
        ev["x"] = rng.integers(0, 8, 500)
        ev["y"] = rng.integers(0, 8, 500)
        ev["p"] = rng.choice([-1, 1], 500)
        bulk = ActiveEventSurface(8, 8)
        bulk.ingest_stream(ev)
        single = ActiveEventSurface(8, 8)
        for rec in ev:
            single.ingest(Event(int(rec["t"]), int(rec["x"]), int(rec["y"]), int(rec["p"])))
        np.testing.assert_array_equal(bulk.stamps, single.stamps)


class TestAesEquivalence:
    def test_stale_cell_zero_in_every_channel(self):
        aes = ActiveEventSurface(4, 4)
        aes.ingest(Event(0, 1, 1, 1))
        mcts = mcts_from_aes(aes, 10_000_000, DEFAULT_WINDOWS)
        assert not mcts.data.any()

    def test_negative_only_cell_keeps_positive_channels_zero(self):
        aes = ActiveEventSurface(4, 4)
        aes.ingest(Event(100, 1, 1, -1))
        mcts = mcts_from_aes(aes, 100, (0.001,))
        assert mcts.channel(-1, 0.001)[1, 1] == 1.0
        assert not mcts.channel(+1, 0.001).any()

    def test_matches_brute_force_on_fixed_case(self):
        rng = np.random.default_rng(42)
        n = 3000
        ev = np.empty(n, EVENT_RECORD_DTYPE)
        ev["t"] = np.sort(rng.integers(0, 500_000, n))
        ev["x"] = rng.integers(0, 32, n)
        ev["y"] = rng.integers(0, 24, n)
        ev["p"] = rng.choice([-1, 1], n)
        tau = 400_000
        keep = ev[ev["t"] <= tau]
        aes = ActiveEventSurface(32, 24)
        aes.ingest_stream(keep)
        incremental = mcts_from_aes(aes, tau, DEFAULT_WINDOWS)
        brute = build_mcts(ev, tau, DEFAULT_WINDOWS, 32, 24)
        assert np.array_equal(incremental.data, brute.data)


@st.composite
def stream_cases(draw):
    width = draw(st.integers(2, 24))
    height = draw(st.integers(2, 24))
    n = draw(st.integers(0, 300))
    ts = sorted(draw(st.lists(st.integers(0, 2_000_000), min_size=n, max_size=n)))
    ev = np.empty(n, EVENT_RECORD_DTYPE)
    ev["t"] = ts
    ev["x"] = draw(st.lists(st.integers(0, width - 1), min_size=n, max_size=n))
    ev["y"] = draw(st.lists(st.integers(0, height - 1), min_size=n, max_size=n))
    ev["p"] = draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
    tau = draw(st.integers(0, 2_500_000))
    n_windows = draw(st.integers(1, 4))
    deltas = draw(
        st.lists(
            st.floats(1e-4, 0.5, allow_nan=False), min_size=n_windows,
            max_size=n_windows, unique=True,
        )
    )
    return width, height, ev, tau, TimeWindowSet(tuple(sorted(deltas)))


@settings(max_examples=100, deadline=None)
@given(stream_cases())
def test_incremental_equals_brute_force(case):
    width, height, ev, tau, windows = case
    keep = ev[ev["t"] <= np.uint64(tau)]
    aes = ActiveEventSurface(width, height)
    aes.ingest_stream(keep)
    incremental = mcts_from_aes(aes, tau, windows)
    brute = build_mcts(ev, tau, windows, width, height)
    assert np.array_equal(incremental.data, brute.data)


@settings(max_examples=50, deadline=None)
@given(stream_cases())
def test_value_range_and_window_monotonicity(case):
    width, height, ev, tau, windows = case
    mcts = build_mcts(ev, tau, windows, width, height)
    assert mcts.data.min() >= 0.0 and mcts.data.max() <= 1.0
    n = len(windows)
    for base in (0, n):
        for i in range(n - 1):
            small, large = mcts.data[base + i], mcts.data[base + i + 1]
            nz = small > 0
            assert (large[nz] >= small[nz]).all()


def test_permuting_negative_events_leaves_positive_channels():
    rng = np.random.default_rng(3)
    neg = [(int(t), int(rng.integers(4)), int(rng.integers(4)), -1)
           for t in np.sort(rng.integers(0, 1000, 20))]
    pos = [(int(t), int(rng.integers(4)), int(rng.integers(4)), 1)
           for t in np.sort(rng.integers(0, 1000, 20))]
    merged = events_from(sorted(neg + pos))
    shifted_neg = [(t + 1 if t < 999 else t, x, y, p) for t, x, y, p in neg]
    merged2 = events_from(sorted(shifted_neg + pos))
    a = build_mcts(merged, 1000, (0.001,), 4, 4)
    b = build_mcts(merged2, 1000, (0.001,), 4, 4)
    np.testing.assert_array_equal(a.channel(+1, 0.001), b.channel(+1, 0.001))


class TestMctsContainer:
    def test_round_trip(self, tmp_path):
        ev = events_from([(100, 1, 2, 1), (150, 3, 0, -1), (200, 0, 3, 1)])
        mcts = build_mcts(ev, 1000, (0.001, 0.01), 4, 4)
        path = tmp_path / "x.mcts"
        write_mcts(mcts, path)
        loaded = read_mcts(path)
        assert loaded.windows.deltas == mcts.windows.deltas
        assert loaded.tau_us == mcts.tau_us
        assert np.array_equal(loaded.data, mcts.data)

    def test_unsupported_version(self, tmp_path):
        ev = events_from([])
        mcts = build_mcts(ev, 0, (0.001,), 4, 4)
        path = tmp_path / "x.mcts"
        write_mcts(mcts, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 9
        path.write_bytes(bytes(raw))
        from superevent.events import FormatError
        with pytest.raises(FormatError, match="version"):
            read_mcts(path)

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="shape"):
            Mcts(4, 4, TimeWindowSet((0.001,)), 0, np.zeros((3, 4, 4), np.float32))
