import numpy as np
import pytest
from hypothesis import given, strategies as st

from seatrade.ais_decoder import PositionReport
from seatrade.port_call import (
    CallParams,
    InvalidGeofence,
    PortGeofence,
    UnorderedTrack,
    attach_draughts,
    detect_calls,
    point_in_polygon,
)

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]
H = 3600.0


def _pos(t, lon, lat, sog, mmsi=231000000):
    return PositionReport(
        mmsi=mmsi, timestamp=t, latitude=lat, longitude=lon,
        speed_over_ground=sog, course=0.0, msg_type=1, second=0,
    )


def test_point_in_square():
    assert point_in_polygon((0.5, 0.5), UNIT_SQUARE)
    assert not point_in_polygon((2.0, 2.0), UNIT_SQUARE)


def test_point_on_edge_is_inside():
    assert point_in_polygon((1.0, 0.5), UNIT_SQUARE)
    assert point_in_polygon((0.0, 0.0), UNIT_SQUARE)  # vertex


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_point_in_polygon_agrees_with_box_test(x, y):
    expected = 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0
    assert point_in_polygon((x, y), UNIT_SQUARE) == expected


def test_geofence_validation():
    with pytest.raises(InvalidGeofence):
        PortGeofence("P", "P", "AAA", [(0, 0), (1, 0), (1, 1)])  # open ring
    bowtie = [(0, 0), (1, 1), (1, 0), (0, 1), (0, 0)]
    with pytest.raises(InvalidGeofence):
        PortGeofence("P", "P", "AAA", bowtie)


def _fence(port_id="P1", cx=0.5, cy=0.5, w=0.5, country="AAA"):
    ring = [(cx - w, cy - w), (cx + w, cy - w), (cx + w, cy + w), (cx - w, cy + w), (cx - w, cy - w)]
    return PortGeofence(port_id, port_id, country, ring)


def _stop_track(t0, hours_stopped, mmsi=231000000):
    """approach, stop at (0.5, 0.5) for the given hours, leave."""
    track = [
        _pos(t0 - 2 * H, -1.0, 0.5, 12.0, mmsi),
        _pos(t0 - 1 * H, -0.2, 0.5, 12.0, mmsi),
    ]
    t = t0
    while t <= t0 + hours_stopped * H:
        track.append(_pos(t, 0.5, 0.5, 0.2, mmsi))
        t += 0.5 * H
    leave = t0 + hours_stopped * H
    track.append(_pos(leave + 0.5 * H, 1.4, 0.5, 12.0, mmsi))
    track.append(_pos(leave + 1.0 * H, 2.0, 0.5, 12.0, mmsi))
    track.append(_pos(leave + 2.0 * H, 3.0, 0.5, 12.0, mmsi))
    return track


def test_six_hour_stop_yields_one_call():
    params = CallParams()
    track = _stop_track(t0=100000.0, hours_stopped=6)
    calls = detect_calls(track, [_fence()], params)
    assert len(calls) == 1
    call = calls[0]
    assert call.port_id == "P1"
    assert call.arrival == 100000.0
    assert call.departure == 100000.0 + 6 * H


def test_fast_transit_yields_no_calls():
    params = CallParams()
    track = [_pos(1000.0 + k * 600.0, -1.0 + k * 0.25, 0.5, 15.0) for k in range(16)]
    assert detect_calls(track, [_fence()], params) == []


def test_two_separated_stops_two_calls():
    params = CallParams()
    t0 = 100000.0
    first = _stop_track(t0, 6)
    second = _stop_track(t0 + 24 * H, 6)
    calls = detect_calls(first + second, [_fence()], params)
    assert len(calls) == 2
    assert calls[0].departure < calls[1].arrival


def test_short_stop_below_min_dwell_ignored():
    params = CallParams()
    track = _stop_track(100000.0, hours_stopped=2)
    assert detect_calls(track, [_fence()], params) == []


def test_time_translation_invariance():
    params = CallParams()
    track = _stop_track(100000.0, 6)
    shift = 86400.0 * 3
    shifted = [
        PositionReport(
            mmsi=r.mmsi, timestamp=r.timestamp + shift, latitude=r.latitude,
            longitude=r.longitude, speed_over_ground=r.speed_over_ground,
            course=r.course, msg_type=r.msg_type, second=r.second,
        )
        for r in track
    ]
    base = detect_calls(track, [_fence()], params)
    moved = detect_calls(shifted, [_fence()], params)
    assert [(c.arrival + shift, c.departure + shift) for c in base] == [
        (c.arrival, c.departure) for c in moved
    ]


def test_calls_never_overlap_and_longest_fence_wins():
    # two overlapping fences; the stop sits inside both, the bigger fence
    # contains the track longer
    params = CallParams()
    big = _fence("BIG", w=0.5)
    small = _fence("SMALL", w=0.45)
    track = _stop_track(100000.0, 8)
    calls = detect_calls(track, [small, big], params)
    assert len(calls) == 1
    assert calls[0].port_id == "BIG"


def test_gap_reset_breaks_call():
    params = CallParams()
    t0 = 100000.0
    track = _stop_track(t0, 4)[:-3]  # still berthed, below dwell, then vanish
    track.append(_pos(t0 + 4 * H + 60 * H, 0.5, 0.5, 0.2))  # returns after 60 h gap
    calls = detect_calls(track, [_fence()], params)
    assert calls == []  # neither segment reaches min dwell


def test_unordered_track_rejected():
    params = CallParams()
    track = [_pos(2000.0, 0.5, 0.5, 0.2), _pos(1000.0, 0.5, 0.5, 0.2)]
    with pytest.raises(UnorderedTrack):
        detect_calls(track, [_fence()], params)


def test_attach_draughts_lookback_and_stability():
    params = CallParams()
    from seatrade.port_call import PortCall

    call = PortCall(mmsi=1, port_id="P1", arrival=100.0 * H, departure=110.0 * H)
    history = [
        (99.0 * H, 7.5),                # one hour before arrival
        (111.0 * H, 7.5),               # lone value, not stable
        (112.0 * H, 11.0),
        (113.0 * H, 11.0),              # stability pair
    ]
    out = attach_draughts([call], history, params)[0]
    assert out.draught_in == 7.5
    assert out.draught_out == 11.0


def test_attach_draughts_outside_window_unknown():
    params = CallParams()
    from seatrade.port_call import PortCall

    call = PortCall(mmsi=1, port_id="P1", arrival=1000.0 * H, departure=1010.0 * H)
    history = [(1000.0 * H - 80 * H, 6.0)]  # beyond the 72 h lookback
    out = attach_draughts([call], history, params)[0]
    assert out.draught_in is None and out.draught_out is None
