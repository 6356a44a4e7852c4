"""Port-call detection from per-vessel position tracks.

A call is a dwell-qualified stop inside a port geofence: the vessel must
sit below the speed threshold for at least the minimum dwell, and the
call closes once it has stayed outside the fence past the exit
hysteresis.  Arrival and departure draughts are attached afterwards from
the vessel's draught history.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional, Sequence


class PortCallError(Exception):
    pass


class UnorderedTrack(PortCallError):
    pass


class InvalidGeofence(PortCallError):
    pass


@dataclass
class CallParams:
    speed_threshold_kn: float = 1.0
    min_dwell_h: float = 5.0
    exit_hysteresis_h: float = 1.0
    draught_window_h: float = 72.0
    gap_reset_h: float = 48.0


@dataclass(frozen=True)
class PortCall:
    mmsi: int
    port_id: str
    arrival: float  # epoch seconds
    departure: float
    draught_in: Optional[float] = None
    draught_out: Optional[float] = None


class PortGeofence:
    """Closed polygon ring around a port, (lon, lat) vertices."""

    def __init__(self, port_id: str, name: str, country: str, ring: Sequence[tuple]):
        ring = [(float(x), float(y)) for x, y in ring]
        if len(ring) < 4:
            raise InvalidGeofence(f"{port_id}: ring needs >= 4 vertices")
        if ring[0] != ring[-1]:
            raise InvalidGeofence(f"{port_id}: ring not closed")
        if _self_intersects(ring):
            raise InvalidGeofence(f"{port_id}: ring self-intersects")
        self.port_id = port_id
        self.name = name
        self.country = country
        self.ring = ring
        xs = [p[0] for p in ring]
        ys = [p[1] for p in ring]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))

    def contains(self, lon: float, lat: float) -> bool:
        x0, y0, x1, y1 = self.bbox
        if not (x0 <= lon <= x1 and y0 <= lat <= y1):
            return False
        return point_in_polygon((lon, lat), self.ring)


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _orient(ax, ay, bx, by, px, py) != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_cross(p1, p2, p3, p4) -> bool:
    d1 = _orient(*p3, *p4, *p1)
    d2 = _orient(*p3, *p4, *p2)
    d3 = _orient(*p1, *p2, *p3)
    d4 = _orient(*p1, *p2, *p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _self_intersects(ring: list[tuple]) -> bool:
    n = len(ring) - 1  # closing vertex duplicates the first
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share an endpoint
            if _segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]):
                return True
    return False


def point_in_polygon(point: tuple, ring: Sequence[tuple]) -> bool:
    """Even-odd ray casting; points on the boundary count inside."""
    px, py = point
    inside = False
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        if _on_segment(px, py, x1, y1, x2, y2):
            return True
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_cross:
                inside = not inside
    return inside


@dataclass
class _Candidate:
    port_id: str
    arrival: float
    departure: float
    containment: float  # seconds spent covered by this fence's spell


def detect_calls(track, geofences: Sequence[PortGeofence], params: CallParams) -> list[PortCall]:
    """Run the at-sea / in-zone / berthed / departed state machine.

    `track` is one vessel's time-ordered PositionReports.  Overlapping
    geofences are resolved to the fence whose containment spell lasts
    longest; gaps over gap_reset_h break spells so satellite dropouts
    cannot stretch a call across weeks.
    """
    if not track:
        return []
    times = [r.timestamp for r in track]
    if any(t is None for t in times):
        raise UnorderedTrack("track has reports without timestamps")
    if any(b < a for a, b in zip(times, times[1:])):
        raise UnorderedTrack("timestamps decrease")
    mmsi = track[0].mmsi

    hysteresis_s = params.exit_hysteresis_h * 3600.0
    dwell_s = params.min_dwell_h * 3600.0
    gap_s = params.gap_reset_h * 3600.0

    candidates: list[_Candidate] = []
    # per-fence spell state: [spell_start, last_inside, slow_start, arrival]
    state: dict[str, list] = {}

    def close_spell(port_id: str) -> None:
        spell = state.pop(port_id)
        if spell[3] is not None:
            candidates.append(
                _Candidate(
                    port_id=port_id,
                    arrival=spell[3],
                    departure=spell[1],
                    containment=spell[1] - spell[0],
                )
            )

    prev_t: Optional[float] = None
    for report in track:
        t = report.timestamp
        if report.latitude is None or report.longitude is None:
            continue
        if prev_t is not None and t - prev_t > gap_s:
            for port_id in list(state):
                close_spell(port_id)
        prev_t = t
        inside_now = {
            fence.port_id
            for fence in geofences
            if fence.contains(report.longitude, report.latitude)
        }
        slow = (
            report.speed_over_ground is not None
            and report.speed_over_ground < params.speed_threshold_kn
        )
        for port_id in inside_now:
            spell = state.get(port_id)
            if spell is None:
                spell = [t, t, None, None]
                state[port_id] = spell
            spell[1] = t
            if slow:
                if spell[2] is None:
                    spell[2] = t
                if spell[3] is None and t - spell[2] >= dwell_s:
                    spell[3] = spell[2]  # berthed: call opens at slow-run start
            else:
                spell[2] = None
        for port_id in list(state):
            if port_id in inside_now:
                continue
            spell = state[port_id]
            spell[2] = None  # slow run broken by leaving the fence
            if t - spell[1] >= hysteresis_s:
                close_spell(port_id)
    for port_id in list(state):
        close_spell(port_id)

    # overlapping fences: keep the longest containment spell
    ordered = sorted(
        candidates, key=lambda c: (-c.containment, c.arrival, c.port_id)
    )
    accepted: list[_Candidate] = []
    for cand in ordered:
        if all(
            cand.departure <= kept.arrival or cand.arrival >= kept.departure
            for kept in accepted
        ):
            accepted.append(cand)
    accepted.sort(key=lambda c: c.arrival)
    return [
        PortCall(mmsi=mmsi, port_id=c.port_id, arrival=c.arrival, departure=c.departure)
        for c in accepted
    ]


def attach_draughts(
    calls: Sequence[PortCall],
    draught_history: Sequence[tuple[float, float]],
    params: CallParams,
) -> list[PortCall]:
    """Fill draught_in/draught_out from a time-ordered draught history.

    draught_in is the last report within the lookback window before
    arrival.  draught_out is the first post-departure value confirmed by
    an immediately following equal report (crews often enter the new
    draught late, so a lone value is not trusted).
    """
    times = [t for t, _ in draught_history]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise PortCallError("draught history not strictly increasing")
    window_s = params.draught_window_h * 3600.0
    out = []
    for call in calls:
        draught_in = None
        i = bisect.bisect_right(times, call.arrival) - 1
        if i >= 0 and call.arrival - times[i] <= window_s:
            draught_in = draught_history[i][1]
        draught_out = None
        j = bisect.bisect_right(times, call.departure)
        while j < len(times) and times[j] <= call.departure + window_s:
            if (
                j + 1 < len(times)
                and times[j + 1] <= call.departure + window_s
                and abs(draught_history[j + 1][1] - draught_history[j][1]) < 1e-9
            ):
                draught_out = draught_history[j][1]
                break
            j += 1
        out.append(
            PortCall(
                mmsi=call.mmsi,
                port_id=call.port_id,
                arrival=call.arrival,
                departure=call.departure,
                draught_in=draught_in,
                draught_out=draught_out,
            )
        )
    return out
