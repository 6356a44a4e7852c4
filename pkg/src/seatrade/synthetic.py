"""Synthetic AIS worlds with known ground truth.

Two halves:

* an AIS sentence encoder (bit packing, six-bit armoring, NMEA framing,
  fragment splitting) used to build reference corpora and raw feed
  fixtures;
* a small shipping world: ports with geofences, a classed fleet, chained
  voyage plans, and track/static emission with per-voyage cargo recorded
  as ground truth for call counts and country-level flow totals.

Everything is seeded and deterministic.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .ais_decoder import PositionReport, StaticVoyageReport, nmea_checksum
from .controls_builder import (
    COMPOSITE_POLICIES,
    POLICY_MAX_LEVELS,
    POLICY_NAMES,
    CountryControls,
    composite_stringency,
)
from .fleet_registry import (
    VesselClass,
    VesselRecord,
    estimate_capacity,
    load_class_utilization,
)
from .port_call import PortGeofence
from .trade_estimator import EXPORT, IMPORT

EPOCH_2019 = dt.datetime(2019, 1, 1, tzinfo=dt.timezone.utc).timestamp()
EPOCH_2020 = dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc).timestamp()

KNOTS_PER_DEG_H = 60.0  # 1 degree ~ 60 nautical miles on the synthetic plane


# =====================================================================
# encoder
# =====================================================================


class BitBuilder:
    def __init__(self) -> None:
        self.value = 0
        self.length = 0

    def add(self, value: int, width: int) -> "BitBuilder":
        if not 0 <= value < (1 << width):
            raise ValueError(f"{value} does not fit in {width} bits")
        self.value = (self.value << width) | value
        self.length += width
        return self

    def add_signed(self, value: int, width: int) -> "BitBuilder":
        return self.add(value & ((1 << width) - 1), width)

    def add_text(self, text: str, n_chars: int) -> "BitBuilder":
        padded = text.upper().ljust(n_chars, "@")[:n_chars]
        for ch in padded:
            code = ord(ch)
            if 64 <= code <= 95:
                self.add(code - 64, 6)
            elif 32 <= code <= 63:
                self.add(code, 6)
            else:
                self.add(0, 6)  # unrepresentable -> '@'
        return self


def armor_payload(bits: BitBuilder) -> tuple[str, int]:
    """Pack bits into armored characters; returns (payload, fill_bits)."""
    fill = (6 - bits.length % 6) % 6
    value = bits.value << fill
    n_chars = (bits.length + fill) // 6
    chars = []
    for i in range(n_chars):
        v = (value >> (6 * (n_chars - 1 - i))) & 0x3F
        chars.append(chr(v + 48) if v < 40 else chr(v + 56))
    return "".join(chars), fill


def frame_sentences(
    payload: str,
    fill_bits: int,
    channel: str = "A",
    message_id: Optional[int] = None,
    talker: str = "AIVDM",
    max_chars: int = 60,
    epoch: Optional[float] = None,
) -> list[str]:
    """Wrap an armored payload into one or more checksummed NMEA lines."""
    n_frags = max(1, math.ceil(len(payload) / max_chars))
    mid = "" if n_frags == 1 and message_id is None else str(
        message_id if message_id is not None else 0
    )
    lines = []
    for i in range(n_frags):
        chunk = payload[i * max_chars : (i + 1) * max_chars]
        fill = fill_bits if i == n_frags - 1 else 0
        body = f"{talker},{n_frags},{i + 1},{mid},{channel},{chunk},{fill}"
        line = f"!{body}*{nmea_checksum(body):02X}"
        if epoch is not None:
            line = f"{int(epoch)}\t{line}"
        lines.append(line)
    return lines


def encode_position(
    mmsi: int,
    lat_raw: int,
    lon_raw: int,
    sog_raw: int,
    cog_raw: int,
    second: int = 0,
    msg_type: int = 1,
) -> tuple[str, int]:
    """Types 1/2/3 (class A) or 18/19 (class B) from raw field values."""
    b = BitBuilder()
    b.add(msg_type, 6).add(0, 2).add(mmsi, 30)
    if msg_type in (1, 2, 3):
        b.add(0, 4)  # nav status
        b.add_signed(-128, 8)  # rate of turn: not available
        b.add(sog_raw, 10).add(0, 1)
        b.add_signed(lon_raw, 28).add_signed(lat_raw, 27)
        b.add(cog_raw, 12).add(511, 9).add(second, 6)
        b.add(0, 2).add(0, 3).add(0, 1).add(0, 19)
    elif msg_type == 18:
        b.add(0, 8)
        b.add(sog_raw, 10).add(0, 1)
        b.add_signed(lon_raw, 28).add_signed(lat_raw, 27)
        b.add(cog_raw, 12).add(511, 9).add(second, 6)
        b.add(0, 2).add(0b110000, 6).add(0, 1).add(0, 20)
    elif msg_type == 19:
        b.add(0, 8)
        b.add(sog_raw, 10).add(0, 1)
        b.add_signed(lon_raw, 28).add_signed(lat_raw, 27)
        b.add(cog_raw, 12).add(511, 9).add(second, 6)
        b.add(0, 4).add_text("SYNTH", 20).add(70, 8)
        b.add(10, 9).add(10, 9).add(5, 6).add(5, 6)
        b.add(0, 4).add(0, 1).add(0, 1).add(0, 1).add(0, 4)
    else:
        raise ValueError(f"msg_type {msg_type}")
    return armor_payload(b)


def encode_static5(
    mmsi: int,
    imo: int,
    callsign: str,
    name: str,
    ship_type: int,
    dim_bow: int,
    dim_stern: int,
    dim_port: int,
    dim_star: int,
    draught_raw: int,
    destination: str,
) -> tuple[str, int]:
    b = BitBuilder()
    b.add(5, 6).add(0, 2).add(mmsi, 30).add(0, 2).add(imo, 30)
    b.add_text(callsign, 7).add_text(name, 20)
    b.add(ship_type, 8)
    b.add(dim_bow, 9).add(dim_stern, 9).add(dim_port, 6).add(dim_star, 6)
    b.add(0, 4)
    b.add(0, 4).add(0, 5).add(24, 5).add(60, 6)  # ETA: not available
    b.add(draught_raw, 8)
    b.add_text(destination, 20)
    b.add(0, 1).add(0, 1)
    return armor_payload(b)


def encode_static24(
    mmsi: int,
    part: int,
    name: str = "",
    ship_type: int = 0,
    dim_bow: int = 0,
    dim_stern: int = 0,
    dim_port: int = 0,
    dim_star: int = 0,
) -> tuple[str, int]:
    b = BitBuilder()
    b.add(24, 6).add(0, 2).add(mmsi, 30).add(part, 2)
    if part == 0:
        b.add_text(name, 20)
    else:
        b.add(ship_type, 8).add_text("SYNTH24" , 7).add_text("CALL", 7)
        b.add(dim_bow, 9).add(dim_stern, 9).add(dim_port, 6).add(dim_star, 6)
        b.add(0, 6)
    return armor_payload(b)


def make_reference_corpus(seed: int = 11, n: int = 60) -> list[list[str]]:
    """Random valid sentence groups across all supported message types,
    with sentinel values sprinkled in.  Returns a list of line groups
    (multi-fragment type 5 groups stay together)."""
    rng = np.random.default_rng(seed)
    groups: list[list[str]] = []
    text_alphabet = list("ABCDEFGHIJKLMNOPQRSTUVWXYZ 0123456789")

    def rand_text(k: int) -> str:
        return "".join(rng.choice(text_alphabet) for _ in range(k)).strip() or "X"

    for i in range(n):
        mmsi = int(rng.integers(100000000, 999999999))
        kind = i % 7
        channel = "A" if i % 2 == 0 else "B"
        if kind in (0, 1, 2):  # types 1..3
            lat_raw = int(rng.integers(-90 * 600000, 90 * 600000))
            lon_raw = int(rng.integers(-180 * 600000, 180 * 600000))
            sog_raw = 1023 if i % 11 == 0 else int(rng.integers(0, 1023))
            cog_raw = 3600 if i % 13 == 0 else int(rng.integers(0, 3600))
            if i % 17 == 0:
                lat_raw, lon_raw = 91 * 600000, 181 * 600000
            payload, fill = encode_position(
                mmsi, lat_raw, lon_raw, sog_raw, cog_raw,
                second=int(rng.integers(0, 60)), msg_type=kind + 1,
            )
            groups.append(frame_sentences(payload, fill, channel))
        elif kind == 3:  # type 5, multi-fragment
            payload, fill = encode_static5(
                mmsi,
                imo=int(rng.integers(1000000, 9999999)),
                callsign=rand_text(6),
                name=rand_text(12),
                ship_type=int(rng.integers(0, 100)),
                dim_bow=int(rng.integers(0, 300)),
                dim_stern=int(rng.integers(0, 200)),
                dim_port=int(rng.integers(0, 40)),
                dim_star=int(rng.integers(0, 40)),
                draught_raw=0 if i % 9 == 0 else int(rng.integers(1, 256)),
                destination=rand_text(10),
            )
            max_chars = 28 if i % 10 == 3 else 60
            groups.append(
                frame_sentences(payload, fill, channel, message_id=i % 10, max_chars=max_chars)
            )
        elif kind in (4, 5):  # types 18/19
            lat_raw = int(rng.integers(-90 * 600000, 90 * 600000))
            lon_raw = int(rng.integers(-180 * 600000, 180 * 600000))
            payload, fill = encode_position(
                mmsi, lat_raw, lon_raw,
                int(rng.integers(0, 1023)), int(rng.integers(0, 3600)),
                second=int(rng.integers(0, 60)),
                msg_type=18 if kind == 4 else 19,
            )
            groups.append(frame_sentences(payload, fill, channel))
        else:  # type 24, alternating part A/B
            part = i % 2
            payload, fill = encode_static24(
                mmsi, part,
                name=rand_text(10),
                ship_type=int(rng.integers(0, 100)),
                dim_bow=int(rng.integers(0, 300)),
                dim_stern=int(rng.integers(0, 200)),
                dim_port=int(rng.integers(0, 40)),
                dim_star=int(rng.integers(0, 40)),
            )
            groups.append(frame_sentences(payload, fill, channel))
    return groups


# =====================================================================
# world
# =====================================================================


@dataclass(frozen=True)
class SynthPort:
    port_id: str
    name: str
    country: str
    lon: float
    lat: float

    def fence(self, half_width: float = 0.05) -> PortGeofence:
        x, y, w = self.lon, self.lat, half_width
        ring = [(x - w, y - w), (x + w, y - w), (x + w, y + w), (x - w, y + w), (x - w, y - w)]
        return PortGeofence(self.port_id, self.name, self.country, ring)


@dataclass
class SynthVessel:
    mmsi: int
    vessel_class: VesselClass
    ship_type_code: int
    dim_bow: int
    dim_stern: int
    dim_port: int
    dim_star: int
    design_draught: float
    ballast_draught: float
    dwt: float
    utilization_rate: float

    @property
    def length(self) -> int:
        return self.dim_bow + self.dim_stern

    @property
    def beam(self) -> int:
        return self.dim_port + self.dim_star

    def laden_draught(self, cargo_fraction: float) -> float:
        spread = self.design_draught - self.ballast_draught
        return round((self.ballast_draught + cargo_fraction * spread) * 10) / 10.0


@dataclass(frozen=True)
class Visit:
    """Ground truth for one port stay."""

    mmsi: int
    port_id: str
    country: str
    arrival: float
    departure: float
    export_tonnes: float
    import_tonnes: float


@dataclass
class VesselTimeline:
    vessel: SynthVessel
    positions: list[PositionReport]
    statics: list[StaticVoyageReport]
    visits: list[Visit]


# classes usable in draught mode, with (type code, dims, draught range)
_DRAUGHT_CLASSES = (
    (VesselClass.BULK_CARRIER, 71, (90, 140), (14, 18), (9.0, 15.0)),
    (VesselClass.CRUDE_TANKER, 80, (110, 160), (16, 22), (10.0, 16.0)),
    (VesselClass.PRODUCT_TANKER, 82, (70, 110), (12, 16), (7.0, 11.0)),
    (VesselClass.GENERAL_CARGO, 70, (60, 100), (10, 14), (6.0, 9.0)),
)


def make_fleet(
    n_vessels: int,
    rng: np.random.Generator,
    container_share: float = 0.1,
) -> list[SynthVessel]:
    utilization = load_class_utilization()
    fleet = []
    n_containers = int(round(n_vessels * container_share))
    for i in range(n_vessels):
        mmsi = 231000000 + i
        if i < n_containers:
            cls, code = VesselClass.CONTAINER, 72
            length = int(rng.integers(120, 200))
            beam = int(rng.integers(18, 30))
            design = round(float(rng.uniform(8.0, 12.0)) * 10) / 10.0
        else:
            cls, code, l_rng, b_rng, d_rng = _DRAUGHT_CLASSES[
                i % len(_DRAUGHT_CLASSES)
            ]
            length = int(rng.integers(*l_rng))
            beam = int(rng.integers(*b_rng))
            design = round(float(rng.uniform(*d_rng)) * 10) / 10.0
        ballast = round(0.4 * design * 10) / 10.0
        bow = length // 2
        vessel = SynthVessel(
            mmsi=mmsi,
            vessel_class=cls,
            ship_type_code=code,
            dim_bow=bow,
            dim_stern=length - bow,
            dim_port=beam // 2,
            dim_star=beam - beam // 2,
            design_draught=design,
            ballast_draught=ballast,
            dwt=estimate_capacity(cls, length, beam, design),
            utilization_rate=utilization[cls],
        )
        fleet.append(vessel)
    return fleet


def _interp(p0, p1, f):
    return (p0[0] + (p1[0] - p0[0]) * f, p0[1] + (p1[1] - p0[1]) * f)


def emit_timeline(
    vessel: SynthVessel,
    ports: list[SynthPort],
    cargo_fractions: list[float],
    t_start: float,
    dwell_s: float = 6 * 3600.0,
    transit_kn: float = 12.0,
    interval_s: float = 1800.0,
    departure_grid_s: Optional[float] = None,
    static_repeat_s: float = 12 * 3600.0,
) -> VesselTimeline:
    """Walk a vessel through alternating load/discharge visits.

    ports[2k] is the load port and ports[2k+1] the discharge port of leg
    k; cargo_fractions[k] is the carried fraction of deadweight.  With a
    departure grid, load departures snap up to the next grid instant
    (berth waits stretch as needed).  Ground-truth visits carry the exact
    cargo tonnes; reported draughts are quantized to 0.1 m.
    """
    assert len(ports) == 2 * len(cargo_fractions)
    speed_deg_h = transit_kn / KNOTS_PER_DEG_H
    is_container = vessel.vessel_class is VesselClass.CONTAINER
    half_util = vessel.dwt * vessel.utilization_rate * 0.5

    segments = []  # (t0, t1, p0, p1, sog)
    draught_events: list[tuple[float, float]] = []
    visits: list[Visit] = []

    start_pos = (ports[0].lon, ports[0].lat + 1.2)
    draught_events.append((t_start, vessel.ballast_draught))
    draught_events.append((t_start + interval_s, vessel.ballast_draught))
    t = t_start
    pos = start_pos
    current_draught = vessel.ballast_draught

    def sail_to(port: SynthPort, t_from: float, from_pos) -> float:
        dist = math.hypot(port.lon - from_pos[0], port.lat - from_pos[1])
        hours = dist / speed_deg_h
        t_arr = t_from + hours * 3600.0
        segments.append((t_from, t_arr, from_pos, (port.lon, port.lat), transit_kn))
        return t_arr

    for leg, fraction in enumerate(cargo_fractions):
        load_port, discharge_port = ports[2 * leg], ports[2 * leg + 1]
        cargo = fraction * vessel.dwt
        laden = vessel.laden_draught(fraction)

        t_arr = sail_to(load_port, t, pos)
        t_dep = t_arr + dwell_s
        if departure_grid_s is not None:
            k = math.ceil((t_dep - t_start) / departure_grid_s)
            t_dep = max(t_dep, t_start + k * departure_grid_s)
        segments.append((t_arr, t_dep, (load_port.lon, load_port.lat),
                         (load_port.lon, load_port.lat), 0.2))
        visits.append(
            Visit(
                mmsi=vessel.mmsi,
                port_id=load_port.port_id,
                country=load_port.country,
                arrival=t_arr,
                departure=t_dep,
                export_tonnes=half_util if is_container else cargo,
                import_tonnes=half_util if is_container else 0.0,
            )
        )
        draught_events.append((t_dep + 3600.0, laden))
        draught_events.append((t_dep + 5400.0, laden))
        current_draught = laden

        t_arr2 = sail_to(discharge_port, t_dep, (load_port.lon, load_port.lat))
        t_dep2 = t_arr2 + dwell_s
        segments.append((t_arr2, t_dep2, (discharge_port.lon, discharge_port.lat),
                         (discharge_port.lon, discharge_port.lat), 0.2))
        visits.append(
            Visit(
                mmsi=vessel.mmsi,
                port_id=discharge_port.port_id,
                country=discharge_port.country,
                arrival=t_arr2,
                departure=t_dep2,
                export_tonnes=half_util if is_container else 0.0,
                import_tonnes=half_util if is_container else cargo,
            )
        )
        draught_events.append((t_dep2 + 3600.0, vessel.ballast_draught))
        draught_events.append((t_dep2 + 5400.0, vessel.ballast_draught))
        current_draught = vessel.ballast_draught
        t = t_dep2
        pos = (discharge_port.lon, discharge_port.lat)

    t_end = t + 2 * 3600.0
    segments.append((t, t_end, pos, (pos[0], pos[1] + 0.5), transit_kn))

    # position reports on the fixed grid
    positions = []
    k0 = math.ceil((segments[0][0] - t_start) / interval_s)
    t_report = t_start + k0 * interval_s
    seg_i = 0
    while t_report <= t_end and seg_i < len(segments):
        t0, t1, p0, p1, sog = segments[seg_i]
        if t_report > t1:
            seg_i += 1
            continue
        if t_report >= t0:
            f = 0.0 if t1 == t0 else (t_report - t0) / (t1 - t0)
            lon, lat = _interp(p0, p1, f)
            positions.append(
                PositionReport(
                    mmsi=vessel.mmsi,
                    timestamp=t_report,
                    latitude=lat,
                    longitude=lon,
                    speed_over_ground=sog,
                    course=0.0,
                    msg_type=1,
                    second=int(t_report) % 60,
                )
            )
        t_report += interval_s

    # draught events plus a periodic repeat of the prevailing draught
    events = sorted(draught_events)
    all_events: dict[float, float] = {}
    for when, value in events:
        all_events[when] = value
    t_rep = t_start + static_repeat_s
    while t_rep < t_end:
        prevailing = events[0][1]
        for when, value in events:
            if when <= t_rep:
                prevailing = value
            else:
                break
        all_events.setdefault(t_rep, prevailing)
        t_rep += static_repeat_s
    statics = [
        StaticVoyageReport(
            mmsi=vessel.mmsi,
            imo=5000000 + vessel.mmsi % 1000000,
            ship_type_code=vessel.ship_type_code,
            dim_to_bow=vessel.dim_bow,
            dim_to_stern=vessel.dim_stern,
            dim_to_port=vessel.dim_port,
            dim_to_starboard=vessel.dim_star,
            draught=value,
            destination="NEXT PORT",
            name=f"SYN {vessel.mmsi}",
            msg_type=5,
            timestamp=when,
        )
        for when, value in sorted(all_events.items())
    ]
    return VesselTimeline(vessel=vessel, positions=positions, statics=statics, visits=visits)


@dataclass
class VoyageWorld:
    ports: list[SynthPort]
    geofences: list[PortGeofence]
    fleet: list[SynthVessel]
    timelines: list[VesselTimeline]
    port_country: dict[str, str] = field(default_factory=dict)

    def truth_calls(self) -> list[Visit]:
        return [v for tl in self.timelines for v in tl.visits]

    def truth_country_totals(self) -> dict[tuple[str, str], float]:
        """(country, direction) -> ground-truth tonnes."""
        totals: dict[tuple[str, str], float] = {}
        for visit in self.truth_calls():
            for direction, tonnes in (
                (EXPORT, visit.export_tonnes),
                (IMPORT, visit.import_tonnes),
            ):
                if tonnes > 0:
                    key = (visit.country, direction)
                    totals[key] = totals.get(key, 0.0) + tonnes
        return totals


def make_port_grid(n_countries: int, ports_per_country: int) -> list[SynthPort]:
    """Countries on a ring (so every hop stays short), ports stacked in
    latitude within each country."""
    ring = [(0.0, 10.0), (6.0, 10.0), (6.0, 17.0), (0.0, 17.0),
            (-6.0, 17.0), (-6.0, 10.0), (12.0, 10.0), (12.0, 17.0)]
    ports = []
    for c in range(n_countries):
        country = "".join(chr(ord("A") + (c + offset) % 26) for offset in (0, c % 3, 2 * c % 5))
        base_lon, base_lat = ring[c % len(ring)]
        for p in range(ports_per_country):
            ports.append(
                SynthPort(
                    port_id=f"{country}{p + 1}",
                    name=f"Port {country}{p + 1}",
                    country=country,
                    lon=base_lon + 18.0 * (c // len(ring)),
                    lat=base_lat + 2.5 * p,
                )
            )
    return ports


# =====================================================================
# planted regression panel
# =====================================================================

# Planted coefficient values for recovery experiments (percent units for
# the dependent variable, policies on their 0-1 scale, partner
# stringency on 0-100).
PLANTED_BETAS = {
    "C1": -1.97,
    "C2": -4.7,
    "C3": 0.56,
    "C4": -0.61,
    "C5": -3.59,
    "C6": 2.05,
    "C7": 2.17,
    "C8": 1.82,
    "H2": 0.89,
    "Demand": -0.033,
    "Cases": -0.113,
    "Supply": 0.018,
    "Export lag": 0.35,
}


def make_planted_panel(
    n_countries: int,
    n_days: int,
    seed: int,
    betas: Optional[dict[str, float]] = None,
    noise_sd: float = 5.0,
    start: dt.date = dt.date(2020, 1, 1),
    supply_lag: int = 7,
    export_lag: int = 3,
) -> tuple[dict[str, np.ndarray], dict[str, CountryControls], list[dt.date]]:
    """Generate a country-day panel exactly obeying the export-change
    equation with known coefficients.

    Policies are staggered step functions (distinct onsets per country),
    cases grow geometrically from a random outbreak day, and the supply
    regressor is handed over already lagged, with a NaN head, the way the
    pipeline delivers it.  Every generated y_t for t >= export_lag
    satisfies the planted linear equation exactly up to the drawn noise.
    """
    if betas is None:
        betas = PLANTED_BETAS
    rng = np.random.default_rng(seed)
    days = [start + dt.timedelta(days=k) for k in range(n_days)]
    population = 1e7
    change: dict[str, np.ndarray] = {}
    controls: dict[str, CountryControls] = {}
    for c in range(n_countries):
        country = f"{chr(ord('A') + c // 26)}{chr(ord('A') + c % 26)}X"
        policies = {}
        for name in POLICY_NAMES:
            onset = int(rng.integers(int(0.15 * n_days), int(0.6 * n_days)))
            level = int(rng.integers(1, POLICY_MAX_LEVELS[name] + 1))
            raw = np.zeros(n_days)
            raw[onset:] = level
            relax = int(rng.integers(onset, n_days))
            if rng.random() < 0.3:
                raw[relax:] = max(0, level - 1)
            policies[name] = raw / POLICY_MAX_LEVELS[name]
        composite = composite_stringency(
            np.vstack([policies[p] for p in COMPOSITE_POLICIES])
        )
        demand = np.clip(50 + np.cumsum(rng.normal(0, 2.0, n_days)), 0, 100)
        outbreak_day = int(rng.integers(int(0.2 * n_days), int(0.7 * n_days)))
        cumulative = np.zeros(n_days)
        growth = rng.uniform(1.15, 1.35)
        for t in range(outbreak_day, n_days):
            cumulative[t] = min(
                0.05 * population, max(1.0, cumulative[t - 1]) * growth
            )
        cases_pct = 100.0 * cumulative / population
        supply_raw = rng.normal(0, 10.0, n_days)
        supply = np.full(n_days, np.nan)
        supply[supply_lag:] = supply_raw[: n_days - supply_lag]

        mu = float(rng.normal(0, 3.0))
        eps = rng.normal(0, noise_sd, n_days) if noise_sd > 0 else np.zeros(n_days)
        y = np.zeros(n_days)
        for t in range(n_days):
            level = mu + eps[t]
            for name in POLICY_NAMES:
                level += betas[name] * policies[name][t]
            level += betas["Demand"] * demand[t]
            level += betas["Cases"] * cases_pct[t]
            if t >= supply_lag:
                level += betas["Supply"] * supply[t]
            if t >= export_lag:
                level += betas["Export lag"] * y[t - export_lag]
            y[t] = level

        change[country] = y
        controls[country] = CountryControls(
            country=country,
            start=start,
            policies=policies,
            composite=composite,
            demand=demand,
            cases=cases_pct,
            supply=supply,
            cumulative_cases=cumulative,
        )
    return change, controls, days


def make_voyage_world(
    n_vessels: int,
    legs_per_vessel: int,
    seed: int,
    n_countries: int = 5,
    ports_per_country: int = 2,
    container_share: float = 0.1,
    interval_s: float = 1800.0,
    start_epoch: float = EPOCH_2019,
) -> VoyageWorld:
    """Random chained voyages: every vessel's first leg is a full load
    (so its observed draughts span the whole ballast-design range) and
    the load port of each leg differs from the previous discharge port."""
    rng = np.random.default_rng(seed)
    ports = make_port_grid(n_countries, ports_per_country)
    fleet = make_fleet(n_vessels, rng, container_share)
    timelines = []
    for v_idx, vessel in enumerate(fleet):
        order: list[SynthPort] = []
        prev = None
        for _leg in range(legs_per_vessel):
            choices = [p for p in ports if p is not prev]
            load = choices[int(rng.integers(0, len(choices)))]
            choices2 = [p for p in ports if p is not load and p.country != load.country]
            discharge = choices2[int(rng.integers(0, len(choices2)))]
            order.extend([load, discharge])
            prev = discharge
        fractions = [
            1.0 if k == 0 else float(np.floor(rng.uniform(0.30, 0.95) * 100) / 100)
            for k in range(legs_per_vessel)
        ]
        t0 = start_epoch + float(v_idx % 16) * 3 * 3600.0
        timelines.append(
            emit_timeline(vessel, order, fractions, t0, interval_s=interval_s)
        )
    return VoyageWorld(
        ports=ports,
        geofences=[p.fence() for p in ports],
        fleet=fleet,
        timelines=timelines,
        port_country={p.port_id: p.country for p in ports},
    )
