"""Port calls -> dated, directed, sector-split trade flows.

The draught change across a call is read through a linear draught-to-
payload model: payload 0 at ballast draught, full deadweight at design
draught.  Deeper in than out means cargo was discharged (an import);
deeper out than in means cargo was loaded (an export).  Container trades
and calls without usable draughts fall back to a symmetric utilization
assumption.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional

import numpy as np

from .fleet_registry import VesselClass, VesselRecord
from .port_call import PortCall

SECTORS = (
    "Agriculture",
    "Fishing",
    "Mining and quarrying",
    "Food and beverages",
    "Textiles and wearing apparel",
    "Wood and paper",
    "Petroleum, chemical and non-metallic mineral products",
    "Metal products",
    "Electrical and machinery",
    "Transport equipment",
    "Other manufacturing",
)
N_SECTORS = len(SECTORS)

IMPORT = "import"
EXPORT = "export"


class EstimatorError(Exception):
    pass


class UnknownDraught(EstimatorError):
    pass


class Unestimable(EstimatorError):
    pass


class MissingAllocationRow(EstimatorError):
    pass


class AllocationFormatError(EstimatorError):
    pass


@dataclass(frozen=True)
class TradeFlow:
    port_id: str
    country: str
    date: dt.date
    direction: str  # IMPORT or EXPORT
    sector: int  # 1..11
    tonnes: float
    value_usd: float


class SectorAllocation:
    """Vessel class -> fractional tonnage split over the 11 sectors."""

    def __init__(self, rows: dict[VesselClass, np.ndarray]):
        for cls, row in rows.items():
            if row.shape != (N_SECTORS,):
                raise AllocationFormatError(f"{cls.value}: row length {row.shape}")
            if (row < 0).any():
                raise AllocationFormatError(f"{cls.value}: negative fraction")
            if abs(row.sum() - 1.0) > 1e-9:
                raise AllocationFormatError(
                    f"{cls.value}: row sums to {row.sum()!r}, not 1"
                )
        self.rows = rows

    def row(self, vessel_class: VesselClass) -> np.ndarray:
        try:
            return self.rows[vessel_class]
        except KeyError:
            raise MissingAllocationRow(vessel_class.value)

    @classmethod
    def from_text(cls, text: str) -> "SectorAllocation":
        lines = [
            ln.split("\t")
            for ln in text.splitlines()
            if ln and not ln.startswith("#")
        ]
        header = ["vessel_class"] + [f"s{i}" for i in range(1, N_SECTORS + 1)]
        if not lines or lines[0] != header:
            raise AllocationFormatError(f"bad header {lines[0] if lines else None}")
        rows = {}
        for parts in lines[1:]:
            rows[VesselClass(parts[0])] = np.array(
                [float(v) for v in parts[1:]], dtype=float
            )
        return cls(rows)

    @classmethod
    def bundled(cls) -> "SectorAllocation":
        text = resources.files("seatrade").joinpath(
            "data/class_sector_allocation.tsv"
        ).read_text()
        return cls.from_text(text)


class PriceTable:
    """USD per tonne for each sector; all prices strictly positive."""

    def __init__(self, prices: dict[int, float]):
        if set(prices) != set(range(1, N_SECTORS + 1)):
            raise EstimatorError(f"price table must cover sectors 1..{N_SECTORS}")
        for sector, price in prices.items():
            if price <= 0:
                raise EstimatorError(f"sector {sector}: price {price} <= 0")
        self.prices = prices

    def __getitem__(self, sector: int) -> float:
        return self.prices[sector]


def estimate_payload(vessel: VesselRecord, draught: Optional[float]) -> float:
    """Tonnes on board implied by a draught reading.

    Linear between ballast (payload 0) and design draught (payload dwt),
    clamped to [0, dwt].
    """
    if draught is None:
        raise UnknownDraught(f"mmsi {vessel.mmsi}")
    spread = vessel.design_draught - vessel.ballast_draught
    frac = (draught - vessel.ballast_draught) / spread
    return vessel.dwt * min(1.0, max(0.0, frac))


def estimate_flow(call: PortCall, vessel: VesselRecord) -> tuple[float, float]:
    """(import_tonnes, export_tonnes) for one call.

    Draught mode: the payload difference across the call; utilization
    mode (containers, or unusable draughts) books half the assumed
    carried tonnage in each direction.
    """
    draught_mode = (
        vessel.vessel_class is not VesselClass.CONTAINER
        and call.draught_in is not None
        and call.draught_out is not None
    )
    if draught_mode:
        delta = estimate_payload(vessel, call.draught_in) - estimate_payload(
            vessel, call.draught_out
        )
        if delta > 0:
            return delta, 0.0
        if delta < 0:
            return 0.0, -delta
        return 0.0, 0.0
    if vessel.utilization_rate is None:
        raise Unestimable(f"mmsi {vessel.mmsi}: no draughts, no utilization rate")
    half = vessel.dwt * vessel.utilization_rate * 0.5
    return half, half


def disaggregate(
    tonnes: float,
    port_id: str,
    country: str,
    date: dt.date,
    direction: str,
    vessel_class: VesselClass,
    allocation: SectorAllocation,
    prices: PriceTable,
) -> list[TradeFlow]:
    """Split one flow across sectors by the class allocation row."""
    row = allocation.row(vessel_class)
    flows = []
    for idx in range(N_SECTORS):
        if row[idx] == 0.0:
            continue
        sector = idx + 1
        sector_tonnes = tonnes * row[idx]
        flows.append(
            TradeFlow(
                port_id=port_id,
                country=country,
                date=date,
                direction=direction,
                sector=sector,
                tonnes=sector_tonnes,
                value_usd=sector_tonnes * prices[sector],
            )
        )
    return flows


def flow_date(call: PortCall, direction: str, date_by_arrival_for_imports: bool = False) -> dt.date:
    """Calendar day a call's flow is booked under (UTC departure day by
    default; imports may be switched to the arrival day)."""
    epoch = call.arrival if (direction == IMPORT and date_by_arrival_for_imports) else call.departure
    return dt.datetime.fromtimestamp(epoch, tz=dt.timezone.utc).date()


def flows_from_call(
    call: PortCall,
    vessel: VesselRecord,
    port_country: dict[str, str],
    allocation: SectorAllocation,
    prices: PriceTable,
    date_by_arrival_for_imports: bool = False,
) -> list[TradeFlow]:
    """All sector flows implied by one call, both directions."""
    imports, exports = estimate_flow(call, vessel)
    country = port_country[call.port_id]
    out: list[TradeFlow] = []
    for direction, tonnes in ((IMPORT, imports), (EXPORT, exports)):
        if tonnes <= 0.0:
            continue
        out.extend(
            disaggregate(
                tonnes,
                call.port_id,
                country,
                flow_date(call, direction, date_by_arrival_for_imports),
                direction,
                vessel.vessel_class,
                allocation,
                prices,
            )
        )
    return out


@dataclass
class DailySeries:
    entity: str
    start: dt.date
    values: np.ndarray  # one cell per day, contiguous

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self.values))]


def aggregate_daily(
    flows: Iterable[TradeFlow],
    level: str,
    start: dt.date,
    end: dt.date,
) -> dict[tuple[str, str, int], DailySeries]:
    """Sum flows per (entity, direction, sector) onto a daily grid.

    `level` is 'port' or 'country'.  Days without flows are zero.  The
    accumulation runs in sorted key order so repeated runs (any thread
    count upstream) produce bit-identical series.
    """
    if level not in ("port", "country"):
        raise EstimatorError(f"level {level!r}")
    n_days = (end - start).days + 1
    if n_days <= 0:
        raise EstimatorError("empty date range")
    keyed: dict[tuple[str, str, int], list[tuple[int, float]]] = {}
    for flow in flows:
        offset = (flow.date - start).days
        if not 0 <= offset < n_days:
            continue
        entity = flow.port_id if level == "port" else flow.country
        keyed.setdefault((entity, flow.direction, flow.sector), []).append(
            (offset, flow.tonnes)
        )
    out: dict[tuple[str, str, int], DailySeries] = {}
    for key in sorted(keyed):
        values = np.zeros(n_days)
        for offset, tonnes in sorted(keyed[key]):
            values[offset] += tonnes
        out[key] = DailySeries(entity=key[0], start=start, values=values)
    return out


def combine_sectors(
    series: dict[tuple[str, str, int], DailySeries],
    entity: str,
    direction: str,
    n_days: int,
    start: dt.date,
) -> DailySeries:
    """Total across sectors for one entity and direction."""
    total = np.zeros(n_days)
    for (ent, direc, _sector), s in sorted(series.items()):
        if ent == entity and direc == direction:
            total += s.values
    return DailySeries(entity=entity, start=start, values=total)
