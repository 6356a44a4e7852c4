"""Consolidate static AIS reports into one vessel record per MMSI.

A vessel record carries the trading class, hull dimensions, an estimated
deadweight tonnage and the ballast/design draught pair that anchors the
linear draught-to-payload model.  Class-level coefficients live in
editable delimited tables bundled under seatrade/data/.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

import numpy as np

SEAWATER_DENSITY = 1.025  # t/m3

# Reported draughts are manual entries; percentile endpoints resist the
# occasional fat-fingered value.  'higher'/'lower' interpolation pins the
# endpoints to actually-observed draughts.
DESIGN_DRAUGHT_PERCENTILE = 98
BALLAST_DRAUGHT_PERCENTILE = 2
BALLAST_FLOOR_FRACTION = 0.35
DIMENSION_CONFLICT_RATIO = 1.2  # >20% disagreement flags the identity


class RegistryError(Exception):
    pass


class MissingDimensions(RegistryError):
    pass


class TableFormatError(RegistryError):
    pass


class VesselClass(enum.Enum):
    BULK_CARRIER = "bulk_carrier"
    CRUDE_TANKER = "crude_tanker"
    PRODUCT_TANKER = "product_tanker"
    LNG_LPG = "lng_lpg"
    CONTAINER = "container"
    GENERAL_CARGO = "general_cargo"
    VEHICLE_CARRIER = "vehicle_carrier"
    REEFER = "reefer"
    OTHER_CARGO = "other_cargo"


@dataclass
class ClassCoefficients:
    block_coefficient: float
    deadweight_share: float


@dataclass
class VesselRecord:
    mmsi: int
    vessel_class: VesselClass
    length: float
    beam: float
    design_draught: float
    ballast_draught: float
    dwt: float
    utilization_rate: float
    draught_history: list[tuple[float, float]] = field(default_factory=list)

    def validate(self) -> None:
        if not (0 < self.ballast_draught < self.design_draught):
            raise RegistryError(
                f"mmsi {self.mmsi}: ballast {self.ballast_draught} vs "
                f"design {self.design_draught}"
            )
        if self.dwt <= 0:
            raise RegistryError(f"mmsi {self.mmsi}: dwt {self.dwt}")
        if not (0 < self.utilization_rate <= 1):
            raise RegistryError(
                f"mmsi {self.mmsi}: utilization {self.utilization_rate}"
            )
        times = [t for t, _ in self.draught_history]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise RegistryError(f"mmsi {self.mmsi}: draught history not increasing")


def _read_data_table(name: str, expected_header: list[str]) -> list[list[str]]:
    text = resources.files("seatrade").joinpath(f"data/{name}").read_text()
    rows = [
        line.split("\t")
        for line in text.splitlines()
        if line and not line.startswith("#")
    ]
    if not rows or rows[0] != expected_header:
        raise TableFormatError(f"{name}: header {rows[0] if rows else 'missing'}")
    return rows[1:]


def load_type_class_table() -> dict[int, Optional[VesselClass]]:
    """AIS ship-type code (0-99) -> trading class, None for non-trading."""
    mapping: dict[int, Optional[VesselClass]] = {code: None for code in range(100)}
    for code_s, class_s in _read_data_table(
        "ship_type_classes.tsv", ["ship_type_code", "vessel_class"]
    ):
        code = int(code_s)
        if not 0 <= code <= 99:
            raise TableFormatError(f"ship type code {code} out of range")
        mapping[code] = VesselClass(class_s)
    return mapping


def load_class_coefficients() -> dict[VesselClass, ClassCoefficients]:
    out = {}
    for cls_s, cb_s, share_s in _read_data_table(
        "class_coefficients.tsv",
        ["vessel_class", "block_coefficient", "deadweight_share"],
    ):
        cb, share = float(cb_s), float(share_s)
        if not (0 < cb <= 1 and 0 < share <= 1):
            raise TableFormatError(f"{cls_s}: coefficients out of (0,1]")
        out[VesselClass(cls_s)] = ClassCoefficients(cb, share)
    if set(out) != set(VesselClass):
        raise TableFormatError("class coefficient table must cover every class")
    return out


def load_class_utilization() -> dict[VesselClass, float]:
    out = {}
    for cls_s, rate_s in _read_data_table(
        "class_utilization.tsv", ["vessel_class", "utilization_rate"]
    ):
        rate = float(rate_s)
        if not 0 < rate <= 1:
            raise TableFormatError(f"{cls_s}: utilization {rate} out of (0,1]")
        out[VesselClass(cls_s)] = rate
    if set(out) != set(VesselClass):
        raise TableFormatError("utilization table must cover every class")
    return out


_TYPE_CLASS: Optional[dict[int, Optional[VesselClass]]] = None


def classify(ship_type_code: int) -> Optional[VesselClass]:
    """Map an AIS ship-type code to a trading class (None = non-trading).

    Total over 0..99; driven by the bundled mapping table.
    """
    global _TYPE_CLASS
    if _TYPE_CLASS is None:
        _TYPE_CLASS = load_type_class_table()
    if not 0 <= ship_type_code <= 99:
        return None
    return _TYPE_CLASS[ship_type_code]


def estimate_capacity(
    vessel_class: VesselClass,
    length: float,
    beam: float,
    design_draught: float,
    coefficients: Optional[dict[VesselClass, ClassCoefficients]] = None,
) -> float:
    """Deadweight tonnage from hull dimensions.

    dwt = rho * c_b * L * B * T_design * deadweight_share, with class
    coefficients from the bundled table.  Linear in every dimension.
    """
    if coefficients is None:
        coefficients = load_class_coefficients()
    if length <= 0 or beam <= 0 or design_draught <= 0:
        raise MissingDimensions(
            f"L={length} B={beam} T={design_draught}"
        )
    c = coefficients[vessel_class]
    return (
        SEAWATER_DENSITY
        * c.block_coefficient
        * length
        * beam
        * design_draught
        * c.deadweight_share
    )


def _modal(values: Iterable):
    counts = Counter(values)
    # most common; ties broken toward the smallest value for determinism
    return min(counts, key=lambda v: (-counts[v], v))


@dataclass
class RegistryBuild:
    records: dict[int, VesselRecord]
    conflicts: list[int]
    skipped_non_trading: int
    skipped_no_dimensions: int


def merge_static(
    reports: Iterable,
    coefficients: Optional[dict[VesselClass, ClassCoefficients]] = None,
    utilization: Optional[dict[VesselClass, float]] = None,
) -> RegistryBuild:
    """Reduce static reports into one VesselRecord per MMSI.

    Dimensions take the modal reported value; the design draught is the
    98th percentile of reported draughts and the ballast draught the 2nd
    percentile floored at 0.35 x design.  The reduction sorts its input,
    so any permutation of the report stream yields identical records.
    """
    if coefficients is None:
        coefficients = load_class_coefficients()
    if utilization is None:
        utilization = load_class_utilization()

    by_mmsi: dict[int, list] = defaultdict(list)
    for report in reports:
        by_mmsi[report.mmsi].append(report)

    records: dict[int, VesselRecord] = {}
    conflicts: list[int] = []
    skipped_non_trading = 0
    skipped_no_dims = 0

    for mmsi in sorted(by_mmsi):
        group = sorted(
            by_mmsi[mmsi],
            key=lambda r: (
                r.timestamp if r.timestamp is not None else 0.0,
                r.length,
                r.beam,
                r.draught if r.draught is not None else -1.0,
            ),
        )
        dims = [(r.length, r.beam) for r in group if r.length > 0 and r.beam > 0]
        type_codes = [r.ship_type_code for r in group if r.ship_type_code is not None]
        if not dims or not type_codes:
            skipped_no_dims += 1
            continue
        vessel_class = classify(_modal(type_codes))
        if vessel_class is None:
            skipped_non_trading += 1
            continue
        length, beam = _modal(dims)
        lengths = [d[0] for d in dims]
        beams = [d[1] for d in dims]
        if (
            max(lengths) > DIMENSION_CONFLICT_RATIO * min(lengths)
            or max(beams) > DIMENSION_CONFLICT_RATIO * min(beams)
        ):
            conflicts.append(mmsi)

        history: list[tuple[float, float]] = []
        seen_times = set()
        for r in group:
            if r.draught is None or r.timestamp is None:
                continue
            if r.timestamp in seen_times:
                continue
            seen_times.add(r.timestamp)
            history.append((r.timestamp, r.draught))
        history.sort()

        draughts = sorted(r.draught for r in group if r.draught is not None)
        if draughts:
            design = float(
                np.percentile(draughts, DESIGN_DRAUGHT_PERCENTILE, method="higher")
            )
            ballast = float(
                np.percentile(draughts, BALLAST_DRAUGHT_PERCENTILE, method="lower")
            )
        else:
            # no draught information at all: fall back to a hull-typical pair
            design = 0.55 * beam if beam > 0 else 0.0
            ballast = 0.0
        if design <= 0:
            skipped_no_dims += 1
            continue
        ballast = max(ballast, BALLAST_FLOOR_FRACTION * design)
        if ballast >= design:
            # degenerate spread (single draught value): widen symmetrically
            ballast = BALLAST_FLOOR_FRACTION * design

        try:
            dwt = estimate_capacity(vessel_class, length, beam, design, coefficients)
        except MissingDimensions:
            skipped_no_dims += 1
            continue

        record = VesselRecord(
            mmsi=mmsi,
            vessel_class=vessel_class,
            length=float(length),
            beam=float(beam),
            design_draught=design,
            ballast_draught=ballast,
            dwt=dwt,
            utilization_rate=utilization[vessel_class],
            draught_history=history,
        )
        record.validate()
        records[mmsi] = record

    return RegistryBuild(
        records=records,
        conflicts=conflicts,
        skipped_non_trading=skipped_non_trading,
        skipped_no_dimensions=skipped_no_dims,
    )
