"""Loading, validation and persistence for every dataset the pipeline
touches.

All persistence is delimited text with explicit headers; intermediate
stores round-trip losslessly (floats are written with repr so they parse
back bit-identical).  Each stage's outputs are recorded in a plain
key-value manifest with content checksums; manifests carry no wall-clock
fields so reruns on identical inputs are byte-identical.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .ais_decoder import PositionReport, StaticVoyageReport
from .controls_builder import POLICY_MAX_LEVELS, POLICY_NAMES
from .fleet_registry import VesselClass, VesselRecord
from .io_linkages import MrioTable
from .port_call import PortCall, PortGeofence
from .trade_estimator import IMPORT, EXPORT, N_SECTORS, SECTORS, DailySeries, PriceTable, TradeFlow


class StoreError(Exception):
    pass


class SchemaMismatch(StoreError):
    pass


class RangeViolation(StoreError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class NegativeValue(StoreError):
    pass


class UnknownCountryCode(StoreError):
    pass


_ISO3_RE = re.compile(r"^[A-Z]{3}$")


def load_iso3_aliases() -> dict[str, str]:
    text = resources.files("seatrade").joinpath("data/iso3_aliases.tsv").read_text()
    rows = [
        ln.split("\t") for ln in text.splitlines() if ln and not ln.startswith("#")
    ]
    if rows[0] != ["alias", "iso3"]:
        raise SchemaMismatch("iso3 alias table header")
    return {alias: iso3 for alias, iso3 in rows[1:]}


def normalize_country(code: str, aliases: Optional[dict[str, str]] = None) -> str:
    if aliases is None:
        aliases = load_iso3_aliases()
    c = code.strip().upper()
    c = aliases.get(c, c)
    if not _ISO3_RE.match(c):
        raise UnknownCountryCode(repr(code))
    return c


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _opt_float(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def write_tsv(path, schema: str, version: int, header: list[str], rows: Iterable[list]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema: {schema} v{version}\n")
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(cell) for cell in row) + "\n")


def read_tsv(path, schema: str, header: list[str]) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(f"# schema: {schema} v"):
        raise SchemaMismatch(f"{path}: expected schema {schema!r}")
    if len(lines) < 2 or lines[1].split("\t") != header:
        raise SchemaMismatch(f"{path}: header mismatch")
    return [line.split("\t") for line in lines[2:] if line]


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class DatasetManifest:
    kind: str
    path: str
    schema_version: int
    row_count: int
    checksum: str


def write_manifest(path, entries: list[DatasetManifest], config: Optional[dict] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for e in sorted(entries, key=lambda e: e.kind):
        lines.append(f"{e.kind}.path={e.path}")
        lines.append(f"{e.kind}.schema_version={e.schema_version}")
        lines.append(f"{e.kind}.rows={e.row_count}")
        lines.append(f"{e.kind}.sha256={e.checksum}")
    if config:
        for key in sorted(config):
            lines.append(f"config.{key}={config[key]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key] = value
    return out


def manifest_entry(kind: str, path, schema_version: int, row_count: int) -> DatasetManifest:
    return DatasetManifest(
        kind=kind,
        path=str(Path(path).name),
        schema_version=schema_version,
        row_count=row_count,
        checksum=sha256_file(path),
    )


# ---------------------------------------------------------------- policy

POLICY_HEADER = (
    ["CountryCode", "Date"] + list(POLICY_NAMES) + ["ConfirmedCases", "StringencyIndex"]
)


@dataclass
class PolicyRow:
    country: str
    date: dt.date
    levels: dict[str, Optional[float]]  # raw ordinal level per policy
    confirmed: Optional[float]
    stringency: Optional[float]  # 0-100 source scale


def load_policy_snapshot(path) -> list[PolicyRow]:
    """Tracker-format snapshot: one row per (country, day), levels
    range-checked against the ordinal maxima.  Row-level violations are
    collected and reported together."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0].split("\t") != POLICY_HEADER:
        raise SchemaMismatch(f"{path}: policy header mismatch")
    aliases = load_iso3_aliases()
    rows: list[PolicyRow] = []
    violations: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(POLICY_HEADER):
            violations.append(f"row {lineno}: {len(parts)} fields")
            continue
        try:
            country = normalize_country(parts[0], aliases)
        except UnknownCountryCode:
            violations.append(f"row {lineno}: country {parts[0]!r}")
            continue
        try:
            date = dt.datetime.strptime(parts[1], "%Y%m%d").date()
        except ValueError:
            violations.append(f"row {lineno}: date {parts[1]!r}")
            continue
        levels: dict[str, Optional[float]] = {}
        ok = True
        for name, cell in zip(POLICY_NAMES, parts[2:11]):
            if cell == "":
                levels[name] = None
                continue
            value = float(cell)
            if not 0 <= value <= POLICY_MAX_LEVELS[name]:
                violations.append(
                    f"row {lineno}: {name} level {value} outside "
                    f"[0, {POLICY_MAX_LEVELS[name]}]"
                )
                ok = False
                break
            levels[name] = value
        if not ok:
            continue
        confirmed = _opt_float(parts[11])
        if confirmed is not None and confirmed < 0:
            violations.append(f"row {lineno}: negative cases")
            continue
        stringency = _opt_float(parts[12])
        rows.append(
            PolicyRow(
                country=country,
                date=date,
                levels=levels,
                confirmed=confirmed,
                stringency=stringency,
            )
        )
    if violations:
        raise RangeViolation(violations)
    return rows


# ------------------------------------------------------------- bilateral

BILATERAL_HEADER = ["exporter_iso3", "importer_iso3", "export_value_usd"]


def load_bilateral(path) -> dict[str, dict[str, float]]:
    """Bilateral export values -> per-exporter partner weight fractions."""
    lines = [
        ln
        for ln in Path(path).read_text(encoding="utf-8").splitlines()
        if ln and not ln.startswith("#")
    ]
    if not lines or lines[0].split("\t") != BILATERAL_HEADER:
        raise SchemaMismatch(f"{path}: bilateral header mismatch")
    aliases = load_iso3_aliases()
    values: dict[str, dict[str, float]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        exporter_s, importer_s, value_s = line.split("\t")
        value = float(value_s)
        if value < 0:
            raise NegativeValue(f"row {lineno}: {value}")
        exporter = normalize_country(exporter_s, aliases)
        importer = normalize_country(importer_s, aliases)
        values.setdefault(exporter, {})
        values[exporter][importer] = values[exporter].get(importer, 0.0) + value
    weights: dict[str, dict[str, float]] = {}
    for exporter in sorted(values):
        total = sum(values[exporter].values())
        if total <= 0:
            continue
        w = {imp: v / total for imp, v in sorted(values[exporter].items())}
        assert abs(sum(w.values()) - 1.0) <= 1e-9
        weights[exporter] = w
    return weights


# ------------------------------------------------------------------ mrio

MRIO_SECTOR_HEADER = list(SECTORS)


def _read_matrix(path) -> np.ndarray:
    lines = [
        ln
        for ln in Path(path).read_text(encoding="utf-8").splitlines()
        if ln and not ln.startswith("#")
    ]
    if not lines or lines[0].split("\t") != MRIO_SECTOR_HEADER:
        raise SchemaMismatch(f"{path}: sector header must match the canonical list")
    rows = [[float(v) for v in ln.split("\t")] for ln in lines[1:]]
    m = np.array(rows, dtype=float)
    if m.shape != (N_SECTORS, N_SECTORS):
        raise SchemaMismatch(f"{path}: shape {m.shape}")
    return m


def load_mrio(directory) -> MrioTable:
    """Per-country 11x11 coefficient matrix pairs listed by a manifest."""
    directory = Path(directory)
    manifest = directory / "countries.tsv"
    lines = [
        ln
        for ln in manifest.read_text(encoding="utf-8").splitlines()
        if ln and not ln.startswith("#")
    ]
    if not lines or lines[0] != "country":
        raise SchemaMismatch(f"{manifest}: expected single 'country' column")
    aliases = load_iso3_aliases()
    countries = [normalize_country(c, aliases) for c in lines[1:]]
    table = MrioTable(
        countries=countries,
        a_domestic={
            c: _read_matrix(directory / f"{c}_domestic.tsv") for c in countries
        },
        a_imported={
            c: _read_matrix(directory / f"{c}_imported.tsv") for c in countries
        },
    )
    table.validate()
    return table


def write_mrio(directory, table: MrioTable) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "countries.tsv").write_text(
        "country\n" + "".join(f"{c}\n" for c in table.countries), encoding="utf-8"
    )
    for country in table.countries:
        for tag, matrices in (("domestic", table.a_domestic), ("imported", table.a_imported)):
            lines = ["\t".join(MRIO_SECTOR_HEADER)]
            for row in matrices[country]:
                lines.append("\t".join(repr(float(v)) for v in row))
            (directory / f"{country}_{tag}.tsv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )


# ------------------------------------------------------------- geofences


def load_geofences(path) -> list[PortGeofence]:
    """GeoJSON FeatureCollection of port polygons with
    {port_id, name, iso3} properties."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("type") != "FeatureCollection":
        raise SchemaMismatch(f"{path}: not a FeatureCollection")
    aliases = load_iso3_aliases()
    fences = []
    for feature in doc.get("features", []):
        props = feature.get("properties", {})
        geom = feature.get("geometry", {})
        if geom.get("type") != "Polygon":
            raise SchemaMismatch(f"{path}: geometry {geom.get('type')!r}")
        ring = [(float(x), float(y)) for x, y in geom["coordinates"][0]]
        fences.append(
            PortGeofence(
                port_id=str(props["port_id"]),
                name=str(props.get("name", props["port_id"])),
                country=normalize_country(props["iso3"], aliases),
                ring=ring,
            )
        )
    return sorted(fences, key=lambda f: f.port_id)


def write_geofences(path, fences: list[PortGeofence]) -> None:
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {
                    "port_id": f.port_id,
                    "name": f.name,
                    "iso3": f.country,
                },
                "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in f.ring]]},
            }
            for f in fences
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


# ------------------------------------------------------------ positions

POSITIONS_HEADER = [
    "mmsi", "timestamp", "latitude", "longitude", "speed_over_ground",
    "course", "msg_type", "second",
]
STATICS_HEADER = [
    "mmsi", "timestamp", "imo", "ship_type_code", "dim_to_bow", "dim_to_stern",
    "dim_to_port", "dim_to_starboard", "draught", "name", "destination", "msg_type",
]


def write_positions(path, reports: Iterable[PositionReport]) -> int:
    rows = [
        [r.mmsi, r.timestamp, r.latitude, r.longitude, r.speed_over_ground,
         r.course, r.msg_type, r.second]
        for r in reports
    ]
    write_tsv(path, "positions", 1, POSITIONS_HEADER, rows)
    return len(rows)


def read_positions(path) -> list[PositionReport]:
    return [
        PositionReport(
            mmsi=int(p[0]),
            timestamp=_opt_float(p[1]),
            latitude=_opt_float(p[2]),
            longitude=_opt_float(p[3]),
            speed_over_ground=_opt_float(p[4]),
            course=_opt_float(p[5]),
            msg_type=int(p[6]),
            second=int(p[7]),
        )
        for p in read_tsv(path, "positions", POSITIONS_HEADER)
    ]


def write_statics(path, reports: Iterable[StaticVoyageReport]) -> int:
    rows = [
        [r.mmsi, r.timestamp, r.imo, r.ship_type_code, r.dim_to_bow, r.dim_to_stern,
         r.dim_to_port, r.dim_to_starboard, r.draught, r.name, r.destination, r.msg_type]
        for r in reports
    ]
    write_tsv(path, "statics", 1, STATICS_HEADER, rows)
    return len(rows)


def read_statics(path) -> list[StaticVoyageReport]:
    out = []
    for p in read_tsv(path, "statics", STATICS_HEADER):
        out.append(
            StaticVoyageReport(
                mmsi=int(p[0]),
                timestamp=_opt_float(p[1]),
                imo=int(p[2]) if p[2] else None,
                ship_type_code=int(p[3]) if p[3] else None,
                dim_to_bow=int(p[4]),
                dim_to_stern=int(p[5]),
                dim_to_port=int(p[6]),
                dim_to_starboard=int(p[7]),
                draught=_opt_float(p[8]),
                name=p[9],
                destination=p[10],
                msg_type=int(p[11]),
            )
        )
    return out


# ---------------------------------------------------------------- calls

CALLS_HEADER = ["mmsi", "port_id", "arrival", "departure", "draught_in", "draught_out"]


def write_calls(path, calls: Iterable[PortCall]) -> int:
    rows = [
        [c.mmsi, c.port_id, c.arrival, c.departure, c.draught_in, c.draught_out]
        for c in calls
    ]
    write_tsv(path, "port_calls", 1, CALLS_HEADER, rows)
    return len(rows)


def read_calls(path) -> list[PortCall]:
    return [
        PortCall(
            mmsi=int(p[0]),
            port_id=p[1],
            arrival=float(p[2]),
            departure=float(p[3]),
            draught_in=_opt_float(p[4]),
            draught_out=_opt_float(p[5]),
        )
        for p in read_tsv(path, "port_calls", CALLS_HEADER)
    ]


# ------------------------------------------------------------- registry

REGISTRY_HEADER = [
    "mmsi", "vessel_class", "length", "beam", "design_draught",
    "ballast_draught", "dwt", "utilization_rate",
]


def write_registry(path, records: Iterable[VesselRecord]) -> int:
    rows = [
        [r.mmsi, r.vessel_class.value, r.length, r.beam, r.design_draught,
         r.ballast_draught, r.dwt, r.utilization_rate]
        for r in sorted(records, key=lambda r: r.mmsi)
    ]
    write_tsv(path, "registry", 1, REGISTRY_HEADER, rows)
    return len(rows)


def read_registry(path) -> dict[int, VesselRecord]:
    out = {}
    for p in read_tsv(path, "registry", REGISTRY_HEADER):
        record = VesselRecord(
            mmsi=int(p[0]),
            vessel_class=VesselClass(p[1]),
            length=float(p[2]),
            beam=float(p[3]),
            design_draught=float(p[4]),
            ballast_draught=float(p[5]),
            dwt=float(p[6]),
            utilization_rate=float(p[7]),
            draught_history=[],
        )
        out[record.mmsi] = record
    return out


# ---------------------------------------------------------------- flows

FLOWS_HEADER = ["port_id", "country", "date", "direction", "sector", "tonnes", "value_usd"]


def write_flows(path, flows: Iterable[TradeFlow]) -> int:
    rows = [
        [f.port_id, f.country, f.date.isoformat(), f.direction, f.sector,
         f.tonnes, f.value_usd]
        for f in flows
    ]
    write_tsv(path, "trade_flows", 1, FLOWS_HEADER, rows)
    return len(rows)


def read_flows(path) -> list[TradeFlow]:
    out = []
    for p in read_tsv(path, "trade_flows", FLOWS_HEADER):
        if p[3] not in (IMPORT, EXPORT):
            raise SchemaMismatch(f"direction {p[3]!r}")
        out.append(
            TradeFlow(
                port_id=p[0],
                country=p[1],
                date=dt.date.fromisoformat(p[2]),
                direction=p[3],
                sector=int(p[4]),
                tonnes=float(p[5]),
                value_usd=float(p[6]),
            )
        )
    return out


# --------------------------------------------------------------- series

SERIES_HEADER = ["entity", "date", "value"]


def write_series(path, series_list: Iterable[DailySeries]) -> int:
    rows = []
    for s in series_list:
        for i, value in enumerate(s.values):
            rows.append([s.entity, (s.start + dt.timedelta(days=i)).isoformat(), float(value)])
    write_tsv(path, "daily_series", 1, SERIES_HEADER, rows)
    return len(rows)


def read_series(path) -> dict[str, DailySeries]:
    cells: dict[str, list[tuple[dt.date, float]]] = {}
    for p in read_tsv(path, "daily_series", SERIES_HEADER):
        cells.setdefault(p[0], []).append((dt.date.fromisoformat(p[1]), float(p[2])))
    out = {}
    for entity in sorted(cells):
        points = sorted(cells[entity])
        start = points[0][0]
        n = (points[-1][0] - start).days + 1
        values = np.zeros(n)
        for day, value in points:
            values[(day - start).days] = value
        out[entity] = DailySeries(entity=entity, start=start, values=values)
    return out


# --------------------------------------------------------------- prices

PRICES_HEADER = ["sector", "usd_per_tonne"]


def load_prices(path) -> PriceTable:
    rows = read_tsv(path, "prices", PRICES_HEADER)
    return PriceTable({int(r[0]): float(r[1]) for r in rows})


def write_prices(path, prices: PriceTable) -> int:
    rows = [[s, prices[s]] for s in sorted(prices.prices)]
    write_tsv(path, "prices", 1, PRICES_HEADER, rows)
    return len(rows)


# ---------------------------------------------------------- populations

POPULATIONS_HEADER = ["country", "population"]


def load_populations(path) -> dict[str, float]:
    aliases = load_iso3_aliases()
    out = {}
    for country_s, pop_s in read_tsv(path, "populations", POPULATIONS_HEADER):
        pop = float(pop_s)
        if pop <= 0:
            raise RangeViolation([f"{country_s}: population {pop}"])
        out[normalize_country(country_s, aliases)] = pop
    return out


def write_populations(path, populations: dict[str, float]) -> int:
    rows = [[c, populations[c]] for c in sorted(populations)]
    write_tsv(path, "populations", 1, POPULATIONS_HEADER, rows)
    return len(rows)
