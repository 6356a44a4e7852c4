"""End-to-end pipeline stages behind the command-line interface.

Each stage reads manifest-tracked inputs, writes manifest-tracked
outputs into the run directory, and can be re-run independently.  All
outputs are deterministic: entities are processed in sorted order, the
calls stage parallelizes per vessel with order-preserving collection,
and manifests carry checksums but no wall-clock fields.
"""

from __future__ import annotations

import concurrent.futures
import datetime as dt
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import ais_decoder, controls_builder, ingest_store, io_linkages, panel as panel_mod
from . import timeseries, trade_estimator
from .controls_builder import POLICY_NAMES, CountryControls
from .fleet_registry import merge_static
from .port_call import CallParams, attach_draughts, detect_calls
from .trade_estimator import EXPORT, IMPORT, N_SECTORS, DailySeries, SectorAllocation


class PipelineError(Exception):
    pass


class MissingInput(PipelineError):
    def __init__(self, stage: str, detail: str = ""):
        super().__init__(f"missing output of stage {stage!r}" + (f": {detail}" if detail else ""))
        self.stage = stage


@dataclass
class PipelineConfig:
    out: str = "run"
    nmea: str = ""
    geofences: str = ""
    allocation: str = ""  # empty -> bundled class/sector table
    prices: str = ""
    populations: str = ""
    policy: str = ""
    bilateral: str = ""
    mrio: str = ""
    workers: int = 1
    speed_threshold_kn: float = 1.0
    min_dwell_h: float = 5.0
    exit_hysteresis_h: float = 1.0
    draught_window_h: float = 72.0
    gap_reset_h: float = 48.0
    date_by_arrival_for_imports: bool = False
    baseline_start: str = "2019-01-01"
    baseline_end: str = "2019-03-31"
    current_start: str = "2020-01-01"
    current_end: str = "2020-03-31"
    smoothing_window: int = 10
    report_top_n: int = 20

    def call_params(self) -> CallParams:
        return CallParams(
            speed_threshold_kn=self.speed_threshold_kn,
            min_dwell_h=self.min_dwell_h,
            exit_hysteresis_h=self.exit_hysteresis_h,
            draught_window_h=self.draught_window_h,
            gap_reset_h=self.gap_reset_h,
        )

    def window(self, which: str) -> tuple[dt.date, dt.date]:
        if which == "baseline":
            return dt.date.fromisoformat(self.baseline_start), dt.date.fromisoformat(self.baseline_end)
        return dt.date.fromisoformat(self.current_start), dt.date.fromisoformat(self.current_end)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        cfg = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            cfg.set_key(key.strip(), value.strip())
        return cfg

    def set_key(self, key: str, value: str) -> None:
        if not hasattr(self, key):
            raise PipelineError(f"unknown config key {key!r}")
        current = getattr(self, key)
        if isinstance(current, bool):
            setattr(self, key, value.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(self, key, int(value))
        elif isinstance(current, float):
            setattr(self, key, float(value))
        else:
            setattr(self, key, value)


def _out(cfg: PipelineConfig, name: str) -> Path:
    return Path(cfg.out) / name


def _require(cfg: PipelineConfig, name: str, stage: str) -> Path:
    path = _out(cfg, name)
    if not path.exists():
        raise MissingInput(stage, str(path))
    return path


def _allocation(cfg: PipelineConfig) -> SectorAllocation:
    if cfg.allocation:
        return SectorAllocation.from_text(Path(cfg.allocation).read_text(encoding="utf-8"))
    return SectorAllocation.bundled()


# ------------------------------------------------------------------ decode


def stage_decode(cfg: PipelineConfig) -> dict:
    """Raw NMEA feed -> typed position and static report tables."""
    if not cfg.nmea or not Path(cfg.nmea).exists():
        raise MissingInput("input", cfg.nmea or "<nmea unset>")
    decoder = ais_decoder.StreamDecoder()
    positions, statics = [], []
    for report in ais_decoder.iter_file_reports(cfg.nmea, decoder):
        if isinstance(report, ais_decoder.PositionReport):
            positions.append(report)
        else:
            statics.append(report)
    positions.sort(key=lambda r: (r.mmsi, r.timestamp or 0.0))
    statics.sort(key=lambda r: (r.mmsi, r.timestamp or 0.0))
    n_pos = ingest_store.write_positions(_out(cfg, "positions.tsv"), positions)
    n_stat = ingest_store.write_statics(_out(cfg, "statics.tsv"), statics)
    stats = {f"stats.decode.{k}": v for k, v in sorted(decoder.counters.items())}
    ingest_store.write_manifest(
        _out(cfg, "manifest_decode.txt"),
        [
            ingest_store.manifest_entry("positions", _out(cfg, "positions.tsv"), 1, n_pos),
            ingest_store.manifest_entry("statics", _out(cfg, "statics.tsv"), 1, n_stat),
        ],
        config={**cfg.as_dict(), **stats},
    )
    return stats


# ------------------------------------------------------------------- calls


def _vessel_calls(args):
    track, fences, params, history = args
    calls = detect_calls(track, fences, params)
    return attach_draughts(calls, history, params)


def stage_calls(cfg: PipelineConfig) -> None:
    """Positions + statics -> vessel registry and dwell-qualified calls."""
    positions_path = _require(cfg, "positions.tsv", "decode")
    statics_path = _require(cfg, "statics.tsv", "decode")
    if not cfg.geofences or not Path(cfg.geofences).exists():
        raise MissingInput("input", cfg.geofences or "<geofences unset>")
    fences = ingest_store.load_geofences(cfg.geofences)
    positions = ingest_store.read_positions(positions_path)
    statics = ingest_store.read_statics(statics_path)
    build = merge_static(statics)
    params = cfg.call_params()

    tracks: dict[int, list] = {}
    for report in positions:
        tracks.setdefault(report.mmsi, []).append(report)
    jobs = []
    for mmsi in sorted(tracks):
        record = build.records.get(mmsi)
        if record is None:
            continue  # non-trading or unusable vessel
        track = sorted(tracks[mmsi], key=lambda r: r.timestamp or 0.0)
        jobs.append((track, fences, params, record.draught_history))

    if cfg.workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_vessel = list(pool.map(_vessel_calls, jobs, chunksize=8))
    else:
        per_vessel = [_vessel_calls(job) for job in jobs]
    calls = [call for calls in per_vessel for call in calls]

    n_calls = ingest_store.write_calls(_out(cfg, "calls.tsv"), calls)
    n_reg = ingest_store.write_registry(
        _out(cfg, "registry.tsv"), build.records.values()
    )
    ingest_store.write_manifest(
        _out(cfg, "manifest_calls.txt"),
        [
            ingest_store.manifest_entry("calls", _out(cfg, "calls.tsv"), 1, n_calls),
            ingest_store.manifest_entry("registry", _out(cfg, "registry.tsv"), 1, n_reg),
        ],
        config={
            **cfg.as_dict(),
            "stats.calls.conflicting_identities": len(build.conflicts),
            "stats.calls.vessels": len(jobs),
        },
    )


# ------------------------------------------------------------------- flows


def stage_flows(cfg: PipelineConfig) -> None:
    """Calls + registry -> dated sector flows in tonnes and USD."""
    calls_path = _require(cfg, "calls.tsv", "calls")
    registry_path = _require(cfg, "registry.tsv", "calls")
    if not cfg.prices or not Path(cfg.prices).exists():
        raise MissingInput("input", cfg.prices or "<prices unset>")
    fences = ingest_store.load_geofences(cfg.geofences)
    port_country = {f.port_id: f.country for f in fences}
    registry = ingest_store.read_registry(registry_path)
    calls = ingest_store.read_calls(calls_path)
    allocation = _allocation(cfg)
    prices = ingest_store.load_prices(cfg.prices)
    flows = []
    unestimable = 0
    for call in sorted(calls, key=lambda c: (c.mmsi, c.arrival, c.port_id)):
        vessel = registry.get(call.mmsi)
        if vessel is None or call.port_id not in port_country:
            unestimable += 1
            continue
        try:
            flows.extend(
                trade_estimator.flows_from_call(
                    call, vessel, port_country, allocation, prices,
                    cfg.date_by_arrival_for_imports,
                )
            )
        except trade_estimator.EstimatorError:
            unestimable += 1
    n = ingest_store.write_flows(_out(cfg, "flows.tsv"), flows)
    ingest_store.write_manifest(
        _out(cfg, "manifest_flows.txt"),
        [ingest_store.manifest_entry("flows", _out(cfg, "flows.tsv"), 1, n)],
        config={**cfg.as_dict(), "stats.flows.unestimable_calls": unestimable},
    )


# --------------------------------------------------------------- aggregate


def _series_sorted(mapping: dict) -> list[DailySeries]:
    return [mapping[key] for key in sorted(mapping)]


def stage_aggregate(cfg: PipelineConfig) -> None:
    """Flows -> daily series at port, country, sector and
    country-sector level, for both comparison windows."""
    flows_path = _require(cfg, "flows.tsv", "flows")
    flows = ingest_store.read_flows(flows_path)
    entries = []
    for window in ("baseline", "current"):
        start, end = cfg.window(window)
        n_days = (end - start).days + 1
        for level in ("port", "country"):
            per_sector = trade_estimator.aggregate_daily(flows, level, start, end)
            entities = sorted({key[0] for key in per_sector})
            for direction in (IMPORT, EXPORT):
                totals = [
                    trade_estimator.combine_sectors(per_sector, entity, direction, n_days, start)
                    for entity in entities
                ]
                name = f"series_{level}_{direction}_{window}.tsv"
                n = ingest_store.write_series(_out(cfg, name), totals)
                entries.append(ingest_store.manifest_entry(name[:-4], _out(cfg, name), 1, n))
            if level == "country":
                # per-sector series, entity tagged "<iso3>#<sector>"
                for direction in (IMPORT, EXPORT):
                    tagged = []
                    for (entity, direc, sector) in sorted(per_sector):
                        if direc != direction:
                            continue
                        tagged.append(
                            DailySeries(
                                entity=f"{entity}#{sector}", start=start,
                                values=per_sector[(entity, direc, sector)].values,
                            )
                        )
                    name = f"series_country_sector_{direction}_{window}.tsv"
                    n = ingest_store.write_series(_out(cfg, name), tagged)
                    entries.append(ingest_store.manifest_entry(name[:-4], _out(cfg, name), 1, n))
        # global per-sector series
        per_sector_global = trade_estimator.aggregate_daily(flows, "country", start, end)
        for direction in (IMPORT, EXPORT):
            rows = []
            for sector in range(1, N_SECTORS + 1):
                total = np.zeros(n_days)
                for (entity, direc, sec), s in sorted(per_sector_global.items()):
                    if direc == direction and sec == sector:
                        total += s.values
                rows.append(DailySeries(entity=f"s{sector}", start=start, values=total))
            name = f"series_sector_{direction}_{window}.tsv"
            n = ingest_store.write_series(_out(cfg, name), rows)
            entries.append(ingest_store.manifest_entry(name[:-4], _out(cfg, name), 1, n))
    ingest_store.write_manifest(
        _out(cfg, "manifest_aggregate.txt"), entries, config=cfg.as_dict()
    )


# -------------------------------------------------------------- change prep


def _window_grid(cfg: PipelineConfig) -> tuple[list[dt.date], int]:
    """Current-window day grid with any Feb 29 removed; its length must
    match the baseline window."""
    b_start, b_end = cfg.window("baseline")
    c_start, c_end = cfg.window("current")
    base_days = (b_end - b_start).days + 1
    days = [
        c_start + dt.timedelta(days=k)
        for k in range((c_end - c_start).days + 1)
    ]
    days = [d for d in days if not (d.month == 2 and d.day == 29)]
    if len(days) != base_days:
        raise PipelineError(
            f"baseline window has {base_days} days, current {len(days)} after leap-day drop"
        )
    return days, base_days


def _aligned_values(series: Optional[DailySeries], start: dt.date, n_days: int, drop_leap: bool) -> np.ndarray:
    values = np.zeros(n_days + (1 if drop_leap else 0))
    if series is not None:
        span = min(len(series.values), len(values) - (series.start - start).days)
        offset = (series.start - start).days
        if offset >= 0:
            values[offset:offset + span] = series.values[:span]
    if drop_leap:
        values = timeseries.drop_leap_day(start, values)
    return values


def _load_window_series(cfg: PipelineConfig, name: str, window: str, n_days: int) -> dict[str, np.ndarray]:
    path = _require(cfg, f"series_{name}_{window}.tsv", "aggregate")
    start, end = cfg.window(window)
    has_leap = any(
        (start + dt.timedelta(days=k)).month == 2 and (start + dt.timedelta(days=k)).day == 29
        for k in range((end - start).days + 1)
    )
    raw = ingest_store.read_series(path)
    return {
        entity: _aligned_values(series, start, n_days, drop_leap=has_leap)
        for entity, series in raw.items()
    }


def build_change_series(cfg: PipelineConfig) -> tuple[dict[str, np.ndarray], list[dt.date]]:
    """Country-level export change metric for every zero-day-free country."""
    days, n_days = _window_grid(cfg)
    base = _load_window_series(cfg, "country_export", "baseline", n_days)
    cur = _load_window_series(cfg, "country_export", "current", n_days)
    entities = {
        c: (base[c], cur[c]) for c in sorted(set(base) & set(cur))
    }
    kept = timeseries.filter_zero_days(entities)
    out = {}
    for country in kept:
        out[country] = timeseries.change_series(
            base[country], cur[country], window=cfg.smoothing_window
        )
    return out, days


def build_controls(cfg: PipelineConfig, days: list[dt.date]) -> dict[str, CountryControls]:
    """Policy, demand, cases and supply regressors on the shared grid."""
    for key, label in (
        ("policy", "policy snapshot"), ("bilateral", "bilateral weights"),
        ("mrio", "input-output tables"), ("populations", "populations"),
    ):
        value = getattr(cfg, key)
        if not value or not Path(value).exists():
            raise MissingInput("input", f"{label} ({value or 'unset'})")
    n_days = len(days)
    day_index = {d: i for i, d in enumerate(days)}
    policy_rows = ingest_store.load_policy_snapshot(cfg.policy)
    weights = ingest_store.load_bilateral(cfg.bilateral)
    mrio = ingest_store.load_mrio(cfg.mrio)
    populations = ingest_store.load_populations(cfg.populations)

    countries = sorted({row.country for row in policy_rows})
    raw_levels = {
        c: {name: np.full(n_days, np.nan) for name in POLICY_NAMES} for c in countries
    }
    confirmed = {c: np.full(n_days, np.nan) for c in countries}
    stringency = {c: np.full(n_days, np.nan) for c in countries}
    for row in policy_rows:
        i = day_index.get(row.date)
        if i is None:
            continue
        for name in POLICY_NAMES:
            if row.levels[name] is not None:
                raw_levels[row.country][name][i] = row.levels[name]
        if row.confirmed is not None:
            confirmed[row.country][i] = row.confirmed
        if row.stringency is not None:
            stringency[row.country][i] = row.stringency

    stringency_filled = {
        c: controls_builder.forward_fill(stringency[c]) for c in countries
    }

    # sector-level import changes for the supply control
    base_cs = _load_window_series(cfg, "country_sector_import", "baseline", n_days)
    cur_cs = _load_window_series(cfg, "country_sector_import", "current", n_days)

    out: dict[str, CountryControls] = {}
    for country in countries:
        if country not in populations:
            continue
        policies = {}
        for name in POLICY_NAMES:
            filled = controls_builder.forward_fill(raw_levels[country][name])
            policies[name] = filled / controls_builder.POLICY_MAX_LEVELS[name]
        composite = controls_builder.composite_stringency(
            np.vstack([policies[p] for p in controls_builder.COMPOSITE_POLICIES])
        )
        if country in weights:
            try:
                demand = controls_builder.demand_shock(
                    weights[country], stringency_filled, n_days
                )
            except controls_builder.NoPartners:
                demand = np.full(n_days, np.nan)
        else:
            demand = np.full(n_days, np.nan)
        cases_cum = controls_builder.forward_fill(confirmed[country])
        cases = controls_builder.cases_control(cases_cum, populations[country])

        supply = np.full(n_days, np.nan)
        if country in mrio.a_domestic:
            vs_row = io_linkages.vs_coefficients(mrio, country)
            rows = []
            weights_vs = []
            for sector in range(1, N_SECTORS + 1):
                key = f"{country}#{sector}"
                if key not in base_cs or key not in cur_cs:
                    continue
                if vs_row[sector - 1] <= 0:
                    continue
                try:
                    rows.append(
                        timeseries.change_series(
                            base_cs[key], cur_cs[key], window=cfg.smoothing_window
                        )
                    )
                    weights_vs.append(vs_row[sector - 1])
                except timeseries.SeriesError:
                    continue  # sector with a zero baseline: unusable
            if rows:
                supply = controls_builder.supply_shock(
                    np.vstack(rows), np.array(weights_vs),
                    lag_days=controls_builder.SUPPLY_LAG_DAYS,
                )
        out[country] = CountryControls(
            country=country,
            start=days[0],
            policies=policies,
            composite=composite,
            demand=demand,
            cases=cases,
            supply=supply,
            cumulative_cases=cases_cum,
        )
    return out


# ------------------------------------------------------------------- panel


def stage_panel(
    cfg: PipelineConfig,
    models: Optional[list[int]] = None,
    policy_lag: Optional[int] = None,
    dummies: Optional[str] = None,
    sample: str = "full",
) -> str:
    """Fit the requested specifications and emit the results tables."""
    change, days = build_change_series(cfg)
    controls = build_controls(cfg, days)

    labeled: list[tuple[str, panel_mod.RegressionResult]] = []
    include_ci = False
    if policy_lag is not None:
        base_spec = panel_mod.RegressionSpec("individual", 0, "none", sample)
        lag_spec = panel_mod.RegressionSpec("individual", policy_lag, "none", sample)
        for label, spec in (("Base", base_spec), (f"{policy_lag}day lag", lag_spec)):
            labeled.append(
                (label, panel_mod.fit(panel_mod.build_panel(change, controls, days, spec), spec))
            )
    elif dummies is not None:
        include_ci = True
        base_spec = panel_mod.RegressionSpec("individual", 0, "none", sample)
        dummy_spec = panel_mod.RegressionSpec("individual", 0, dummies, sample)
        for label, spec in (
            ("Base", base_spec),
            (f"{dummies.capitalize()} dummy", dummy_spec),
        ):
            labeled.append(
                (label, panel_mod.fit(panel_mod.build_panel(change, controls, days, spec), spec))
            )
    else:
        for model in models or sorted(panel_mod.MODEL_PRESETS):
            spec = panel_mod.MODEL_PRESETS[model]
            labeled.append(
                (f"Model{model}",
                 panel_mod.fit(panel_mod.build_panel(change, controls, days, spec), spec))
            )

    table = panel_mod.render_results_table(labeled, include_ci=include_ci)
    table_path = _out(cfg, "panel_results.txt")
    table_path.parent.mkdir(parents=True, exist_ok=True)
    table_path.write_text(table, encoding="utf-8")

    rows = []
    for label, result in labeled:
        for name in result.columns:
            if name not in result.named_columns:
                continue
            r = result.row(name)
            rows.append([
                label, name, r["beta"], r["se"], r["t"], r["p"], r["stars"],
                r["ci_low"], r["ci_high"], result.r2, result.adj_r2,
                result.fstat, result.n_obs, result.n_entities,
            ])
    ingest_store.write_tsv(
        _out(cfg, "panel_results.tsv"), "panel_results", 1,
        ["model", "parameter", "beta", "se", "t", "p", "stars", "ci_low",
         "ci_high", "r2", "adj_r2", "f_stat", "n_obs", "n_entities"],
        rows,
    )
    ingest_store.write_manifest(
        _out(cfg, "manifest_panel.txt"),
        [
            ingest_store.manifest_entry("panel_results_table", table_path, 1, len(table.splitlines())),
            ingest_store.manifest_entry("panel_results", _out(cfg, "panel_results.tsv"), 1, len(rows)),
        ],
        config=cfg.as_dict(),
    )
    return table


# ------------------------------------------------------------------ report


def _window_totals(cfg: PipelineConfig, level: str, direction: str) -> tuple[dict, dict]:
    days, n_days = _window_grid(cfg)
    base = _load_window_series(cfg, f"{level}_{direction}", "baseline", n_days)
    cur = _load_window_series(cfg, f"{level}_{direction}", "current", n_days)
    return (
        {e: float(v.sum()) for e, v in base.items()},
        {e: float(v.sum()) for e, v in cur.items()},
    )


def _loss_rows(base: dict, cur: dict, relative: bool) -> list[tuple[str, float]]:
    rows = []
    for entity in sorted(set(base) | set(cur)):
        b = base.get(entity, 0.0)
        c = cur.get(entity, 0.0)
        if relative:
            if b <= 0:
                continue
            rows.append((entity, 100.0 * (c - b) / b))
        else:
            rows.append((entity, (c - b) / 1e6))  # million tonnes
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows


def stage_report(cfg: PipelineConfig) -> None:
    """Emit the ranked loss tables, per-sector change series and the
    port-call count change."""
    fences = ingest_store.load_geofences(cfg.geofences)
    port_country = {f.port_id: f.country for f in fences}
    top_n = cfg.report_top_n

    # port-level absolute changes (million tonnes), Rank/Port/iso3/Change
    groups = {}
    for direction in (IMPORT, EXPORT):
        base, cur = _window_totals(cfg, "port", direction)
        groups[direction] = (base, cur)
    base_total = {
        e: groups[IMPORT][0].get(e, 0.0) + groups[EXPORT][0].get(e, 0.0)
        for e in set(groups[IMPORT][0]) | set(groups[EXPORT][0])
    }
    cur_total = {
        e: groups[IMPORT][1].get(e, 0.0) + groups[EXPORT][1].get(e, 0.0)
        for e in set(groups[IMPORT][1]) | set(groups[EXPORT][1])
    }
    port_tables = {
        "total": _loss_rows(base_total, cur_total, relative=False)[:top_n],
        "imports": _loss_rows(*groups[IMPORT], relative=False)[:top_n],
        "exports": _loss_rows(*groups[EXPORT], relative=False)[:top_n],
    }
    port_rows = []
    for rank in range(max((len(t) for t in port_tables.values()), default=0)):
        row = [rank + 1]
        for key in ("total", "imports", "exports"):
            if rank < len(port_tables[key]):
                port, change = port_tables[key][rank]
                row.extend([port, port_country.get(port, ""), round(change, 6)])
            else:
                row.extend(["", "", ""])
        port_rows.append(row)
    ingest_store.write_tsv(
        _out(cfg, "report_port_losses.tsv"), "port_losses", 1,
        ["Rank",
         "Total trade Port", "Total trade iso3", "Total trade Change(MT)",
         "Imports Port", "Imports iso3", "Imports Change(MT)",
         "Exports Port", "Exports iso3", "Exports Change(MT)"],
        port_rows,
    )

    # country-level relative changes (percent)
    cgroups = {}
    for direction in (IMPORT, EXPORT):
        cgroups[direction] = _window_totals(cfg, "country", direction)
    cbase_total = {
        e: cgroups[IMPORT][0].get(e, 0.0) + cgroups[EXPORT][0].get(e, 0.0)
        for e in set(cgroups[IMPORT][0]) | set(cgroups[EXPORT][0])
    }
    ccur_total = {
        e: cgroups[IMPORT][1].get(e, 0.0) + cgroups[EXPORT][1].get(e, 0.0)
        for e in set(cgroups[IMPORT][1]) | set(cgroups[EXPORT][1])
    }
    country_tables = {
        "total": _loss_rows(cbase_total, ccur_total, relative=True)[:top_n],
        "imports": _loss_rows(*cgroups[IMPORT], relative=True)[:top_n],
        "exports": _loss_rows(*cgroups[EXPORT], relative=True)[:top_n],
    }
    country_rows = []
    for rank in range(max((len(t) for t in country_tables.values()), default=0)):
        row = [rank + 1]
        for key in ("total", "imports", "exports"):
            if rank < len(country_tables[key]):
                country, change = country_tables[key][rank]
                row.extend([country, round(change, 6)])
            else:
                row.extend(["", ""])
        country_rows.append(row)
    ingest_store.write_tsv(
        _out(cfg, "report_country_losses.tsv"), "country_losses", 1,
        ["Rank", "Total trade Country", "Total trade Change(%)",
         "Imports Country", "Imports Change(%)",
         "Exports Country", "Exports Change(%)"],
        country_rows,
    )

    # per-sector smoothed percent-change series, one file per sector
    days, n_days = _window_grid(cfg)
    entries = []
    sector_files = []
    base_by_dir = {d: _load_window_series(cfg, "sector", "baseline", n_days) for d in (IMPORT, EXPORT)}
    cur_by_dir = {d: _load_window_series(cfg, "sector", "current", n_days) for d in (IMPORT, EXPORT)}
    for sector in range(1, N_SECTORS + 1):
        key = f"s{sector}"
        series_rows = []
        combos = {
            "imports": (base_by_dir[IMPORT].get(key), cur_by_dir[IMPORT].get(key)),
            "exports": (base_by_dir[EXPORT].get(key), cur_by_dir[EXPORT].get(key)),
        }
        total_base = sum(v[0] for v in combos.values() if v[0] is not None)
        total_cur = sum(v[1] for v in combos.values() if v[1] is not None)
        combos["total"] = (
            total_base if isinstance(total_base, np.ndarray) else None,
            total_cur if isinstance(total_cur, np.ndarray) else None,
        )
        for label in ("imports", "exports", "total"):
            b, c = combos[label]
            if b is None or c is None or b.mean() <= 0:
                continue
            smooth_b = timeseries.moving_average(b, cfg.smoothing_window)
            smooth_c = timeseries.moving_average(c, cfg.smoothing_window)
            change = timeseries.pct_change(smooth_c, smooth_b)
            series_rows.append(DailySeries(entity=label, start=days[0], values=change))
        name = f"report_sector_change_s{sector}.tsv"
        n = ingest_store.write_series(_out(cfg, name), series_rows)
        entries.append(ingest_store.manifest_entry(name[:-4], _out(cfg, name), 1, n))
        sector_files.append(name)

    # port-call count change between the two windows
    calls = ingest_store.read_calls(_require(cfg, "calls.tsv", "calls"))
    counts = {}
    for window in ("baseline", "current"):
        start, end = cfg.window(window)
        t0 = dt.datetime.combine(start, dt.time(), tzinfo=dt.timezone.utc).timestamp()
        t1 = dt.datetime.combine(end + dt.timedelta(days=1), dt.time(), tzinfo=dt.timezone.utc).timestamp()
        counts[window] = sum(1 for c in calls if t0 <= c.departure < t1)
    call_change = (
        100.0 * (counts["current"] - counts["baseline"]) / counts["baseline"]
        if counts["baseline"]
        else float("nan")
    )
    ingest_store.write_tsv(
        _out(cfg, "report_summary.tsv"), "report_summary", 1,
        ["metric", "value"],
        [
            ["port_calls_baseline", counts["baseline"]],
            ["port_calls_current", counts["current"]],
            ["port_calls_change_pct", round(call_change, 6)],
        ],
    )
    entries.extend([
        ingest_store.manifest_entry("port_losses", _out(cfg, "report_port_losses.tsv"), 1, len(rows)),
        ingest_store.manifest_entry("country_losses", _out(cfg, "report_country_losses.tsv"), 1, len(rows)),
        ingest_store.manifest_entry("report_summary", _out(cfg, "report_summary.tsv"), 1, 3),
    ])
    ingest_store.write_manifest(_out(cfg, "manifest_report.txt"), entries, config=cfg.as_dict())


# ---------------------------------------------------------------- validate


def stage_validate(cfg: PipelineConfig, reference: str, level: str = "country",
                   direction: str = EXPORT, window: str = "current") -> list[tuple[str, int, float]]:
    """Correlate estimated series against a user-supplied reference file."""
    if not Path(reference).exists():
        raise MissingInput("input", reference)
    days, n_days = _window_grid(cfg)
    estimated = _load_window_series(cfg, f"{level}_{direction}", window, n_days)
    ref = ingest_store.read_series(reference)
    start, _end = cfg.window(window)
    results = []
    for entity in sorted(set(estimated) & set(ref)):
        ref_vals = _aligned_values(ref[entity], start, n_days, drop_leap=(window == "current"))
        est_vals = estimated[entity]
        if len(ref_vals) < 3:
            continue
        try:
            r = timeseries.pearson_r(est_vals, ref_vals)
        except timeseries.SeriesError:
            continue
        results.append((entity, n_days, r))
    ingest_store.write_tsv(
        _out(cfg, "validation.tsv"), "validation", 1,
        ["entity", "n_days", "pearson_r"],
        [[e, n, round(r, 9)] for e, n, r in results],
    )
    return results


ALL_STAGES = ("decode", "calls", "flows", "aggregate", "panel", "report")


def run_all(cfg: PipelineConfig, models: Optional[list[int]] = None) -> None:
    stage_decode(cfg)
    stage_calls(cfg)
    stage_flows(cfg)
    stage_aggregate(cfg)
    stage_panel(cfg, models=models)
    stage_report(cfg)
