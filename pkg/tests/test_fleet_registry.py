import numpy as np
import pytest
from hypothesis import given, strategies as st

from seatrade.ais_decoder import StaticVoyageReport
from seatrade.fleet_registry import (
    MissingDimensions,
    VesselClass,
    classify,
    estimate_capacity,
    load_class_coefficients,
    load_class_utilization,
    load_type_class_table,
    merge_static,
)


def _static(mmsi, code=71, bow=100, stern=100, port=16, star=16, draught=None, t=0.0):
    return StaticVoyageReport(
        mmsi=mmsi, imo=None, ship_type_code=code,
        dim_to_bow=bow, dim_to_stern=stern, dim_to_port=port, dim_to_starboard=star,
        draught=draught, destination="", name="", msg_type=5, timestamp=t,
    )


def test_classify_cargo_and_tanker_rows():
    assert classify(70) is VesselClass.GENERAL_CARGO
    assert classify(83) is VesselClass.PRODUCT_TANKER
    assert classify(84) is VesselClass.LNG_LPG
    assert classify(72) is VesselClass.CONTAINER


def test_classify_non_trading_excluded():
    assert classify(30) is None  # fishing
    assert classify(60) is None  # passenger
    assert classify(0) is None


def test_classify_total_over_all_codes():
    for code in range(100):
        result = classify(code)
        assert result is None or isinstance(result, VesselClass)


def test_bundled_tables_row_validate():
    table = load_type_class_table()
    assert len(table) == 100
    coeffs = load_class_coefficients()
    util = load_class_utilization()
    assert set(coeffs) == set(VesselClass) == set(util)
    assert util[VesselClass.CONTAINER] == 0.70


def test_capacity_arithmetic_oracle():
    # 1.025 * 0.80 * 200 * 32 * 12 * 0.85, computed independently
    expected = 1.025 * 0.80 * 200 * 32 * 12 * 0.85
    assert expected == pytest.approx(53529.6)
    got = estimate_capacity(VesselClass.GENERAL_CARGO, 200, 32, 12)
    assert got == pytest.approx(expected, rel=1e-12)


def test_capacity_zero_length_rejected():
    with pytest.raises(MissingDimensions):
        estimate_capacity(VesselClass.BULK_CARRIER, 0, 32, 12)


def test_capacity_linear_in_draught():
    one = estimate_capacity(VesselClass.BULK_CARRIER, 180, 30, 10)
    two = estimate_capacity(VesselClass.BULK_CARRIER, 180, 30, 20)
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_merge_single_report_floors_ballast():
    build = merge_static([_static(211000000, draught=10.0, t=1.0)])
    rec = build.records[211000000]
    assert rec.design_draught == 10.0
    assert rec.ballast_draught == pytest.approx(0.35 * 10.0)


def test_merge_percentile_example():
    reports = [
        _static(211000001, draught=4.0, t=1.0),
        _static(211000001, draught=8.0, t=2.0),
        _static(211000001, draught=12.0, t=3.0),
    ]
    rec = merge_static(reports).records[211000001]
    # oracle on the tiny sample: 98th percentile (next-observed) = 12,
    # 2nd percentile = 4, floored at 0.35 * 12 = 4.2
    assert rec.design_draught == 12.0
    assert rec.ballast_draught == pytest.approx(4.2)


def test_merge_conflicting_identity_logged_keeps_modal():
    reports = [
        _static(211000002, bow=50, stern=50, draught=8.0, t=1.0),
        _static(211000002, bow=150, stern=150, draught=8.0, t=2.0),
        _static(211000002, bow=50, stern=50, draught=9.0, t=3.0),
    ]
    build = merge_static(reports)
    assert build.conflicts == [211000002]
    assert build.records[211000002].length == 100.0


def test_merge_order_insensitive():
    reports = [
        _static(211000003, draught=4.0, t=10.0),
        _static(211000003, draught=11.5, t=20.0),
        _static(211000003, draught=7.0, t=30.0),
        _static(211000004, code=72, draught=9.0, t=5.0),
    ]
    forward = merge_static(reports)
    backward = merge_static(list(reversed(reports)))
    assert forward.records == backward.records


@given(st.permutations(range(6)))
def test_merge_order_insensitive_property(order):
    base = [
        _static(231000000, draught=float(3 + k), t=float(10 * k + 1)) for k in range(6)
    ]
    shuffled = [base[i] for i in order]
    assert merge_static(shuffled).records == merge_static(base).records


def test_merge_nontrading_excluded():
    build = merge_static([_static(211000005, code=30, draught=5.0, t=1.0)])
    assert build.records == {}
    assert build.skipped_non_trading == 1


def test_draught_history_strictly_increasing():
    reports = [
        _static(211000006, draught=5.0, t=100.0),
        _static(211000006, draught=5.0, t=100.0),  # duplicate timestamp dropped
        _static(211000006, draught=9.0, t=200.0),
    ]
    rec = merge_static(reports).records[211000006]
    assert rec.draught_history == [(100.0, 5.0), (200.0, 9.0)]
