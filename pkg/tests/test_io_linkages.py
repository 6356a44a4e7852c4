import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seatrade.io_linkages import (
    MrioTable,
    SingularMatrix,
    TableInvariantError,
    leontief_inverse,
    vs_coefficients,
)
from seatrade.trade_estimator import N_SECTORS


def neumann_series(a: np.ndarray, terms: int = 60) -> np.ndarray:
    """Independent oracle: truncated sum of matrix powers."""
    total = np.eye(a.shape[0])
    power = np.eye(a.shape[0])
    for _ in range(terms):
        power = power @ a
        total += power
    return total


def random_valid_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.uniform(0, 1, (n, n))
    col_targets = rng.uniform(0.1, 0.85, n)
    return a / a.sum(axis=0) * col_targets


def test_zero_matrix_gives_identity():
    assert np.array_equal(leontief_inverse(np.zeros((4, 4))), np.eye(4))


def test_scalar_geometric_series():
    assert leontief_inverse(np.array([[0.2]]))[0, 0] == pytest.approx(1.25)


def test_2x2_matches_neumann_oracle():
    a = np.array([[0.1, 0.3], [0.2, 0.15]])
    assert np.allclose(leontief_inverse(a), neumann_series(a), atol=1e-10)


def test_random_matrices_match_neumann():
    rng = np.random.default_rng(14)
    for _ in range(25):
        n = int(rng.integers(1, 23))
        a = random_valid_matrix(rng, n)
        assert np.abs(leontief_inverse(a) - neumann_series(a, 200)).max() < 1e-10


def test_singular_matrix_rejected():
    with pytest.raises(SingularMatrix):
        leontief_inverse(np.eye(3))  # I - A is exactly zero


def test_inverse_diagonal_at_least_one():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = random_valid_matrix(rng, 8)
        inv = leontief_inverse(a)
        assert (np.diag(inv) >= 1.0 - 1e-12).all()
        assert (inv >= -1e-12).all()


def _table(a_d, a_m, country="AAA"):
    return MrioTable(countries=[country], a_domestic={country: a_d}, a_imported={country: a_m})


def test_vs_zero_imports():
    a_d = np.full((N_SECTORS, N_SECTORS), 0.02)
    table = _table(a_d, np.zeros((N_SECTORS, N_SECTORS)))
    assert np.allclose(vs_coefficients(table, "AAA"), 0.0)


def test_vs_scalar_economy():
    # collapse to one effective sector: only entry (0, 0) nonzero
    a_d = np.zeros((N_SECTORS, N_SECTORS))
    a_m = np.zeros((N_SECTORS, N_SECTORS))
    a_d[0, 0] = 0.2
    a_m[0, 0] = 0.1
    v = vs_coefficients(_table(a_d, a_m), "AAA")
    assert v[0] == pytest.approx(0.1 / 0.8)
    assert np.allclose(v[1:], 0.0)


def test_vs_linear_in_imports():
    rng = np.random.default_rng(21)
    a_d = random_valid_matrix(rng, N_SECTORS) * 0.4
    a_m = random_valid_matrix(rng, N_SECTORS) * 0.2
    v1 = vs_coefficients(_table(a_d, a_m), "AAA")
    v2 = vs_coefficients(_table(a_d, 2.0 * a_m), "AAA")
    assert np.allclose(v2, 2.0 * v1, rtol=1e-12)


def test_vs_monotone_in_imports():
    rng = np.random.default_rng(22)
    a_d = random_valid_matrix(rng, N_SECTORS) * 0.4
    a_m = random_valid_matrix(rng, N_SECTORS) * 0.2
    v1 = vs_coefficients(_table(a_d, a_m), "AAA")
    bumped = a_m.copy()
    bumped[4, 7] += 0.05
    v2 = vs_coefficients(_table(a_d, bumped), "AAA")
    assert (v2 >= v1 - 1e-12).all()


def test_table_validation_rejects_unproductive():
    a_d = np.full((N_SECTORS, N_SECTORS), 0.08)
    a_m = np.full((N_SECTORS, N_SECTORS), 0.08)  # column sums 1.76
    with pytest.raises(TableInvariantError):
        _table(a_d, a_m).validate()


def test_table_validation_rejects_negative():
    a_d = np.zeros((N_SECTORS, N_SECTORS))
    a_d[0, 0] = -0.1
    with pytest.raises(TableInvariantError):
        _table(a_d, np.zeros((N_SECTORS, N_SECTORS))).validate()
