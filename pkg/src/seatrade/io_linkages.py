"""Vertical-specialization coefficients from input-output tables.

For each country the table carries two 11x11 coefficient matrices: the
domestic input requirements and the imported input requirements per unit
of sector output.  The coefficient vector v' = u' A_m (I - A_d)^{-1}
gives the imported-input content embodied in one unit of each sector's
exports, with the domestic interdependency closure supplied by the
dense-factorization inverse of (I - A_d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trade_estimator import N_SECTORS

LEONTIEF_RESIDUAL_TOL = 1e-10


class IoError(Exception):
    pass


class SingularMatrix(IoError):
    pass


class TableInvariantError(IoError):
    pass


@dataclass
class MrioTable:
    countries: list[str]
    a_domestic: dict[str, np.ndarray]
    a_imported: dict[str, np.ndarray]

    def validate(self) -> None:
        for country in self.countries:
            for label, matrices in (("domestic", self.a_domestic), ("imported", self.a_imported)):
                m = matrices.get(country)
                if m is None or m.shape != (N_SECTORS, N_SECTORS):
                    raise TableInvariantError(f"{country}: bad {label} matrix")
                if (m < 0).any():
                    raise TableInvariantError(f"{country}: negative {label} coefficient")
            col_sums = self.a_domestic[country].sum(axis=0) + self.a_imported[
                country
            ].sum(axis=0)
            if (col_sums >= 1.0).any():
                worst = float(col_sums.max())
                raise TableInvariantError(
                    f"{country}: column sum {worst} >= 1 (not a productive economy)"
                )


def leontief_inverse(a_domestic: np.ndarray) -> np.ndarray:
    """(I - A)^{-1} by dense LU factorization, residual-checked."""
    a = np.asarray(a_domestic, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise IoError(f"matrix shape {a.shape}")
    eye = np.eye(n)
    try:
        inv = np.linalg.solve(eye - a, eye)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc))
    residual = np.abs((eye - a) @ inv - eye).max()
    if residual >= LEONTIEF_RESIDUAL_TOL:
        raise SingularMatrix(f"residual {residual:.3e}")
    return inv


def vs_coefficients(table: MrioTable, country: str) -> np.ndarray:
    """Per-sector imported-input content of exports for one country.

    v' = u' A_imported (I - A_domestic)^{-1}, u the all-ones sector
    vector; only intermediate imports enter.
    """
    if country not in table.a_domestic:
        raise IoError(f"unknown country {country!r}")
    closure = leontief_inverse(table.a_domestic[country])
    u = np.ones(N_SECTORS)
    return u @ table.a_imported[country] @ closure
