"""
One-dimensional Monge-Kantorovich distances between projected empirical measures.

The 1D problem is solved exactly by the co-monotone coupling: both supports
are sorted, their cumulative masses merged into one quantile grid, and
|F_a^-1(u) - F_b^-1(u)|^p is integrated piecewise over that grid. Unequal
sizes and masses are handled the same way as equal ones.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .geometry import UnitVector, as_coords
from .logger import setup_logger
from .parallel import ordered_map

logger = setup_logger(__name__)

MASS_SUM_TOL = 1e-12
# Mass columns read from disk are renormalized when they sum to 1 within this
CSV_MASS_SUM_TOL = 1e-6
MASS_COLUMN = 'mass'
# Directions handled per job in w_p_1d_batch
BATCH_CHUNK = 256


def _check_p(p: float) -> None:
    if not np.isfinite(p) or p < 1.0:
        raise ValueError(f"p must be finite and >= 1, got {p}")


def _check_masses(masses: np.ndarray, size: int) -> np.ndarray:
    masses = np.array(masses, dtype=float, copy=True).reshape(-1)
    if masses.shape[0] != size:
        raise ValueError(f"Got {masses.shape[0]} masses for {size} atoms")
    if size < 1:
        raise ValueError("A measure needs at least one atom")
    if not np.all(np.isfinite(masses)) or np.any(masses <= 0.0):
        raise ValueError("Masses must be finite and > 0")
    total = masses.sum()
    if abs(total - 1.0) > MASS_SUM_TOL:
        raise ValueError(f"Masses must sum to 1, got {total!r}")
    return masses


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finitely supported probability measure on R^n."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise ValueError(f"Points must be an (m, n) array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("Points must be finite")
        masses = _check_masses(self.masses, points.shape[0])
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'masses', masses)

    @property
    def m(self) -> int:
        return int(self.points.shape[0])

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    @classmethod
    def uniform(cls, points: np.ndarray) -> 'EmpiricalMeasure':
        """Equal mass on every row of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        return cls(points, np.full(points.shape[0], 1.0 / points.shape[0]))

    @classmethod
    def dirac(cls, x: Sequence[float]) -> 'EmpiricalMeasure':
        return cls.uniform(np.asarray(x, dtype=float).reshape(1, -1))

    def to_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(self.points, columns=[f'x{i}' for i in range(self.n)])
        frame[MASS_COLUMN] = self.masses
        frame.to_csv(path, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, path: Path) -> 'EmpiricalMeasure':
        """
        Read coordinate columns plus an optional mass column.

        Every column except 'mass' is a coordinate. A missing mass column
        means uniform masses; a present one is renormalized when it sums to
        1 within CSV_MASS_SUM_TOL (decimal round-off in files).
        """
        frame = pd.read_csv(path, float_precision='round_trip')
        coords = [c for c in frame.columns if c != MASS_COLUMN]
        if not coords:
            raise ValueError(f"No coordinate columns in {path}")
        points = frame[coords].to_numpy(dtype=float)
        if MASS_COLUMN not in frame.columns:
            return cls.uniform(points)
        masses = frame[MASS_COLUMN].to_numpy(dtype=float)
        total = masses.sum()
        if abs(total - 1.0) > CSV_MASS_SUM_TOL:
            raise ValueError(f"Mass column of {path} sums to {total!r}, expected 1")
        return cls(points, masses / total)


@dataclass(frozen=True, eq=False)
class Projected1D:
    """Pushforward of an empirical measure by x -> <x, direction>."""

    values: np.ndarray
    masses: np.ndarray
    direction: Optional[UnitVector] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("Projected values must be finite")
        masses = _check_masses(self.masses, values.shape[0])
        values.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'masses', masses)


def project(mu: EmpiricalMeasure, omega: Union[UnitVector, np.ndarray]) -> Projected1D:
    """
    Project mu onto the line spanned by omega.

    Example:
        >>> mu = EmpiricalMeasure.uniform(np.array([[1.0, 2.0], [3.0, 4.0]]))
        >>> project(mu, UnitVector([1.0, 0.0])).values
        array([1., 3.])
    """
    direction = omega if isinstance(omega, UnitVector) else UnitVector(omega)
    coords = as_coords(direction)
    if coords.shape[0] != mu.n:
        raise ValueError(f"Dimension mismatch: measure in R^{mu.n}, direction in R^{coords.shape[0]}")
    return Projected1D(mu.points @ coords, mu.masses, direction)


def project_many(mu: EmpiricalMeasure, directions: np.ndarray) -> np.ndarray:
    """Projected values for many directions at once, shape (len(directions), mu.m)."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != mu.n:
        raise ValueError(f"Dimension mismatch: measure in R^{mu.n}, directions in R^{directions.shape[1]}")
    return directions @ mu.points.T


def _quantile_merge(values_a: np.ndarray, masses_a: np.ndarray,
                    values_b: np.ndarray, masses_b: np.ndarray, p: float) -> float:
    """Integral of |F_a^-1 - F_b^-1|^p over the merged quantile grid."""
    order_a = np.argsort(values_a, kind='stable')
    order_b = np.argsort(values_b, kind='stable')
    xa, xb = values_a[order_a], values_b[order_b]
    cdf_a = np.cumsum(masses_a[order_a])
    cdf_b = np.cumsum(masses_b[order_b])
    cdf_a /= cdf_a[-1]
    cdf_b /= cdf_b[-1]

    grid = np.unique(np.concatenate(([0.0], cdf_a, cdf_b)))
    widths = np.diff(grid)
    mids = 0.5 * (grid[:-1] + grid[1:])
    ia = np.minimum(np.searchsorted(cdf_a, mids, side='left'), xa.shape[0] - 1)
    ib = np.minimum(np.searchsorted(cdf_b, mids, side='left'), xb.shape[0] - 1)
    return float(np.sum(widths * np.abs(xa[ia] - xb[ib]) ** p))


def w_p_1d(a: Projected1D, b: Projected1D, p: float) -> float:
    """
    Exact MK_p distance between two measures on the line.

    Example:
        >>> a = Projected1D([0.0, 2.0], [0.5, 0.5])
        >>> b = Projected1D([1.0, 3.0], [0.5, 0.5])
        >>> w_p_1d(a, b, 1.0)
        1.0
    """
    _check_p(p)
    return _quantile_merge(a.values, a.masses, b.values, b.masses, p) ** (1.0 / p)


def w_p_1d_batch(
    values_a: np.ndarray,
    masses_a: np.ndarray,
    values_b: np.ndarray,
    masses_b: np.ndarray,
    p: float,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    w_p_1d for many directions, one row of values per direction.

    Args:
        values_a: (D, m_a) projections of the first measure
        masses_a: (m_a,) masses shared by every row
        values_b: (D, m_b) projections of the second measure
        masses_b: (m_b,) masses
        p: Exponent >= 1
        threads: Worker threads (rows are split in chunks)

    Returns:
        (D,) distances, each equal to the single-direction w_p_1d result
    """
    _check_p(p)
    values_a = np.atleast_2d(np.asarray(values_a, dtype=float))
    values_b = np.atleast_2d(np.asarray(values_b, dtype=float))
    if values_a.shape[0] != values_b.shape[0]:
        raise ValueError(f"Row counts differ: {values_a.shape[0]} vs {values_b.shape[0]}")
    masses_a = _check_masses(masses_a, values_a.shape[1])
    masses_b = _check_masses(masses_b, values_b.shape[1])
    rows = values_a.shape[0]
    chunks = [range(start, min(start + BATCH_CHUNK, rows)) for start in range(0, rows, BATCH_CHUNK)]

    def job(chunk: range) -> np.ndarray:
        return np.array([_quantile_merge(values_a[r], masses_a, values_b[r], masses_b, p) for r in chunk])

    parts = ordered_map(job, chunks, threads)
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts) ** (1.0 / p)


def moment(mu: EmpiricalMeasure, p: float) -> float:
    """
    p-th moment sum_i masses_i |x_i|^p (no root taken).

    Example:
        >>> moment(EmpiricalMeasure.uniform(np.array([[-1.0], [1.0]])), 2.0)
        1.0
    """
    _check_p(p)
    return float(np.sum(mu.masses * np.linalg.norm(mu.points, axis=1) ** p))
