"""
Equal-area partitions of the sphere and verification of their diameter bounds.

A Partition is the Laguerre diagram of solved dual weights, observed through
its quadrature points. Diameters and radii are measured on those points, so
they are lower bounds of the true values for the closed cells: a violation
seen on the sample is a violation of the true diameter too, but a pass does
not certify tightness.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .constants import (
    ExtrinsicConstants,
    IntrinsicConstants,
    PartitionConstants,
    extrinsic_h_inverse,
    h_lower_bound_inverse,
)
from .geometry import (
    SpherePartError,
    SphereSample,
    UnitVector,
    chordal_distance,
    geodesic_distance,
    make_rng,
    sample_uniform,
)
from .logger import setup_logger
from .parallel import ordered_map
from .transport import (
    DEFAULT_MAX_ITER,
    CostKind,
    DualWeights,
    SolveReport,
    _as_directions,
    laguerre_scan,
    solve_dual,
)

logger = setup_logger(__name__)

# Cells up to this many points get an exact pairwise scan
EXACT_SCAN_LIMIT = 4096
# Farthest-point candidates kept from each end of the heuristic pair
CANDIDATES_PER_END = 1024
# Random probes whose farthest partners are always included
DIAMETER_PROBES = 64
# Stream key (under the quadrature seed) of the probe generator
PROBE_STREAM = 7919
_BLOCK = 1024

DIAMETER_NOTE = (
    "Diameters and radii are maxima over quadrature points of each cell, i.e. lower "
    "bounds of the true values: a reported violation is real, a pass does not certify tightness."
)


class CostKindMismatch(SpherePartError):
    """Partition, constants or MK value belong to different cost kinds."""


class UnsolvedPartition(SpherePartError):
    """A partition whose held-out mass error exceeds its tolerance was used as equal-area."""


@dataclass(frozen=True, eq=False)
class Partition:
    """Equal-area partition observed on its quadrature sample."""

    weights: DualWeights
    report: SolveReport
    cell_mass: np.ndarray
    cell_count: np.ndarray
    quad_assignments: np.ndarray
    quad: SphereSample

    def __post_init__(self):
        for name in ('cell_mass', 'cell_count', 'quad_assignments'):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.quad_assignments.shape[0] != self.quad.count:
            raise ValueError("Every quadrature point needs exactly one cell")

    @property
    def L(self) -> int:
        return self.weights.L

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def cost_kind(self) -> CostKind:
        return self.weights.cost_kind

    @property
    def tol(self) -> float:
        return self.report.tol

    @property
    def empty_cells(self) -> List[int]:
        """Cells whose mass fell below the solve tolerance (solver non-convergence marker)."""
        return np.flatnonzero(self.cell_mass < self.tol).tolist()

    @property
    def is_equal_area(self) -> bool:
        return bool(self.report.converged and self.report.max_mass_error <= self.report.tol)

    def cell_points(self, cell: int) -> np.ndarray:
        return self.quad.points[self.quad_assignments == cell]

    def to_dict(self) -> Dict:
        return {
            'weights': self.weights.to_dict(),
            'report': self.report.to_dict(),
            'cell_mass': self.cell_mass.tolist(),
            'cell_count': self.cell_count.astype(int).tolist(),
            'quad': {
                'n': self.quad.n,
                'count': self.quad.count,
                'seed': self.quad.seed,
                'stream': list(self.quad.stream),
            },
            'quad_assignments': self.quad_assignments.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict, quad: Optional[SphereSample] = None) -> 'Partition':
        """Rebuild a partition; the quadrature is regenerated from its seed unless given."""
        if quad is None:
            spec = data['quad']
            quad = sample_uniform(spec['n'], spec['count'], spec['seed'], stream=tuple(spec['stream']))
        return cls(
            weights=DualWeights.from_dict(data['weights']),
            report=SolveReport.from_dict(data['report']),
            cell_mass=np.asarray(data['cell_mass'], dtype=float),
            cell_count=np.asarray(data['cell_count'], dtype=int),
            quad_assignments=np.asarray(data['quad_assignments'], dtype=int),
            quad=quad,
        )

    def to_points_csv(self, path: Path) -> None:
        """Point coordinates plus cell id, one row per quadrature point."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(self.quad.points, columns=[f'x{i}' for i in range(self.n)])
        frame['cell'] = self.quad_assignments.astype(int)
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.info(f"Saved point assignments: {path}")


@dataclass
class BoundReport:
    """Observed diameters and radii against the bounds under both constant conventions."""

    cost_kind: str
    n: int
    p: float
    L: int
    max_diam_geodesic: float
    max_diam_euclidean: float
    mk_value: float
    bound_printed: float
    bound_normalized: float
    satisfied_printed: bool
    satisfied_normalized: bool
    max_radius: float = 0.0
    radius_bound_printed: float = 0.0
    radius_bound_normalized: float = 0.0
    radius_bound_sharp: float = 0.0
    radius_satisfied_printed: bool = True
    radius_satisfied_normalized: bool = True
    radius_satisfied_sharp: bool = True
    radius_implies_diameter: bool = True
    empty_cells: List[int] = field(default_factory=list)
    diameters_are_lower_bounds: bool = True
    note: str = DIAMETER_NOTE

    @property
    def passed(self) -> bool:
        """Acceptance verdict: the normalized-constant checks."""
        return bool(self.satisfied_normalized and self.radius_satisfied_normalized)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['passed'] = self.passed
        return data


def build_partition(
    directions: Union[np.ndarray, Sequence[UnitVector]],
    cost_kind: CostKind,
    quad: Union[SphereSample, int],
    tol: float,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: Optional[int] = None,
) -> Partition:
    """
    Solve the dual problem and record the cell of every quadrature point.

    Args:
        directions: (L, n) sites
        cost_kind: Ground cost
        quad: Quadrature sample, or its size (then drawn with seed)
        tol: Held-out mass tolerance
        seed: Seed for the quadrature when quad is a size
        max_iter: Solver iteration budget
        threads: Worker threads

    Returns:
        Partition

    Raises:
        NonConvergence, EmptyCellAtStart: Propagated from solve_dual
        ValueError: From solve_dual when tol is below the held-out resolution
    """
    if isinstance(quad, (int, np.integer)):
        quad = sample_uniform(_as_directions(directions).shape[1], int(quad), seed)
    weights, report = solve_dual(directions, cost_kind, quad, tol, max_iter=max_iter, threads=threads)
    return partition_from_weights(weights, report, quad, threads)


def partition_from_weights(
    weights: DualWeights,
    report: SolveReport,
    quad: SphereSample,
    threads: Optional[int] = None,
) -> Partition:
    """Assign a quadrature to the cells of already solved weights."""
    labels, _, _ = laguerre_scan(quad.points, weights, threads)
    counts = np.bincount(labels, minlength=weights.L)
    masses = counts / quad.count
    partition = Partition(
        weights=weights,
        report=report,
        cell_mass=masses,
        cell_count=counts,
        quad_assignments=labels,
        quad=quad,
    )
    if partition.empty_cells:
        logger.warning(f"Cells with mass below tol: {partition.empty_cells} (solver did not converge)")
    logger.info(f"Partition: L={weights.L}, mass range [{masses.min():.5f}, {masses.max():.5f}], "
                f"target {1.0 / weights.L:.5f}")
    return partition


def _min_dot_exact(points: np.ndarray) -> Tuple[float, int, int]:
    best, pair = np.inf, (0, 0)
    for start in range(0, points.shape[0], _BLOCK):
        block = points[start:start + _BLOCK] @ points.T
        flat = int(np.argmin(block))
        i, j = divmod(flat, block.shape[1])
        if block[i, j] < best:
            best, pair = float(block[i, j]), (start + i, j)
    return best, pair[0], pair[1]


def _min_dot_heuristic(points: np.ndarray, rng: np.random.Generator) -> Tuple[float, int, int]:
    """Farthest-point walk, exact scan over the candidates at both ends, plus random probes."""
    a = 0
    b = int(np.argmin(points @ points[a]))
    for _ in range(3):
        a_next = int(np.argmin(points @ points[b]))
        if a_next == a:
            break
        a, b = b, a_next
    keep = min(CANDIDATES_PER_END, points.shape[0])
    from_a = np.argpartition(points @ points[a], keep - 1)[:keep]
    from_b = np.argpartition(points @ points[b], keep - 1)[:keep]
    candidates = np.unique(np.concatenate([from_a, from_b, [a, b]]))
    best, i, j = _min_dot_exact(points[candidates])
    best_pair = (int(candidates[i]), int(candidates[j]))

    probes = rng.choice(points.shape[0], size=min(DIAMETER_PROBES, points.shape[0]), replace=False)
    probe_dots = points[probes] @ points.T
    partners = np.argmin(probe_dots, axis=1)
    for probe, partner, row in zip(probes, partners, probe_dots):
        if row[partner] < best:
            best, best_pair = float(row[partner]), (int(probe), int(partner))
    return best, best_pair[0], best_pair[1]


def _cell_diameter(points: np.ndarray, rng: np.random.Generator) -> Tuple[float, float]:
    if points.shape[0] < 2:
        return 0.0, 0.0
    if points.shape[0] <= EXACT_SCAN_LIMIT:
        _, i, j = _min_dot_exact(points)
    else:
        _, i, j = _min_dot_heuristic(points, rng)
    u, v = points[i], points[j]
    return float(geodesic_distance(u, v)), float(chordal_distance(u, v))


def cell_diameters(part: Partition, threads: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sampled diameter of every cell, geodesic and Euclidean.

    Both come from the same maximizing pair (smallest inner product), so
    euclidean = 2 sin(geodesic / 2) cell by cell. Cells with fewer than two
    points report 0. Cells above EXACT_SCAN_LIMIT points use the
    farthest-point heuristic, never below the best of 64 random probes.

    Returns:
        Tuple of (geodesic, euclidean), arrays of length L
    """
    seed = part.quad.seed if part.quad.seed >= 0 else 0

    def job(cell: int) -> Tuple[float, float]:
        rng = make_rng(seed, PROBE_STREAM, cell)
        return _cell_diameter(part.cell_points(cell), rng)

    results = ordered_map(job, range(part.L), threads)
    geodesic = np.array([r[0] for r in results], dtype=float)
    euclidean = np.array([r[1] for r in results], dtype=float)
    return geodesic, euclidean


def cell_radii(part: Partition) -> np.ndarray:
    """Per cell, the largest ground distance from a point of the cell to its site."""
    radii = np.zeros(part.L)
    dots = np.clip(np.einsum('ij,ij->i', part.quad.points, part.weights.directions[part.quad_assignments]), -1.0, 1.0)
    distances = part.cost_kind.distance_from_dot(dots)
    np.maximum.at(radii, part.quad_assignments, distances)
    return radii


def verify_bound(
    part: Partition,
    consts: PartitionConstants,
    mk_value: float,
    threads: Optional[int] = None,
) -> BoundReport:
    """
    Check max cell diameter <= prefactor * MK_p^{p/(n-1+p)} under both conventions.

    Also checks the per-cell radius form (prefactor / 2), and a sharper radius
    bound obtained by inverting the lower-bound function H at MK_p^p.
    Intrinsic partitions are measured in geodesic diameter, extrinsic ones in
    Euclidean diameter.

    Args:
        part: Partition to check
        consts: IntrinsicConstants or ExtrinsicConstants matching part's cost kind
        mk_value: MK_p between the sphere measure and the sites, same cost kind
        threads: Worker threads for the diameter scans

    Returns:
        BoundReport

    Raises:
        CostKindMismatch: If consts do not belong to part's cost kind, n or p
    """
    kind = part.cost_kind
    if consts.kind != kind.name:
        raise CostKindMismatch(f"Partition cost is {kind.name} but constants are {consts.kind}")
    if consts.n != part.n or not np.isclose(consts.p, kind.p):
        raise CostKindMismatch(f"Constants for (n={consts.n}, p={consts.p}) do not match partition (n={part.n}, p={kind.p})")
    if mk_value < 0.0:
        raise ValueError(f"MK value must be >= 0, got {mk_value}")

    p, n = kind.p, part.n
    scale = mk_value ** (p / (n - 1 + p)) if mk_value > 0.0 else 0.0
    bound_printed = consts.prefactor(normalized=False) * scale
    bound_normalized = consts.prefactor(normalized=True) * scale

    geodesic, euclidean = cell_diameters(part, threads)
    observed = float(geodesic.max() if kind.name == 'intrinsic' else euclidean.max())
    max_radius = float(cell_radii(part).max())

    if isinstance(consts, IntrinsicConstants):
        radius_sharp = h_lower_bound_inverse(n, p, consts.a_p, mk_value ** p)
    elif isinstance(consts, ExtrinsicConstants):
        radius_sharp = extrinsic_h_inverse(n, p, consts.b_p, mk_value ** p)
    else:
        raise CostKindMismatch(f"Unsupported constants type {type(consts).__name__}")

    radius_printed = bound_printed / 2.0
    radius_normalized = bound_normalized / 2.0
    report = BoundReport(
        cost_kind=kind.name,
        n=n,
        p=p,
        L=part.L,
        max_diam_geodesic=float(geodesic.max()),
        max_diam_euclidean=float(euclidean.max()),
        mk_value=float(mk_value),
        bound_printed=float(bound_printed),
        bound_normalized=float(bound_normalized),
        satisfied_printed=bool(observed <= bound_printed),
        satisfied_normalized=bool(observed <= bound_normalized),
        max_radius=max_radius,
        radius_bound_printed=float(radius_printed),
        radius_bound_normalized=float(radius_normalized),
        radius_bound_sharp=float(radius_sharp),
        radius_satisfied_printed=bool(max_radius <= radius_printed),
        radius_satisfied_normalized=bool(max_radius <= radius_normalized),
        radius_satisfied_sharp=bool(max_radius <= radius_sharp),
        empty_cells=part.empty_cells,
    )
    # Triangle inequality: radius within R for every cell forces diameter within 2R
    report.radius_implies_diameter = bool(
        (not report.radius_satisfied_normalized or report.satisfied_normalized)
        and (not report.radius_satisfied_printed or report.satisfied_printed)
    )

    logger.info(f"Observed max diameter {observed:.6g} ({kind.name}); bound printed {bound_printed:.6g}, "
                f"normalized {bound_normalized:.6g}")
    if not report.satisfied_normalized:
        logger.warning("Diameter bound with the normalized constant is VIOLATED")
    if report.satisfied_normalized and not report.satisfied_printed:
        logger.warning("Diameter exceeds the bound with the printed constant but not the normalized one")
    if not report.radius_implies_diameter:
        logger.error("Radius check passed while the diameter check failed")
    return report
