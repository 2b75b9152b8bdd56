"""
Semi-discrete optimal transport from the uniform sphere measure to L sites.

The source measure is discretized by a Monte-Carlo quadrature (SphereSample);
the target puts mass 1/L on each direction omega_l. A point omega belongs to
the Laguerre cell of the smallest index l minimizing

    c(omega, omega_l) + lambda_l

with c = |omega - omega_l|^p (extrinsic) or d_S(omega, omega_l)^p (intrinsic).
This is the maximizer of -c - lambda written as a minimization; the 1/p factor
of the textbook potential is absorbed into lambda.

Weights are found by ascent on the concave Kantorovich dual

    G(lambda) = mean_i min_l (c_il + lambda_l) - (1/L) sum_l lambda_l,

whose gradient is m_l(lambda) - 1/L (cell mass minus target mass).
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .geometry import (
    SpherePartError,
    SphereSample,
    UnitVector,
    as_coords,
    chordal_from_dot,
    geodesic_from_dot,
    pairwise_dot,
    sample_uniform,
)
from .logger import progress_disabled, setup_logger
from .parallel import ordered_map

logger = setup_logger(__name__)

COST_NAMES = ('extrinsic', 'intrinsic')

# Rows of the quadrature handled per cost-matrix block
SCAN_CHUNK = 16384
# Quadrature points required per cell
MIN_POINTS_PER_CELL = 50
# Stream key of the held-out validation sample under the quadrature seed
HELDOUT_STREAM = 104729
# Least number of standard deviations of held-out mass noise a tolerance must clear
HELDOUT_SIGMAS = 3.0
# Training tolerance is refined down to tol / this before giving up
TRAIN_TOL_MIN_RATIO = 8.0
# Line search
ARMIJO = 1e-4
STEP_GROW = 2.0
STEP_SHRINK = 0.5
MIN_STEP_RATIO = 1e-12
DEFAULT_MAX_ITER = 2000


class NonConvergence(SpherePartError):
    """The dual ascent hit max_iter (or stalled) above the mass tolerance."""

    def __init__(self, max_mass_error: float, iterations: int, weights: Optional['DualWeights'] = None):
        super().__init__(
            f"Solver did not reach the mass tolerance after {iterations} iterations "
            f"(max mass error {max_mass_error:.3e}); enlarge the quadrature or the tolerance"
        )
        self.max_mass_error = max_mass_error
        self.iterations = iterations
        self.weights = weights


class EmptyCellAtStart(SpherePartError):
    """Some Voronoi cell (lambda = 0) holds no quadrature point."""

    def __init__(self, cells: Sequence[int]):
        super().__init__(
            f"Cells {list(cells)} carry no quadrature mass at lambda = 0; the quadrature is too small for L"
        )
        self.cells = list(cells)


@dataclass(frozen=True)
class CostKind:
    """Ground cost on the sphere: chordal or geodesic distance to the power p."""

    name: str
    p: float

    def __post_init__(self):
        if self.name not in COST_NAMES:
            raise ValueError(f"Cost kind must be one of {COST_NAMES}, got {self.name!r}")
        if not self.p > 1.0:
            raise ValueError(f"Cost exponent p must be > 1, got {self.p}")
        object.__setattr__(self, 'p', float(self.p))

    @classmethod
    def extrinsic(cls, p: float) -> 'CostKind':
        return cls('extrinsic', p)

    @classmethod
    def intrinsic(cls, p: float) -> 'CostKind':
        return cls('intrinsic', p)

    def distance_from_dot(self, dot: np.ndarray) -> np.ndarray:
        """Ground distance for unit vectors with the given inner products."""
        if self.name == 'extrinsic':
            return chordal_from_dot(dot)
        return geodesic_from_dot(dot)

    def cost_from_dot(self, dot: np.ndarray) -> np.ndarray:
        if self.name == 'extrinsic' and self.p == 2.0:
            return np.maximum(2.0 - 2.0 * dot, 0.0)
        return self.distance_from_dot(dot) ** self.p

    def cost_matrix(self, points: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """(count, L) matrix of c(point_i, direction_l)."""
        return self.cost_from_dot(pairwise_dot(points, directions))

    @property
    def diameter(self) -> float:
        """Diameter of the sphere in the ground distance (2 or pi)."""
        return 2.0 if self.name == 'extrinsic' else float(np.pi)

    def to_dict(self) -> Dict:
        return {'name': self.name, 'p': self.p}

    @classmethod
    def from_dict(cls, data: Dict) -> 'CostKind':
        return cls(data['name'], float(data['p']))


def _as_directions(directions: Union[np.ndarray, Sequence[UnitVector]]) -> np.ndarray:
    if isinstance(directions, np.ndarray):
        arr = np.array(directions, dtype=float, copy=True)
    else:
        arr = np.array([as_coords(d) for d in directions], dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError(f"Directions must form an (L, n) array with L >= 1, n >= 2, got shape {arr.shape}")
    return arr / np.linalg.norm(arr, axis=1)[:, None]


@dataclass(frozen=True, eq=False)
class DualWeights:
    """Laguerre weights lambda_l for the sites omega_l, gauge-fixed so min(lambda) = 0."""

    lambdas: np.ndarray
    directions: np.ndarray
    cost_kind: CostKind

    def __post_init__(self):
        directions = _as_directions(self.directions)
        lambdas = np.array(self.lambdas, dtype=float, copy=True).reshape(-1)
        if lambdas.shape[0] != directions.shape[0]:
            raise ValueError(f"Got {lambdas.shape[0]} weights for {directions.shape[0]} directions")
        if not np.all(np.isfinite(lambdas)):
            raise ValueError("Dual weights must be finite")
        lambdas = lambdas - lambdas.min()
        lambdas.setflags(write=False)
        directions.setflags(write=False)
        object.__setattr__(self, 'lambdas', lambdas)
        object.__setattr__(self, 'directions', directions)

    @property
    def L(self) -> int:
        return int(self.directions.shape[0])

    @property
    def n(self) -> int:
        return int(self.directions.shape[1])

    def shifted(self, constant: float) -> 'DualWeights':
        """Same weights plus a constant (gauge-fixed again, so identical cells)."""
        return DualWeights(self.lambdas + constant, self.directions, self.cost_kind)

    def to_dict(self) -> Dict:
        return {
            'lambdas': self.lambdas.tolist(),
            'directions': self.directions.tolist(),
            'cost_kind': self.cost_kind.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'DualWeights':
        return cls(
            lambdas=np.asarray(data['lambdas'], dtype=float),
            directions=np.asarray(data['directions'], dtype=float),
            cost_kind=CostKind.from_dict(data['cost_kind']),
        )


@dataclass
class SolveReport:
    """Outcome of solve_dual."""

    iterations: int
    max_mass_error: float          # held-out, probability units
    dual_value: float
    transport_cost_p: float        # MK_p^p estimate on the quadrature
    quadrature_size: int
    train_max_mass_error: float = 0.0
    tol: float = 0.0
    converged: bool = False
    accepted_steps: int = 0
    rejected_steps: int = 0
    quad_seed: int = -1
    quad_stream: Tuple[int, ...] = ()
    heldout_stream: Tuple[int, ...] = ()
    dual_history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['quad_stream'] = list(self.quad_stream)
        data['heldout_stream'] = list(self.heldout_stream)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SolveReport':
        data = dict(data)
        data['quad_stream'] = tuple(data.get('quad_stream', ()))
        data['heldout_stream'] = tuple(data.get('heldout_stream', ()))
        return cls(**data)


def laguerre_scan(
    points: np.ndarray,
    weights: DualWeights,
    threads: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Assign every point to its Laguerre cell.

    Args:
        points: (count, n) unit vectors
        weights: Dual weights and sites
        threads: Worker threads for the chunked scan

    Returns:
        Tuple of (labels, shifted, cost)
        - labels: cell index per point (smallest index on ties)
        - shifted: min_l (c_il + lambda_l) per point
        - cost: c(point, site of its cell) per point
    """
    points = np.asarray(points, dtype=float)
    if points.shape[1] != weights.n:
        raise ValueError(f"Dimension mismatch: points have n={points.shape[1]}, sites n={weights.n}")
    count = points.shape[0]
    chunks = [slice(start, min(start + SCAN_CHUNK, count)) for start in range(0, count, SCAN_CHUNK)]

    def scan(chunk: slice):
        cost = weights.cost_kind.cost_matrix(points[chunk], weights.directions)
        total = cost + weights.lambdas
        labels = np.argmin(total, axis=1)
        rows = np.arange(labels.shape[0])
        return labels, total[rows, labels], cost[rows, labels]

    parts = ordered_map(scan, chunks, threads)
    labels = np.concatenate([part[0] for part in parts])
    shifted = np.concatenate([part[1] for part in parts])
    cost = np.concatenate([part[2] for part in parts])
    return labels, shifted, cost


def assign(omega: Union[UnitVector, np.ndarray], w: DualWeights) -> int:
    """
    Cell index (0-based) of one point: smallest l minimizing c(omega, omega_l) + lambda_l.

    Example:
        >>> w = DualWeights(np.zeros(2), np.array([[1.0, 0.0], [-1.0, 0.0]]), CostKind.extrinsic(2))
        >>> assign(UnitVector([0.9, 0.1]), w)
        0
    """
    coords = as_coords(omega).reshape(1, -1)
    if coords.shape[1] != w.n:
        raise ValueError(f"Dimension mismatch: point has n={coords.shape[1]}, sites n={w.n}")
    labels, _, _ = laguerre_scan(coords, w, threads=1)
    return int(labels[0])


def _masses(labels: np.ndarray, L: int) -> np.ndarray:
    return np.bincount(labels, minlength=L) / labels.shape[0]


def cell_masses(w: DualWeights, quad: SphereSample, threads: Optional[int] = None) -> np.ndarray:
    """Fraction of quadrature points in each cell (sums to 1)."""
    labels, _, _ = laguerre_scan(quad.points, w, threads)
    return _masses(labels, w.L)


def transport_cost(w: DualWeights, quad: SphereSample, threads: Optional[int] = None) -> float:
    """Quadrature average of c(omega, omega_{assign(omega)})."""
    _, _, cost = laguerre_scan(quad.points, w, threads)
    return float(np.mean(cost))


def dual_value(w: DualWeights, quad: SphereSample, threads: Optional[int] = None) -> float:
    """Kantorovich dual G(lambda) on the quadrature."""
    _, shifted, _ = laguerre_scan(quad.points, w, threads)
    return float(np.mean(shifted) - np.mean(w.lambdas))


def _check_distinct(directions: np.ndarray) -> None:
    if directions.shape[0] < 2:
        return
    dots = pairwise_dot(directions, directions)
    np.fill_diagonal(dots, -1.0)
    i, j = np.unravel_index(np.argmax(dots), dots.shape)
    if chordal_from_dot(dots[i, j]) <= 1e-12:
        raise ValueError(f"Directions must be pairwise distinct: {i} and {j} coincide")


def heldout_sample(quad: SphereSample) -> SphereSample:
    """Validation sample of the same size on a fresh stream under the quadrature seed."""
    seed = quad.seed if quad.seed >= 0 else 0
    return sample_uniform(quad.n, quad.count, seed, stream=tuple(quad.stream) + (HELDOUT_STREAM,))


def _noise_sigmas(L: int) -> float:
    # the error is a maximum over L cells, which grows like sqrt(2 log 2L)
    return max(HELDOUT_SIGMAS, float(np.sqrt(2.0 * np.log(2.0 * L))))


def heldout_resolution(L: int, count: int) -> float:
    """
    Smallest mass tolerance a held-out check on `count` points can confirm.

    A fitted cell's held-out mass misses 1/L by the training and the held-out
    binomial noise together, sqrt(2 (1/L)(1 - 1/L) / count) per cell.
    """
    share = 1.0 / L
    return _noise_sigmas(L) * float(np.sqrt(2.0 * share * (1.0 - share) / count))


def required_quadrature(L: int, tol: float) -> int:
    """Quadrature size whose held-out resolution is at most tol (and >= 50 L)."""
    if not tol > 0.0:
        raise ValueError(f"Tolerance must be > 0, got {tol}")
    share = 1.0 / L
    # one spare point keeps heldout_resolution(L, needed) <= tol under rounding
    needed = int(np.ceil(2.0 * share * (1.0 - share) * (_noise_sigmas(L) / tol) ** 2)) + 1
    return max(MIN_POINTS_PER_CELL * L, needed)


def _initial_step(cost: np.ndarray, L: int) -> float:
    """Step turning a mass excess of ~1/L into a weight change of about one cost gap."""
    if L < 2:
        return 1.0
    part = np.partition(cost, 1, axis=1)
    gap = float(np.mean(part[:, 1] - part[:, 0]))
    return max(gap, np.finfo(float).tiny) * L


def solve_dual(
    directions: Union[np.ndarray, Sequence[UnitVector]],
    cost_kind: CostKind,
    quad: SphereSample,
    tol: float,
    max_iter: int = DEFAULT_MAX_ITER,
    heldout: Optional[SphereSample] = None,
    threads: Optional[int] = None,
    min_points_per_cell: int = MIN_POINTS_PER_CELL,
    show_progress: Optional[bool] = None,
) -> Tuple[DualWeights, SolveReport]:
    """
    Find Laguerre weights giving every cell mass 1/L.

    Gradient ascent on the concave dual G. The trial step is the
    Barzilai-Borwein step of the last accepted move; backtracking accepts it
    only if G rises by the Armijo amount and no cell's mass drops below
    (1/(2L)) * (minimum cell mass at lambda = 0). Training stops at half the
    tolerance; the result is accepted once the held-out sample also meets tol.

    Args:
        directions: (L, n) sites, pairwise distinct
        cost_kind: Extrinsic or intrinsic cost with exponent p
        quad: Quadrature sample, count >= 50 L
        tol: Target max |m_l - 1/L| on the held-out sample, >= heldout_resolution
        max_iter: Iteration budget
        heldout: Validation sample (default: fresh stream under quad.seed)
        threads: Worker threads for the scans
        min_points_per_cell: Quadrature floor per cell (count >= this * L)
        show_progress: Iteration progress bar (None = on when the console shows INFO)

    Returns:
        Tuple of (DualWeights, SolveReport)

    Raises:
        ValueError: On precondition violations, including a tol the held-out
            sample cannot resolve
        EmptyCellAtStart: If a Voronoi cell has no quadrature point
        NonConvergence: If the tolerance is not met within max_iter

    Example:
        >>> quad = sample_uniform(3, 20_000, seed=1)
        >>> dirs = sample_uniform(3, 8, seed=2).points
        >>> w, rep = solve_dual(dirs, CostKind.extrinsic(2), quad, tol=1e-2)
    """
    directions = _as_directions(directions)
    L, n = directions.shape
    if n != quad.n:
        raise ValueError(f"Dimension mismatch: directions n={n}, quadrature n={quad.n}")
    if not tol > 0.0:
        raise ValueError(f"Tolerance must be > 0, got {tol}")
    if quad.count < min_points_per_cell * L:
        raise ValueError(f"Quadrature of {quad.count} points is below {min_points_per_cell} * L = {min_points_per_cell * L}")
    _check_distinct(directions)

    heldout = heldout_sample(quad) if heldout is None else heldout
    if heldout is not quad:
        resolution = heldout_resolution(L, min(quad.count, heldout.count))
        if tol < resolution:
            raise ValueError(
                f"Tolerance {tol:g} is below the held-out resolution {resolution:.3g} for L={L} "
                f"and {quad.count} points; use tol >= {resolution:.3g} or at least "
                f"{required_quadrature(L, tol)} points"
            )
    target = 1.0 / L
    count = quad.count

    weights = DualWeights(np.zeros(L), directions, cost_kind)
    labels, shifted, cost = laguerre_scan(quad.points, weights, threads)
    masses = _masses(labels, L)
    empty = np.flatnonzero(masses == 0.0)
    if empty.size:
        raise EmptyCellAtStart(empty.tolist())
    mass_floor = masses.min() / (2.0 * L)

    dual = float(np.mean(shifted) - np.mean(weights.lambdas))
    history = [dual]
    step = _initial_step(cost_kind.cost_matrix(quad.points[:min(count, SCAN_CHUNK)], directions), L)
    min_step = step * MIN_STEP_RATIO
    train_tol = tol / 2.0
    train_floor = tol / TRAIN_TOL_MIN_RATIO
    accepted = rejected = 0
    heldout_error = np.inf
    converged = False
    iteration = 0

    logger.info(f"Solving dual: L={L} n={n} cost={cost_kind.name} p={cost_kind.p} "
                f"quad={count} tol={tol:g}")
    if show_progress is None:
        show_progress = not progress_disabled(logger)
    progress = tqdm(total=max_iter, desc="Dual ascent", disable=not show_progress, leave=False)
    try:
        while True:
            grad = masses - target
            error = float(np.max(np.abs(grad)))
            if error <= train_tol:
                heldout_error = float(np.max(np.abs(cell_masses(weights, heldout, threads) - target)))
                logger.debug(f"iter {iteration}: train error {error:.3e}, held-out error {heldout_error:.3e}")
                if heldout_error <= tol:
                    converged = True
                    break
                if train_tol <= train_floor:
                    logger.warning(f"Held-out error {heldout_error:.3e} stays above tol {tol:g} "
                                   f"with the training error at {error:.3e}")
                    break
                train_tol = max(train_tol / 2.0, train_floor)
                continue
            if iteration >= max_iter:
                break

            iteration += 1
            progress.update(1)
            gain = float(grad @ grad)
            moved = False
            while step >= min_step:
                trial = DualWeights(weights.lambdas + step * grad, directions, cost_kind)
                t_labels, t_shifted, t_cost = laguerre_scan(quad.points, trial, threads)
                t_masses = _masses(t_labels, L)
                t_dual = float(np.mean(t_shifted) - np.mean(trial.lambdas))
                if t_dual >= dual + ARMIJO * step * gain and t_masses.min() >= mass_floor:
                    moved = True
                    break
                rejected += 1
                step *= STEP_SHRINK
            if not moved:
                logger.warning(f"Line search stalled at iteration {iteration} (error {error:.3e})")
                break

            accepted += 1
            # Barzilai-Borwein curvature along the accepted move
            delta_grad = (t_masses - target) - grad
            curvature = -float((step * grad) @ delta_grad)
            if curvature > 0.0:
                step = (step * step * gain) / curvature
            else:
                step *= STEP_GROW
            step = max(step, min_step)

            weights, labels, cost, masses, dual = trial, t_labels, t_cost, t_masses, t_dual
            history.append(dual)
            if iteration % 50 == 0:
                logger.debug(f"iter {iteration}: max mass error {error:.3e}, dual {dual:.10g}, step {step:.3e}")
    finally:
        progress.close()

    train_error = float(np.max(np.abs(masses - target)))
    if not np.isfinite(heldout_error):
        heldout_error = float(np.max(np.abs(cell_masses(weights, heldout, threads) - target)))

    report = SolveReport(
        iterations=iteration,
        max_mass_error=heldout_error,
        dual_value=dual,
        transport_cost_p=float(np.mean(cost)),
        quadrature_size=count,
        train_max_mass_error=train_error,
        tol=float(tol),
        converged=converged,
        accepted_steps=accepted,
        rejected_steps=rejected,
        quad_seed=int(quad.seed),
        quad_stream=tuple(quad.stream),
        heldout_stream=tuple(heldout.stream),
        dual_history=history,
    )
    if not converged:
        raise NonConvergence(heldout_error, iteration, weights)

    logger.info(f"Converged in {iteration} iterations: held-out mass error {heldout_error:.3e}, "
                f"MK_p^p = {report.transport_cost_p:.6g}")
    return weights, report


def mk_distance(report: SolveReport, p: float) -> float:
    """
    MK_p distance from a solve: transport_cost_p^(1/p).

    Example:
        >>> mk_distance(SolveReport(1, 0.0, 0.0, 0.0, 100, converged=True), 2.0)
        0.0
    """
    if not report.converged:
        logger.warning("mk_distance called on a report that did not converge")
    return float(report.transport_cost_p ** (1.0 / p))
