"""
Expected max-diameter scaling of partitions built on random directions.

For every (L, trial) pair, L i.i.d. uniform directions are drawn, the
equal-area partition is built and its largest sampled cell diameter is
recorded. The slope of log(mean max diameter) against log(L) is fitted by
least squares, with a bootstrap band over trials, and compared with the
decay exponent of the expected-diameter bound.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.utils import resample

from .geometry import make_rng, sample_uniform
from .io import write_frame, write_json
from .logger import progress_disabled, setup_logger
from .parallel import ordered_map
from .partition import cell_diameters, partition_from_weights
from .transport import (
    COST_NAMES,
    CostKind,
    EmptyCellAtStart,
    NonConvergence,
    mk_distance,
    required_quadrature,
    solve_dual,
)

logger = setup_logger(__name__)

DEFAULT_L_GRID = (8, 16, 32, 64, 128, 256)
DEFAULT_TRIALS = 10
DEFAULT_QUAD_SIZE = 50_000
DEFAULT_TOL = 5e-3
DEFAULT_BOOTSTRAP = 1000
# Allowed excess of the fitted slope over the bound's exponent
SLOPE_SLACK = 0.05

# Stream keys under the run seed
DIRECTIONS_STREAM = 1
QUAD_STREAM = 2
BOOTSTRAP_STREAM = 3

CSV_COLUMNS = [
    'L', 'trial', 'max_diam_geodesic', 'max_diam_euclidean', 'mk_value',
    'iterations', 'max_mass_error', 'quad_size', 'attempts', 'converged',
]


def scaling_exponent(n: int, p: float) -> Tuple[float, bool]:
    """
    Decay exponent of the expected max-diameter bound in L, and whether it carries a log factor.

    Example:
        >>> scaling_exponent(3, 2.0)
        (-0.125, False)
        >>> scaling_exponent(4, 2.0)
        (-0.1, True)
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not p > 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    if math.isclose(p, n / 2.0):
        return -1.0 / (2.0 * (n - 1 + p)), True
    if p > n / 2.0:
        return -1.0 / (2.0 * (n - 1 + p)), False
    return -p / (2.0 * n * (n - 1 + p)), False


def fournier_guillin_exponents(n: int, p: float, q: float) -> Dict[str, float]:
    """
    Rate exponents for the expected MK_p between a measure with finite q-th
    moment and its L-sample empirical measure (constants not reproduced).

    Returns:
        Dict with 'main' (the sampling term exponent), 'tail' (-(q-p)/p),
        'rate' (the slower of the two) and 'log_factor' (1.0 if the main
        term carries log(1+L), else 0.0)
    """
    if not (1.0 <= p < q):
        raise ValueError(f"Need 1 <= p < q, got p={p}, q={q}")
    if p >= n / 2.0 and math.isclose(q, 2.0 * p):
        raise ValueError(f"q = 2p is excluded when p >= n/2 (p={p}, n={n})")
    if p < n / 2.0 and math.isclose(q, n * p / (n - p)):
        raise ValueError(f"q = np/(n-p) is excluded when p < n/2 (p={p}, n={n})")

    if math.isclose(p, n / 2.0):
        main, log_factor = -0.5, True
    elif p > n / 2.0:
        main, log_factor = -0.5, False
    else:
        main, log_factor = -p / n, True
    tail = -(q - p) / p
    return {'main': main, 'tail': tail, 'rate': max(main, tail), 'log_factor': float(log_factor)}


@dataclass
class TrialResult:
    """One (L, trial) partition build."""

    L: int
    trial: int
    max_diam_geodesic: float
    max_diam_euclidean: float
    mk_value: float
    iterations: int
    max_mass_error: float
    quad_size: int
    attempts: int
    converged: bool


@dataclass
class ScalingRun:
    """Max-diameter samples over an L grid and the fitted decay."""

    n: int
    p: float
    L_grid: List[int]
    trials_per_L: int
    max_diams: np.ndarray
    fitted_slope: float
    theoretical_exponent: float
    seed: int
    has_log_factor: bool = False
    cost: str = 'intrinsic'
    quad_size: int = DEFAULT_QUAD_SIZE
    tol: float = DEFAULT_TOL
    intercept: float = float('nan')
    slope_band: Tuple[float, float] = (float('nan'), float('nan'))
    n_bootstrap: int = DEFAULT_BOOTSTRAP
    trials: List[TrialResult] = field(default_factory=list)

    @property
    def failed_trials(self) -> List[Tuple[int, int]]:
        """(L, trial) pairs that did not converge after the retry."""
        return [(t.L, t.trial) for t in self.trials if not t.converged]

    @property
    def slope_within_bound(self) -> bool:
        return bool(self.fitted_slope <= self.theoretical_exponent + SLOPE_SLACK)

    def to_frame(self) -> pd.DataFrame:
        rows = [{c: getattr(t, c) for c in CSV_COLUMNS} for t in self.trials]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)


def run_trial(
    n: int,
    p: float,
    L: int,
    trial: int,
    quad_size: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    cost: str = 'intrinsic',
    max_iter: Optional[int] = None,
) -> TrialResult:
    """
    Build one partition on fresh random directions and measure it.

    The quadrature is raised to required_quadrature(L, tol) when quad_size
    cannot resolve the tolerance. A trial whose solve fails is retried once
    with twice the quadrature; a second failure returns a result with
    converged=False and NaN diameters.
    """
    cost_kind = CostKind(cost, p)
    directions = sample_uniform(n, L, seed, stream=(DIRECTIONS_STREAM, L, trial)).points
    size = max(quad_size, required_quadrature(L, tol))
    if size > quad_size:
        logger.debug(f"L={L} trial={trial}: quadrature raised to {size} to resolve tol={tol:g}")
    for attempt in (1, 2):
        quad = sample_uniform(n, size, seed, stream=(QUAD_STREAM, L, trial, attempt))
        try:
            kwargs = {} if max_iter is None else {'max_iter': max_iter}
            weights, report = solve_dual(directions, cost_kind, quad, tol, threads=1, show_progress=False, **kwargs)
        except (NonConvergence, EmptyCellAtStart) as e:
            logger.warning(f"L={L} trial={trial} attempt {attempt} failed: {e}")
            size *= 2
            continue
        part = partition_from_weights(weights, report, quad, threads=1)
        geodesic, euclidean = cell_diameters(part, threads=1)
        return TrialResult(
            L=L, trial=trial,
            max_diam_geodesic=float(geodesic.max()),
            max_diam_euclidean=float(euclidean.max()),
            mk_value=mk_distance(report, p),
            iterations=report.iterations,
            max_mass_error=report.max_mass_error,
            quad_size=quad.count,
            attempts=attempt,
            converged=True,
        )
    logger.error(f"L={L} trial={trial} flagged: no convergence after retry")
    nan = float('nan')
    return TrialResult(L, trial, nan, nan, nan, 0, nan, size // 2, 2, False)


def _fit_slope(L_values: np.ndarray, means: np.ndarray) -> Tuple[float, float]:
    model = LinearRegression()
    model.fit(np.log(L_values).reshape(-1, 1), np.log(means))
    return float(model.coef_[0]), float(model.intercept_)


def _bootstrap_band(
    grid: Sequence[int],
    samples: List[np.ndarray],
    n_bootstrap: int,
    seed: int,
) -> Tuple[float, float]:
    """2.5% and 97.5% quantiles of the slope when trials are resampled within each L."""
    if n_bootstrap < 1:
        return float('nan'), float('nan')
    rng = make_rng(seed, BOOTSTRAP_STREAM)
    states = rng.integers(0, 2**31 - 1, size=(n_bootstrap, len(grid)))
    L_values = np.asarray(grid, dtype=float)
    slopes = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        means = np.array([
            np.mean(resample(values, replace=True, random_state=int(states[b, i])))
            for i, values in enumerate(samples)
        ])
        slopes[b], _ = _fit_slope(L_values, means)
    return float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5))


def scaling_experiment(
    n: int,
    p: float,
    L_grid: Sequence[int] = DEFAULT_L_GRID,
    trials: int = DEFAULT_TRIALS,
    quad_size: int = DEFAULT_QUAD_SIZE,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    cost: str = 'intrinsic',
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    threads: Optional[int] = None,
    max_iter: Optional[int] = None,
) -> ScalingRun:
    """
    Run every (L, trial) build and fit the decay of the mean max diameter.

    Args:
        n: Ambient dimension
        p: Cost exponent (> 1)
        L_grid: Strictly increasing cell counts, each >= 2
        trials: Trials per L (>= 3)
        quad_size: Quadrature size per build, at least required_quadrature(L, tol) (doubled on retry)
        seed: Root seed
        tol: Held-out mass tolerance
        cost: 'intrinsic' or 'extrinsic'
        n_bootstrap: Bootstrap resamples for the slope band
        threads: Trials run in parallel on this many threads
        max_iter: Solver iteration budget (None = solver default)

    Returns:
        ScalingRun
    """
    grid = [int(L) for L in L_grid]
    if len(grid) < 2:
        raise ValueError(f"L grid needs at least two values, got {grid}")
    if any(L < 2 for L in grid):
        raise ValueError(f"Every L must be >= 2, got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"L grid must be strictly increasing, got {grid}")
    if trials < 3:
        raise ValueError(f"Need at least 3 trials per L, got {trials}")
    if cost not in COST_NAMES:
        raise ValueError(f"Unknown cost kind: {cost}")
    exponent, has_log = scaling_exponent(n, p)

    jobs = [(L, t) for L in grid for t in range(trials)]
    logger.info(f"Scaling run: n={n}, p={p}, grid={grid}, {trials} trials, {len(jobs)} builds")

    def job(key: Tuple[int, int]) -> TrialResult:
        L, t = key
        return run_trial(n, p, L, t, quad_size, seed, tol=tol, cost=cost, max_iter=max_iter)

    results = ordered_map(job, jobs, threads, desc='Trials', disable_progress=progress_disabled(logger))
    by_key = {(r.L, r.trial): r for r in results}

    max_diams = np.array([[by_key[(L, t)].max_diam_geodesic for t in range(trials)] for L in grid])
    samples = [row[np.isfinite(row)] for row in max_diams]
    usable = [i for i, s in enumerate(samples) if s.size > 0]
    if len(usable) < 2:
        raise ValueError("Fewer than two L values have a converged trial; cannot fit a slope")
    fit_grid = [grid[i] for i in usable]
    fit_samples = [samples[i] for i in usable]
    means = np.array([s.mean() for s in fit_samples])
    slope, intercept = _fit_slope(np.asarray(fit_grid, dtype=float), means)
    band = _bootstrap_band(fit_grid, fit_samples, n_bootstrap, seed)

    run = ScalingRun(
        n=n, p=p, L_grid=grid, trials_per_L=trials, max_diams=max_diams,
        fitted_slope=slope, theoretical_exponent=exponent, seed=seed,
        has_log_factor=has_log, cost=cost, quad_size=quad_size, tol=tol,
        intercept=intercept, slope_band=band, n_bootstrap=n_bootstrap,
        trials=[by_key[key] for key in jobs],
    )
    logger.info(f"Fitted slope {slope:.4f} (95% band {band[0]:.4f} .. {band[1]:.4f}), "
                f"bound exponent {exponent:.4f}{' with log factor' if has_log else ''}")
    if run.failed_trials:
        logger.warning(f"Failed trials (L, trial): {run.failed_trials}")
    if not run.slope_within_bound:
        logger.warning(f"Fitted slope exceeds bound exponent + {SLOPE_SLACK}")
    return run


def summary(run: ScalingRun) -> Dict:
    """Per-L statistics, the fit, and the comparison lines."""
    frame = run.to_frame()
    stats = (frame[frame['converged']]
             .groupby('L')['max_diam_geodesic']
             .agg(['mean', 'std', 'min', 'max', 'count'])
             .reindex(run.L_grid))
    per_L = []
    for L, row in stats.iterrows():
        per_L.append({
            'L': int(L),
            'mean': row['mean'],
            'std': row['std'],
            'min': row['min'],
            'max': row['max'],
            'converged_trials': int(0 if pd.isna(row['count']) else row['count']),
        })

    # Comparison line anchored at the first L with data
    L_values = np.asarray(run.L_grid, dtype=float)
    anchor = next(i for i, entry in enumerate(per_L) if entry['converged_trials'] > 0)
    L0, y0 = L_values[anchor], per_L[anchor]['mean']
    line = y0 * (L_values / L0) ** run.theoretical_exponent
    if run.has_log_factor:
        line *= (np.log1p(L_values) / np.log1p(L0)) ** (1.0 / (run.n - 1 + run.p))
    empirical_rate = -1.0 / (run.n - 1)

    return {
        'n': run.n,
        'p': run.p,
        'cost': run.cost,
        'seed': run.seed,
        'quad_size': run.quad_size,
        'tol': run.tol,
        'L_grid': run.L_grid,
        'trials_per_L': run.trials_per_L,
        'per_L': per_L,
        'fitted_slope': run.fitted_slope,
        'intercept': run.intercept,
        'slope_band_95': list(run.slope_band),
        'n_bootstrap': run.n_bootstrap,
        'theoretical_exponent': run.theoretical_exponent,
        'has_log_factor': run.has_log_factor,
        'theoretical_line': line.tolist(),
        'slope_within_bound': run.slope_within_bound,
        'slope_slack': SLOPE_SLACK,
        'empirical_rate_reference': empirical_rate,
        'empirical_line': (y0 * (L_values / L0) ** empirical_rate).tolist(),
        'failed_trials': [list(t) for t in run.failed_trials],
    }


def report(run: ScalingRun, out_dir: Path) -> Tuple[Path, Path]:
    """
    Write scaling.csv (one row per (L, trial)) and scaling_summary.json.

    Returns:
        Tuple of (csv_path, json_path)
    """
    out_dir = Path(out_dir)
    csv_path = write_frame(run.to_frame(), out_dir / 'scaling.csv')
    json_path = write_json(summary(run), out_dir / 'scaling_summary.json')
    logger.info(f"✓ Saved scaling table: {csv_path}")
    logger.info(f"✓ Saved scaling summary: {json_path}")
    return csv_path, json_path
