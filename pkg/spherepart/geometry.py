"""
Sphere primitives for the partition pipeline.

Points on S^{n-1}, intrinsic (geodesic) and extrinsic (chordal) distances,
uniform sampling, sphere areas and normalized geodesic-cap measures.

Every random draw in the package goes through make_rng(): a Philox
(counter-based) generator addressed by (seed, stream...) keys.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate, special

from .logger import setup_logger

logger = setup_logger(__name__)

# Relative accuracy of the adaptive cap quadrature
CAP_QUAD_RTOL = 1e-10
# Slack when checking r <= a*pi for the concavity bound
_DOMAIN_SLACK = 1e-12


class SpherePartError(Exception):
    """Base class for domain failures raised by spherepart."""


class UnitVector:
    """Point on the unit sphere S^{n-1} (renormalized on construction)."""

    __slots__ = ('coords',)

    def __init__(self, coords: Sequence[float]):
        """
        Initialize unit vector.

        Args:
            coords: Ambient coordinates in R^n, n >= 2, not all zero

        Raises:
            ValueError: If n < 2, coordinates are not finite, or the vector is zero
        """
        arr = np.asarray(coords, dtype=float).reshape(-1)
        if arr.size < 2:
            raise ValueError(f"UnitVector needs n >= 2 coordinates, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"UnitVector coordinates must be finite: {arr}")
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            raise ValueError("Cannot normalize the zero vector onto the sphere")
        arr = arr / norm
        arr.setflags(write=False)
        self.coords = arr

    @property
    def n(self) -> int:
        """Ambient dimension."""
        return int(self.coords.size)

    def __neg__(self) -> 'UnitVector':
        return UnitVector(-self.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, UnitVector) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"UnitVector({self.coords.tolist()})"


VectorLike = Union[UnitVector, np.ndarray, Sequence[float]]


def as_coords(x: VectorLike) -> np.ndarray:
    """Return the coordinate array of a UnitVector or an array of points (last axis = n)."""
    if isinstance(x, UnitVector):
        return x.coords
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class SphereSample:
    """Immutable sample of points on S^{n-1}."""

    points: np.ndarray
    seed: int
    n: int
    stream: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"SphereSample needs a (count, n) array with count >= 1, got shape {pts.shape}")
        if pts.shape[1] != self.n or self.n < 2:
            raise ValueError(f"SphereSample dimension mismatch: n={self.n}, points have {pts.shape[1]} columns")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            pts = pts / norms[:, None]
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)
        object.__setattr__(self, 'stream', tuple(int(s) for s in self.stream))

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.count

    def to_csv(self, path: Path) -> None:
        """Write one point per row under the header x0..x{n-1}."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(self.points, columns=[f'x{i}' for i in range(self.n)])
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.debug(f"Wrote {self.count} sphere points to {path}")

    @classmethod
    def from_csv(cls, path: Path, seed: int = -1) -> 'SphereSample':
        """Read points written by to_csv (seed is unknown unless given)."""
        frame = pd.read_csv(path, float_precision='round_trip')
        columns = [c for c in frame.columns if c.startswith('x')]
        points = frame[columns].to_numpy(dtype=float)
        return cls(points=points, seed=seed, n=points.shape[1])


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Build the counter-based generator for one named random stream.

    Args:
        seed: Non-negative root seed
        stream: Integer keys selecting an independent stream under the seed

    Returns:
        numpy Generator backed by Philox

    Example:
        >>> heldout = make_rng(7, 1)   # same seed, independent of make_rng(7, 0)
    """
    if int(seed) < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(sequence))


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"Dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def geodesic_distance(u: VectorLike, v: VectorLike) -> Union[float, np.ndarray]:
    """
    Riemannian distance on S^{n-1}, in radians.

    Uses 2*atan2(|u - v|, |u + v|), accurate near 0 and near pi where the
    arccos of the dot product is not.

    Args:
        u: Point (or array of points, last axis n)
        v: Point (or array of points, broadcast against u)

    Returns:
        Distance in [0, pi] (array if inputs are arrays)

    Example:
        >>> geodesic_distance(UnitVector([1, 0]), UnitVector([0, 1]))
        1.5707963267948966
    """
    a, b = as_coords(u), as_coords(v)
    _check_same_dim(a, b)
    diff = np.linalg.norm(a - b, axis=-1)
    summ = np.linalg.norm(a + b, axis=-1)
    result = 2.0 * np.arctan2(diff, summ)
    return float(result) if np.ndim(result) == 0 else result


def chordal_distance(u: VectorLike, v: VectorLike) -> Union[float, np.ndarray]:
    """
    Euclidean (chord) distance |u - v| between points of S^{n-1}.

    Equals 2*sin(geodesic_distance(u, v) / 2).
    """
    a, b = as_coords(u), as_coords(v)
    _check_same_dim(a, b)
    result = np.linalg.norm(a - b, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def pairwise_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix of inner products x_i . y_j clipped to [-1, 1]."""
    _check_same_dim(x, y)
    return np.clip(x @ y.T, -1.0, 1.0)


def chordal_from_dot(dot: np.ndarray) -> np.ndarray:
    """Chord length for unit vectors with the given inner products."""
    return np.sqrt(np.maximum(2.0 - 2.0 * dot, 0.0))


def geodesic_from_dot(dot: np.ndarray) -> np.ndarray:
    """Geodesic distance for unit vectors with the given inner products."""
    return 2.0 * np.arctan2(chordal_from_dot(dot), np.sqrt(np.maximum(2.0 + 2.0 * dot, 0.0)))


def sample_uniform(n: int, count: int, seed: int, stream: Sequence[int] = ()) -> SphereSample:
    """
    Draw i.i.d. points from the normalized surface measure on S^{n-1}.

    Points are normalized standard Gaussian vectors, so the law is invariant
    under orthogonal maps in every dimension.

    Args:
        n: Ambient dimension (>= 2)
        count: Number of points (>= 1)
        seed: Root seed
        stream: Stream keys under the seed (see make_rng)

    Returns:
        SphereSample of shape (count, n)

    Example:
        >>> quad = sample_uniform(3, 10_000, seed=7)
        >>> quad.points.shape
        (10000, 3)
    """
    if n < 2:
        raise ValueError(f"Sphere sampling needs n >= 2, got {n}")
    if count < 1:
        raise ValueError(f"Sample count must be >= 1, got {count}")
    rng = make_rng(seed, *stream)
    gauss = rng.standard_normal((count, n))
    norms = np.linalg.norm(gauss, axis=1)
    # A zero Gaussian vector has probability zero; redraw it to stay total
    while np.any(norms == 0.0):
        bad = norms == 0.0
        gauss[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(gauss, axis=1)
    return SphereSample(points=gauss / norms[:, None], seed=seed, n=n, stream=tuple(stream))


def sphere_area(m: int) -> float:
    """
    Hausdorff measure of the unit sphere S^m.

    Args:
        m: Sphere dimension (>= 0); S^0 is two points

    Returns:
        2*pi^((m+1)/2) / Gamma((m+1)/2)

    Example:
        >>> sphere_area(2)   # 4*pi
        12.566370614359172
    """
    if m < 0:
        raise ValueError(f"Sphere dimension must be >= 0, got {m}")
    half = (m + 1) / 2.0
    return float(2.0 * np.pi ** half / special.gamma(half))


def _check_radius(r: float) -> None:
    if not (0.0 <= r <= np.pi):
        raise ValueError(f"Cap radius must lie in [0, pi], got {r}")


def cap_measure(n: int, r: float) -> float:
    """
    Probability (under the normalized measure) of a geodesic ball of radius r.

    (|S^{n-2}| / |S^{n-1}|) * int_0^r sin^{n-2}(t) dt, by adaptive quadrature.

    Args:
        n: Ambient dimension (>= 2)
        r: Geodesic radius in [0, pi]

    Returns:
        Cap probability in [0, 1]; exactly 0 at r = 0 and 1 at r = pi

    Example:
        >>> cap_measure(3, np.pi / 2)
        0.5
    """
    if n < 2:
        raise ValueError(f"Cap measure needs n >= 2, got {n}")
    _check_radius(r)
    if r == 0.0:
        return 0.0
    if r == np.pi:
        return 1.0
    if n == 2:
        return float(r / np.pi)
    integral, _ = integrate.quad(
        lambda t: np.sin(t) ** (n - 2), 0.0, r,
        epsabs=0.0, epsrel=CAP_QUAD_RTOL, limit=200,
    )
    value = sphere_area(n - 2) * integral / sphere_area(n - 1)
    return float(min(max(value, 0.0), 1.0))


def cap_measure_closed_form(n: int, r: float) -> float:
    """
    Cap probability through the regularized incomplete beta function.

    sigma(B_r) = I_{sin^2 r}((n-1)/2, 1/2) / 2 for r <= pi/2, reflected above.
    Independent of the quadrature path in cap_measure.
    """
    if n < 2:
        raise ValueError(f"Cap measure needs n >= 2, got {n}")
    _check_radius(r)
    if r <= np.pi / 2:
        return float(0.5 * special.betainc((n - 1) / 2.0, 0.5, np.sin(r) ** 2))
    return float(1.0 - 0.5 * special.betainc((n - 1) / 2.0, 0.5, np.sin(np.pi - r) ** 2))


def cap_lower_bound(n: int, a: float, r: float) -> float:
    """
    Concavity lower bound on the cap probability for r in [0, a*pi].

    Uses sin(t) >= (sin(a pi) / (a pi)) * t on [0, a pi]:
    |S^{n-2}|/(n-1) * (sin(a pi)/(a pi))^{n-2} * r^{n-1}, divided by |S^{n-1}|.

    Args:
        n: Ambient dimension (>= 2)
        a: Scale in (0, 1/4]
        r: Radius in [0, a*pi]

    Returns:
        Lower bound on cap_measure(n, r)
    """
    if n < 2:
        raise ValueError(f"Cap bound needs n >= 2, got {n}")
    if not (0.0 < a <= 0.25):
        raise ValueError(f"Scale a must lie in (0, 1/4], got {a}")
    if r < 0.0 or r > a * np.pi * (1.0 + _DOMAIN_SLACK):
        raise ValueError(f"Radius must lie in [0, a*pi] = [0, {a * np.pi}], got {r}")
    ratio = np.sin(a * np.pi) / (a * np.pi)
    value = sphere_area(n - 2) / (n - 1) * ratio ** (n - 2) * r ** (n - 1)
    return float(value / sphere_area(n - 1))


def icosahedron_directions() -> np.ndarray:
    """The 12 vertices of a regular icosahedron on S^2, shape (12, 3)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = []
    for s1 in (-1.0, 1.0):
        for s2 in (-phi, phi):
            vertices.append((0.0, s1, s2))
            vertices.append((s1, s2, 0.0))
            vertices.append((s2, 0.0, s1))
    arr = np.array(vertices, dtype=float)
    return arr / np.linalg.norm(arr, axis=1)[:, None]
