"""
Explicit constants of the diameter bounds.

Intrinsic construction (geodesic cost): a_p, I_p and the prefactor alpha_{n,p}.
Extrinsic construction (chordal cost): J_p, b_p and its prefactor.
Plus the lower-bound functions H(t) used to turn a transport cost into a
radius bound, and the auxiliary Theta(theta, t) of the extrinsic argument.

Every prefactor comes in two conventions:
  - printed:    the formula with |S^{n-2}| exactly as displayed
  - normalized: the same formula with the cap measure taken as a probability,
                i.e. multiplied by |S^{n-1}|^{1/(n-1+p)}
"""

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Union

import numpy as np
from scipy import optimize

from .geometry import SpherePartError, cap_measure, sphere_area
from .logger import setup_logger

logger = setup_logger(__name__)

# Residual required from the b_p bisection
B_RESIDUAL_TOL = 1e-12
# Consecutive decreases of beta_p(1/j) that end the J_p scan
J_DECREASE_STEPS = 3
# Hard stop for the J_p scan; the maximizer runs off to infinity as p -> 1
J_SCAN_LIMIT = 2_000_000


class BracketError(SpherePartError):
    """b_p could not be bracketed in (0, 1/4): the J_p scan picked a bad index."""


@dataclass(frozen=True)
class IntrinsicConstants:
    """Constants of the geodesic-cost partition bound."""

    p: float
    n: int
    I_p: int
    a_p: float
    alpha_np: float
    alpha_np_normalized: float

    kind = 'intrinsic'

    def prefactor(self, normalized: bool = True) -> float:
        """Diameter prefactor (radius prefactor is half of it)."""
        return self.alpha_np_normalized if normalized else self.alpha_np


@dataclass(frozen=True)
class ExtrinsicConstants:
    """Constants of the chordal-cost partition bound."""

    p: float
    n: int
    J_p: int
    b_p: float
    prefactor_printed: float
    prefactor_normalized: float
    b_residual: float
    beta_max: float

    kind = 'extrinsic'

    def prefactor(self, normalized: bool = True) -> float:
        """Diameter prefactor (radius prefactor is half of it)."""
        return self.prefactor_normalized if normalized else self.prefactor_printed


PartitionConstants = Union[IntrinsicConstants, ExtrinsicConstants]


def _check_p(p: float) -> None:
    if not p > 1.0:
        raise ValueError(f"Exponent p must be > 1, got {p}")


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"Ambient dimension n must be >= 2, got {n}")


def rho_p(p: float, i: int) -> float:
    """
    rho_p(i) = i^{-1/p} - i^{-1}.

    Example:
        >>> rho_p(2, 4)
        0.25
    """
    _check_p(p)
    if i < 1:
        raise ValueError(f"Index i must be >= 1, got {i}")
    return float(i ** (-1.0 / p) - 1.0 / i)


def intrinsic_constants(n: int, p: float) -> IntrinsicConstants:
    """
    Constants of the geodesic-cost bound for (n, p).

    I_p + 1 maximizes rho_p over i = 1 .. ceil(p^{p/(p-1)}) + 2 (the
    continuous maximizer is p^{p/(p-1)}); a_p = rho_p(I_p + 1) / 4 and

        alpha = (2/a) * { |S^{n-2}|/(n-1) * (sin(a pi)/(a pi))^{n-2} }^{-1/(n-1+p)}

    Args:
        n: Ambient dimension (>= 2)
        p: Transport exponent (> 1)

    Returns:
        IntrinsicConstants (cached per (n, p))

    Example:
        >>> c = intrinsic_constants(3, 2.0)
        >>> c.a_p, c.I_p
        (0.0625, 3)
    """
    _check_n(n)
    _check_p(p)
    return _intrinsic_constants(int(n), float(p))


@lru_cache(maxsize=256)
def _intrinsic_constants(n: int, p: float) -> IntrinsicConstants:
    i_max = int(math.ceil(p ** (p / (p - 1.0)))) + 2
    values = [rho_p(p, i) for i in range(1, i_max + 1)]
    best_index = int(np.argmax(values)) + 1  # = I_p + 1
    a_p = values[best_index - 1] / 4.0

    exponent = 1.0 / (n - 1 + p)
    ratio = math.sin(a_p * math.pi) / (a_p * math.pi)
    inner = sphere_area(n - 2) / (n - 1) * ratio ** (n - 2)
    alpha = (2.0 / a_p) * inner ** (-exponent)
    alpha_normalized = alpha * sphere_area(n - 1) ** exponent

    logger.debug(f"Intrinsic constants n={n} p={p}: I_p={best_index - 1} a_p={a_p:.6g} "
                 f"alpha={alpha:.6g} alpha_normalized={alpha_normalized:.6g}")
    return IntrinsicConstants(
        p=p, n=n, I_p=best_index - 1, a_p=a_p,
        alpha_np=alpha, alpha_np_normalized=alpha_normalized,
    )


def beta_p(p: float, t: float) -> float:
    """
    beta_p(t) = t - sin^p(pi t / 2) for t in (0, 1/2].

    Example:
        >>> round(beta_p(2, 0.5), 15)
        0.0
    """
    _check_p(p)
    if not (0.0 < t <= 0.5):
        raise ValueError(f"beta_p needs t in (0, 1/2], got {t}")
    return float(t - math.sin(math.pi * t / 2.0) ** p)


def _scan_j(p: float) -> int:
    """Return J_p + 1: the maximizer of j -> beta_p(1/j) over j >= 2."""
    best_j, best_value = 2, beta_p(p, 0.5)
    previous = best_value
    decreases = 0
    j = 2
    while True:
        j += 1
        if j > J_SCAN_LIMIT:
            raise BracketError(f"No positive maximum of beta_p(1/j) found for p={p} up to j={J_SCAN_LIMIT}")
        value = beta_p(p, 1.0 / j)
        if value > best_value:
            best_j, best_value = j, value
        decreases = decreases + 1 if value < previous else 0
        previous = value
        if best_value > 0.0 and decreases >= J_DECREASE_STEPS and j - best_j >= J_DECREASE_STEPS:
            return best_j


def extrinsic_constants(n: int, p: float) -> ExtrinsicConstants:
    """
    Constants of the chordal-cost bound for (n, p).

    J_p + 1 maximizes beta_p(1/j); the scan stops once beta_p(1/j) has passed
    a positive maximum and decreased for 3 consecutive j. b_p solves

        1/(J_p+1) = (sin(pi/(2(J_p+1))) + 4 b_p)^p

    by bisection on [0, 1/4], and the prefactor is

        (2/b) * { |S^{n-2}|/(n-1) * (b sqrt(1-b^2) / arcsin b)^{n-2} }^{-1/(n-1+p)}

    Args:
        n: Ambient dimension (>= 2)
        p: Transport exponent (> 1)

    Returns:
        ExtrinsicConstants (cached per (n, p))

    Raises:
        BracketError: If b_p cannot be bracketed (a logic error in the scan)
    """
    _check_n(n)
    _check_p(p)
    return _extrinsic_constants(int(n), float(p))


@lru_cache(maxsize=256)
def _extrinsic_constants(n: int, p: float) -> ExtrinsicConstants:
    j_star = _scan_j(p)
    base = math.sin(math.pi / (2.0 * j_star))
    target = 1.0 / j_star

    def residual(b: float) -> float:
        return (base + 4.0 * b) ** p - target

    low, high = residual(0.0), residual(0.25)
    if not (low < 0.0 < high):
        raise BracketError(f"b_p not bracketed for p={p}, J_p+1={j_star}: f(0)={low}, f(1/4)={high}")
    b_p = optimize.bisect(residual, 0.0, 0.25, xtol=1e-17, rtol=4 * np.finfo(float).eps, maxiter=500)
    b_residual = abs(target - (base + 4.0 * b_p) ** p)
    if b_residual >= B_RESIDUAL_TOL:
        raise BracketError(f"b_p residual {b_residual:.3e} above {B_RESIDUAL_TOL} for p={p}")
    if not (0.0 < b_p < 0.25):
        raise BracketError(f"b_p={b_p} outside (0, 1/4) for p={p}")

    exponent = 1.0 / (n - 1 + p)
    ratio = b_p * math.sqrt(1.0 - b_p ** 2) / math.asin(b_p)
    inner = sphere_area(n - 2) / (n - 1) * ratio ** (n - 2)
    prefactor = (2.0 / b_p) * inner ** (-exponent)
    prefactor_normalized = prefactor * sphere_area(n - 1) ** exponent

    logger.debug(f"Extrinsic constants n={n} p={p}: J_p={j_star - 1} b_p={b_p:.10g} "
                 f"residual={b_residual:.2e} prefactor={prefactor:.6g}")
    return ExtrinsicConstants(
        p=p, n=n, J_p=j_star - 1, b_p=float(b_p),
        prefactor_printed=prefactor, prefactor_normalized=prefactor_normalized,
        b_residual=float(b_residual), beta_max=beta_p(p, 1.0 / j_star),
    )


def constants_for(kind: str, n: int, p: float) -> PartitionConstants:
    """Constants matching a cost kind ('intrinsic' or 'extrinsic')."""
    if kind == 'intrinsic':
        return intrinsic_constants(n, p)
    if kind == 'extrinsic':
        return extrinsic_constants(n, p)
    raise ValueError(f"Unknown cost kind: {kind}")


def h_lower_bound(n: int, p: float, a: float, t: float) -> float:
    """
    H(t) = sigma(B_{a t}) * (a t)^p with the normalized cap measure.

    H evaluated at the largest transport displacement is at most MK_p^p,
    which is how a transport cost becomes a radius bound.

    Args:
        n: Ambient dimension
        p: Transport exponent
        a: Scale in (0, 1/4)
        t: Displacement in [0, pi]
    """
    _check_p(p)
    if not (0.0 < a < 0.25):
        raise ValueError(f"Scale a must lie in (0, 1/4), got {a}")
    if not (0.0 <= t <= np.pi):
        raise ValueError(f"t must lie in [0, pi], got {t}")
    r = a * t
    return float(cap_measure(n, r) * r ** p)


def _invert_increasing(fn, value: float, upper: float) -> float:
    if value <= 0.0:
        return 0.0
    if value >= fn(upper):
        return float(upper)
    return float(optimize.brentq(lambda t: fn(t) - value, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def h_lower_bound_inverse(n: int, p: float, a: float, value: float) -> float:
    """
    Smallest t in [0, pi] with H(t) = value; pi when value >= H(pi).

    Example:
        >>> t = 1.2
        >>> abs(h_lower_bound_inverse(3, 2, 1/16, h_lower_bound(3, 2, 1/16, t)) - t) < 1e-9
        True
    """
    return _invert_increasing(lambda t: h_lower_bound(n, p, a, t), value, np.pi)


def extrinsic_h(n: int, p: float, b: float, t: float) -> float:
    """
    Extrinsic lower-bound function sigma(B_{2 arcsin(b t / 2)}) * (b t)^p, t in [0, 2].
    """
    _check_p(p)
    if not (0.0 < b < 0.25):
        raise ValueError(f"Scale b must lie in (0, 1/4), got {b}")
    if not (0.0 <= t <= 2.0):
        raise ValueError(f"t must lie in [0, 2], got {t}")
    radius = 2.0 * math.asin(b * t / 2.0)
    return float(cap_measure(n, radius) * (b * t) ** p)


def extrinsic_h_inverse(n: int, p: float, b: float, value: float) -> float:
    """Smallest t in [0, 2] with extrinsic_h(t) = value; 2 when value >= extrinsic_h(2)."""
    return _invert_increasing(lambda t: extrinsic_h(n, p, b, t), value, 2.0)


def extrinsic_cap_lower_bound(n: int, b: float, r: float) -> float:
    """
    Lower bound on the cap probability for r in [0, 2 arcsin b].

    |S^{n-2}|/(n-1) * (b sqrt(1-b^2) / arcsin b)^{n-2} * r^{n-1}, divided by |S^{n-1}|.
    """
    _check_n(n)
    if not (0.0 < b < 0.25):
        raise ValueError(f"Scale b must lie in (0, 1/4), got {b}")
    limit = 2.0 * math.asin(b)
    if r < 0.0 or r > limit * (1.0 + 1e-12):
        raise ValueError(f"Radius must lie in [0, 2 arcsin b] = [0, {limit}], got {r}")
    ratio = b * math.sqrt(1.0 - b ** 2) / math.asin(b)
    value = sphere_area(n - 2) / (n - 1) * ratio ** (n - 2) * r ** (n - 1)
    return float(value / sphere_area(n - 1))


def theta(theta_val: float, t: float) -> float:
    """
    Theta(theta, t) = sin(theta t) / sin(theta).

    Bounded by sin(pi t / 2) on theta in (0, pi/2], t in (0, 1/2].

    Example:
        >>> round(theta(np.pi / 4, 0.5), 5)
        0.5412
    """
    if not (0.0 < theta_val <= np.pi / 2):
        raise ValueError(f"theta must lie in (0, pi/2], got {theta_val}")
    if not (0.0 < t <= 0.5):
        raise ValueError(f"t must lie in (0, 1/2], got {t}")
    return float(math.sin(theta_val * t) / math.sin(theta_val))


def constants_report(n: int, p: float) -> Dict[str, Dict[str, float]]:
    """
    Every field of both constant types plus defining residuals.

    Returns:
        {'n', 'p', 'intrinsic': {...}, 'extrinsic': {...}}
    """
    intrinsic = intrinsic_constants(n, p)
    extrinsic = extrinsic_constants(n, p)
    intrinsic_fields = asdict(intrinsic)
    intrinsic_fields['rho_max'] = rho_p(p, intrinsic.I_p + 1)
    intrinsic_fields['a_p_residual'] = abs(intrinsic.a_p - rho_p(p, intrinsic.I_p + 1) / 4.0)
    intrinsic_fields['normalization_factor'] = intrinsic.alpha_np_normalized / intrinsic.alpha_np
    extrinsic_fields = asdict(extrinsic)
    extrinsic_fields['normalization_factor'] = extrinsic.prefactor_normalized / extrinsic.prefactor_printed
    return {
        'n': int(n),
        'p': float(p),
        'intrinsic': intrinsic_fields,
        'extrinsic': extrinsic_fields,
    }
