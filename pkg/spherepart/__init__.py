"""
spherepart - Equal-Area Sphere Partitions by Optimal Transport

This package contains the modules of the partition pipeline:
- logger: Logging configuration
- geometry: Points, distances, uniform sampling and cap measures on S^{n-1}
- constants: Diameter-bound constants for the intrinsic and extrinsic costs
- transport: Semi-discrete transport solver (Laguerre weights)
- partition: Equal-area partitions, sampled diameters, bound verification
- mk1d: Exact one-dimensional transport between projected measures
- sliced: Sliced transport estimators and their error certificate
- experiments: Max-diameter scaling experiment
- io: JSON/CSV artifacts and YAML config
- parallel: Ordered thread-pool map
"""

__version__ = "1.0.0"
__author__ = "spherepart Team"

from .constants import constants_for, extrinsic_constants, intrinsic_constants
from .geometry import SpherePartError, SphereSample, UnitVector, sample_uniform
from .logger import setup_logger
from .mk1d import EmpiricalMeasure, w_p_1d
from .partition import BoundReport, Partition, build_partition, cell_diameters, verify_bound
from .sliced import SlicedEstimate, error_certificate, sliced_mk_dense, sliced_mk_partition
from .transport import CostKind, DualWeights, SolveReport, mk_distance, solve_dual

__all__ = [
    "setup_logger",
    "SpherePartError",
    "UnitVector",
    "SphereSample",
    "sample_uniform",
    "intrinsic_constants",
    "extrinsic_constants",
    "constants_for",
    "CostKind",
    "DualWeights",
    "SolveReport",
    "solve_dual",
    "mk_distance",
    "Partition",
    "BoundReport",
    "build_partition",
    "cell_diameters",
    "verify_bound",
    "EmpiricalMeasure",
    "w_p_1d",
    "SlicedEstimate",
    "sliced_mk_partition",
    "sliced_mk_dense",
    "error_certificate",
]
