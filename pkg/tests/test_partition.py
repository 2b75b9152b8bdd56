import numpy as np
import pandas as pd
import pytest

from spherepart.constants import constants_for, extrinsic_constants, intrinsic_constants
from spherepart.geometry import icosahedron_directions, sample_uniform
from spherepart.partition import (
    CostKindMismatch,
    Partition,
    build_partition,
    cell_diameters,
    cell_radii,
    partition_from_weights,
    verify_bound,
)
from spherepart.transport import CostKind, DualWeights, SolveReport, mk_distance, required_quadrature


@pytest.fixture(scope='module')
def icosahedral_partition():
    quad = sample_uniform(3, 30_000, seed=17)
    return build_partition(icosahedron_directions(), CostKind.intrinsic(2.0), quad, tol=1e-2)


def test_single_cell_covers_the_sphere():
    part = build_partition(np.array([[0.0, 0.0, 1.0]]), CostKind.intrinsic(2.0), 5_000, tol=1e-2, seed=3)
    assert part.L == 1
    assert part.is_equal_area
    assert np.array_equal(part.cell_count, [5_000])
    geodesic, euclidean = cell_diameters(part)
    assert geodesic[0] > np.pi - 0.1
    assert np.isclose(euclidean[0], 2.0 * np.sin(geodesic[0] / 2.0))


def test_hemispheres_have_diameter_pi():
    dirs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    part = build_partition(dirs, CostKind.extrinsic(2.0), 50_000, tol=1e-2, seed=5)
    assert np.all(np.abs(part.cell_mass - 0.5) <= 1e-2)
    geodesic, _ = cell_diameters(part)
    assert np.all(geodesic > np.pi - 0.1)
    assert np.all(geodesic <= np.pi)


def test_icosahedral_cells_are_equal_area(icosahedral_partition):
    part = icosahedral_partition
    assert part.L == 12
    assert part.is_equal_area
    assert part.empty_cells == []
    assert np.all(np.abs(part.cell_mass - 1 / 12) <= 2e-2)
    assert part.cell_count.sum() == part.quad.count


def test_diameters_use_one_pair_for_both_metrics(icosahedral_partition):
    geodesic, euclidean = cell_diameters(icosahedral_partition)
    assert np.allclose(euclidean, 2.0 * np.sin(geodesic / 2.0), atol=1e-12)
    # an icosahedral cell is much smaller than a hemisphere
    assert np.all(geodesic < np.pi / 2)


def test_diameters_are_deterministic_across_threads(icosahedral_partition):
    first = cell_diameters(icosahedral_partition, threads=1)
    second = cell_diameters(icosahedral_partition, threads=4)
    assert np.array_equal(first[0], second[0])


def test_cell_radii_bound_half_diameter(icosahedral_partition):
    radii = cell_radii(icosahedral_partition)
    geodesic, _ = cell_diameters(icosahedral_partition)
    assert radii.shape == (12,)
    assert np.all(radii > 0.0)
    assert np.all(geodesic <= 2.0 * radii + 1e-12)


def test_singleton_cell_has_zero_diameter():
    quad = sample_uniform(3, 1, seed=1)
    weights = DualWeights(np.zeros(1), quad.points, CostKind.extrinsic(2.0))
    report = SolveReport(0, 0.0, 0.0, 0.0, 1, tol=1e-2, converged=True)
    part = partition_from_weights(weights, report, quad)
    geodesic, euclidean = cell_diameters(part)
    assert geodesic[0] == 0.0 and euclidean[0] == 0.0
    assert np.array_equal(cell_radii(part), [0.0])


def test_verify_bound_passes_on_a_solved_partition(icosahedral_partition):
    part = icosahedral_partition
    mk = mk_distance(part.report, 2.0)
    report = verify_bound(part, intrinsic_constants(3, 2.0), mk)
    assert report.passed
    assert report.satisfied_printed
    assert report.radius_implies_diameter
    assert report.diameters_are_lower_bounds
    assert report.max_radius <= report.radius_bound_sharp <= np.pi
    assert np.isclose(report.bound_normalized / report.bound_printed, (4 * np.pi) ** 0.25)


def test_verify_bound_with_zero_mk_reports_violation(icosahedral_partition):
    report = verify_bound(icosahedral_partition, intrinsic_constants(3, 2.0), 0.0)
    assert report.bound_printed == 0.0
    assert not report.satisfied_normalized
    assert not report.passed
    assert np.isclose(report.radius_bound_sharp, 0.0, atol=1e-9)


def test_verify_bound_rejects_mismatched_constants(icosahedral_partition):
    with pytest.raises(CostKindMismatch):
        verify_bound(icosahedral_partition, extrinsic_constants(3, 2.0), 0.5)
    with pytest.raises(CostKindMismatch):
        verify_bound(icosahedral_partition, intrinsic_constants(3, 3.0), 0.5)
    with pytest.raises(CostKindMismatch):
        verify_bound(icosahedral_partition, intrinsic_constants(4, 2.0), 0.5)
    with pytest.raises(ValueError):
        verify_bound(icosahedral_partition, intrinsic_constants(3, 2.0), -1.0)


@pytest.mark.parametrize('kind', ['intrinsic', 'extrinsic'])
@pytest.mark.parametrize('seed', [0, 1, 2])
def test_randomized_partitions_satisfy_normalized_bound(kind, seed):
    dirs = sample_uniform(3, 8, seed=100 + seed).points
    part = build_partition(dirs, CostKind(kind, 2.0), 40_000, tol=1e-2, seed=seed)
    report = verify_bound(part, constants_for(kind, 3, 2.0), mk_distance(part.report, 2.0))
    assert report.satisfied_normalized
    assert report.radius_satisfied_normalized
    assert report.to_dict()['passed'] is True


def test_partition_dict_round_trip(icosahedral_partition):
    data = icosahedral_partition.to_dict()
    restored = Partition.from_dict(data)
    assert np.array_equal(restored.quad.points, icosahedral_partition.quad.points)
    assert np.array_equal(restored.quad_assignments, icosahedral_partition.quad_assignments)
    assert np.array_equal(restored.weights.lambdas, icosahedral_partition.weights.lambdas)
    assert restored.report == icosahedral_partition.report


def test_points_csv(tmp_path, icosahedral_partition):
    icosahedral_partition.to_points_csv(tmp_path / 'points.csv')
    frame = pd.read_csv(tmp_path / 'points.csv')
    assert list(frame.columns) == ['x0', 'x1', 'x2', 'cell']
    assert len(frame) == icosahedral_partition.quad.count
    assert np.array_equal(frame['cell'].to_numpy(), icosahedral_partition.quad_assignments)


def _check_bound_grid(n, p, kind, L, tol):
    dirs = sample_uniform(n, L, seed=10 * L + n).points
    # twice the points the tolerance needs, so the held-out check has slack
    quad_size = 2 * required_quadrature(L, tol)
    part = build_partition(dirs, CostKind(kind, p), quad_size, tol=tol, seed=L)
    consts = constants_for(kind, n, p)
    report = verify_bound(part, consts, mk_distance(part.report, p))
    assert part.report.converged
    assert report.satisfied_normalized, report.to_dict()
    assert report.radius_satisfied_normalized
    assert report.max_diam_geodesic <= np.pi


@pytest.mark.parametrize('kind', ['intrinsic', 'extrinsic'])
@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
@pytest.mark.parametrize('n', [2, 3, 4])
@pytest.mark.parametrize('L', [2, 8])
def test_bound_holds_across_dimensions_and_exponents(n, p, kind, L):
    _check_bound_grid(n, p, kind, L, 2e-2)


@pytest.mark.slow
@pytest.mark.parametrize('kind', ['intrinsic', 'extrinsic'])
@pytest.mark.parametrize('p', [1.5, 2.0, 3.0])
@pytest.mark.parametrize('n', [2, 3, 4])
@pytest.mark.parametrize('L', [32, 128])
def test_bound_holds_for_many_cells(n, p, kind, L):
    _check_bound_grid(n, p, kind, L, 5e-3)
