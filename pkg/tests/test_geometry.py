import numpy as np
import pytest

from spherepart.geometry import (
    SphereSample,
    UnitVector,
    cap_lower_bound,
    cap_measure,
    cap_measure_closed_form,
    chordal_distance,
    geodesic_distance,
    icosahedron_directions,
    make_rng,
    sample_uniform,
    sphere_area,
)


def test_unit_vector_normalizes():
    u = UnitVector([3.0, 4.0])
    assert np.allclose(u.coords, [0.6, 0.8])
    assert u.n == 2


@pytest.mark.parametrize('coords', [[0.0, 0.0, 0.0], [1.0], [np.nan, 1.0]])
def test_unit_vector_rejects_bad_input(coords):
    with pytest.raises(ValueError):
        UnitVector(coords)


def test_geodesic_distance_basic_cases():
    e1, e2 = UnitVector([1, 0, 0]), UnitVector([0, 1, 0])
    assert np.isclose(geodesic_distance(e1, e2), np.pi / 2)
    assert geodesic_distance(e1, e1) == 0.0
    assert np.isclose(geodesic_distance(e1, -e1), np.pi)
    assert np.isclose(chordal_distance(e1, -e1), 2.0)


def test_geodesic_distance_accurate_near_antipodes():
    eps = 1e-9
    u = UnitVector([1.0, 0.0])
    v = UnitVector([-1.0, eps])
    assert np.isclose(geodesic_distance(u, v), np.pi - eps, rtol=0, atol=1e-14)


def test_chord_identity_on_random_pairs():
    a = sample_uniform(4, 500, seed=1).points
    b = sample_uniform(4, 500, seed=2).points
    geo = geodesic_distance(a, b)
    assert np.allclose(chordal_distance(a, b), 2.0 * np.sin(geo / 2.0), atol=1e-14)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        geodesic_distance(UnitVector([1, 0]), UnitVector([1, 0, 0]))


def test_sample_uniform_is_deterministic_and_on_sphere():
    s1 = sample_uniform(3, 1000, seed=5)
    s2 = sample_uniform(3, 1000, seed=5)
    assert np.array_equal(s1.points, s2.points)
    assert np.allclose(np.linalg.norm(s1.points, axis=1), 1.0)
    other = sample_uniform(3, 1000, seed=5, stream=(1,))
    assert not np.array_equal(s1.points, other.points)


def test_sample_uniform_rows_are_prefixes():
    short = sample_uniform(3, 10, seed=9).points
    long = sample_uniform(3, 1000, seed=9).points
    assert np.array_equal(short, long[:10])


def test_sample_uniform_mean_is_near_zero():
    points = sample_uniform(3, 100_000, seed=3).points
    # each coordinate has variance 1/3
    assert np.all(np.abs(points.mean(axis=0)) < 5 * np.sqrt(1 / 3 / 100_000))


def test_sample_uniform_half_circle_fraction():
    points = sample_uniform(2, 100_000, seed=1).points
    assert 0.49 <= np.mean(points[:, 0] > 0.0) <= 0.51


@pytest.mark.parametrize('n', [2, 3, 5])
def test_sample_uniform_matches_cap_measure(n):
    count = 50_000
    points = sample_uniform(n, count, seed=20 + n).points
    centres = sample_uniform(n, 12, seed=40 + n).points
    for centre, r in zip(centres, np.linspace(0.2, 3.0, 12)):
        frequency = np.mean(geodesic_distance(points, centre) <= r)
        assert abs(frequency - cap_measure(n, r)) <= 4 / np.sqrt(count)


def test_make_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        make_rng(-1)


def test_sphere_sample_is_read_only():
    sample = sample_uniform(3, 4, seed=0)
    with pytest.raises(ValueError):
        sample.points[0, 0] = 2.0


def test_sphere_sample_csv_round_trip(tmp_path):
    sample = sample_uniform(3, 1000, seed=4)
    sample.to_csv(tmp_path / 'points.csv')
    loaded = SphereSample.from_csv(tmp_path / 'points.csv', seed=4)
    assert np.array_equal(loaded.points, sample.points)


def test_sphere_area_values():
    assert np.isclose(sphere_area(0), 2.0)
    assert np.isclose(sphere_area(1), 2 * np.pi)
    assert np.isclose(sphere_area(2), 4 * np.pi)
    assert np.isclose(sphere_area(3), 2 * np.pi ** 2)


def test_cap_measure_known_values():
    assert cap_measure(3, 0.0) == 0.0
    assert cap_measure(3, np.pi) == 1.0
    assert np.isclose(cap_measure(3, np.pi / 2), 0.5)
    assert np.isclose(cap_measure(2, 1.0), 1.0 / np.pi)
    r = 0.8
    assert np.isclose(cap_measure(3, r), (1 - np.cos(r)) / 2, rtol=1e-10)


@pytest.mark.parametrize('n', [2, 3, 4, 7])
@pytest.mark.parametrize('r', [0.05, 0.7, 1.5, 2.4, 3.0])
def test_cap_measure_matches_incomplete_beta(n, r):
    assert np.isclose(cap_measure(n, r), cap_measure_closed_form(n, r), rtol=1e-9, atol=1e-14)


def test_cap_measure_is_monotone():
    radii = np.linspace(0.0, np.pi, 50)
    values = [cap_measure(4, r) for r in radii]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_cap_measure_rejects_bad_radius():
    with pytest.raises(ValueError):
        cap_measure(3, 4.0)


@pytest.mark.parametrize('n', [2, 3, 4, 8])
@pytest.mark.parametrize('a', np.linspace(0.01, 0.25, 9))
def test_cap_lower_bound_is_below_cap_measure(n, a):
    for r in np.linspace(0.0, a * np.pi, 25):
        assert cap_lower_bound(n, a, r) <= cap_measure(n, r) + 1e-15


def test_cap_lower_bound_domain():
    with pytest.raises(ValueError):
        cap_lower_bound(3, 1 / 16, 1.0)


def test_icosahedron_directions():
    dirs = icosahedron_directions()
    assert dirs.shape == (12, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    dots = dirs @ dirs.T
    np.fill_diagonal(dots, -2.0)
    # every vertex has 5 nearest neighbours at the same angle
    nearest = np.sort(dots, axis=1)[:, -5:]
    assert np.allclose(nearest, nearest[0, 0])
