import numpy as np
import ot
import pytest

from spherepart.geometry import UnitVector, sample_uniform
from spherepart.mk1d import (
    EmpiricalMeasure,
    Projected1D,
    moment,
    project,
    project_many,
    w_p_1d,
    w_p_1d_batch,
)


def random_line_measure(rng, size=None):
    size = size or int(rng.integers(1, 8))
    masses = rng.random(size) + 0.1
    return Projected1D(rng.normal(size=size), masses / masses.sum())


def test_empirical_measure_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 2)), np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.array([[np.inf, 0.0]]), np.array([1.0]))
    mu = EmpiricalMeasure.dirac([1.0, 2.0])
    assert mu.m == 1 and mu.n == 2


def test_project_onto_axis():
    mu = EmpiricalMeasure.uniform(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.allclose(project(mu, UnitVector([0.0, 1.0])).values, [2.0, 4.0])
    diagonal = project(mu, np.array([1.0, 1.0]))
    assert np.allclose(diagonal.values, [3.0 / np.sqrt(2), 7.0 / np.sqrt(2)])
    with pytest.raises(ValueError):
        project(mu, UnitVector([1.0, 0.0, 0.0]))


def test_project_many_matches_project():
    mu = EmpiricalMeasure.uniform(np.random.default_rng(0).normal(size=(20, 3)))
    dirs = sample_uniform(3, 5, seed=2).points
    rows = project_many(mu, dirs)
    for row, direction in zip(rows, dirs):
        assert np.allclose(row, project(mu, direction).values)


def test_w_p_shift_between_diracs():
    a = Projected1D([0.0], [1.0])
    b = Projected1D([2.5], [1.0])
    for p in (1.0, 2.0, 3.5):
        assert np.isclose(w_p_1d(a, b, p), 2.5)


def test_w_p_two_point_examples():
    a = Projected1D([0.0, 2.0], [0.5, 0.5])
    b = Projected1D([1.0, 3.0], [0.5, 0.5])
    assert w_p_1d(a, b, 1.0) == 1.0
    # uniform on {0, 1} against a point mass at 0.5
    c = Projected1D([0.0, 1.0], [0.5, 0.5])
    d = Projected1D([0.5], [1.0])
    assert np.isclose(w_p_1d(c, d, 2.0), 0.5)


def test_w_p_unequal_masses():
    a = Projected1D([0.0, 1.0], [0.25, 0.75])
    b = Projected1D([0.0], [1.0])
    assert np.isclose(w_p_1d(a, b, 1.0), 0.75)
    assert np.isclose(w_p_1d(a, b, 2.0), np.sqrt(0.75))


def test_w_p_rejects_bad_exponent():
    a = Projected1D([0.0], [1.0])
    with pytest.raises(ValueError):
        w_p_1d(a, a, 0.5)
    with pytest.raises(ValueError):
        w_p_1d(a, a, np.inf)


def test_w_p_is_symmetric_and_zero_on_equal_measures(rng):
    for _ in range(50):
        a, b = random_line_measure(rng), random_line_measure(rng)
        assert np.isclose(w_p_1d(a, b, 2.0), w_p_1d(b, a, 2.0), rtol=1e-12, atol=1e-15)
        assert w_p_1d(a, a, 2.0) == 0.0


def test_w_p_triangle_inequality(rng):
    for _ in range(1000):
        a, b, c = (random_line_measure(rng) for _ in range(3))
        p = float(rng.choice([1.0, 1.5, 2.0, 4.0]))
        assert w_p_1d(a, c, p) <= w_p_1d(a, b, p) + w_p_1d(b, c, p) + 1e-12


def test_w_p_translation(rng):
    a, b = random_line_measure(rng, 5), random_line_measure(rng, 5)
    shifted_a = Projected1D(a.values + 3.0, a.masses)
    shifted_b = Projected1D(b.values + 3.0, b.masses)
    assert np.isclose(w_p_1d(a, b, 2.0), w_p_1d(shifted_a, shifted_b, 2.0))
    # translating one measure only: W_1 of a against itself moved by t is |t|
    assert np.isclose(w_p_1d(a, shifted_a, 1.0), 3.0)


@pytest.mark.parametrize('p', [1.0, 2.0, 3.0])
def test_w_p_matches_lp_oracle(p, rng, lp_oracle):
    for _ in range(10):
        a, b = random_line_measure(rng, 6), random_line_measure(rng, 4)
        cost = np.abs(a.values[:, None] - b.values[None, :]) ** p
        exact = lp_oracle(cost, a.masses, b.masses) ** (1.0 / p)
        assert np.isclose(w_p_1d(a, b, p), exact, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize('p', [1.0, 1.5, 2.0, 3.0])
def test_w_p_matches_pot_on_small_supports(p, rng):
    for _ in range(20):
        a, b = random_line_measure(rng, 6), random_line_measure(rng, 5)
        exact = ot.wasserstein_1d(a.values, b.values, a.masses, b.masses, p=p) ** (1.0 / p)
        assert np.isclose(w_p_1d(a, b, p), exact, rtol=1e-9, atol=1e-12)


def test_w_2_matches_pot_on_gaussian_samples(rng):
    x = rng.normal(size=1000)
    y = rng.normal(loc=0.5, scale=2.0, size=800)
    a = Projected1D(x, np.full(1000, 1 / 1000))
    b = Projected1D(y, np.full(800, 1 / 800))
    # emd2_1d defaults to the squared Euclidean ground cost
    assert np.isclose(w_p_1d(a, b, 2.0) ** 2, ot.lp.emd2_1d(x, y), rtol=1e-9)


def test_projection_contracts_the_distance(rng, lp_oracle):
    points_a = rng.normal(size=(6, 3))
    points_b = rng.normal(size=(5, 3)) + 0.5
    mu1, mu2 = EmpiricalMeasure.uniform(points_a), EmpiricalMeasure.uniform(points_b)
    cost = np.linalg.norm(points_a[:, None, :] - points_b[None, :, :], axis=2) ** 2
    full = lp_oracle(cost, mu1.masses, mu2.masses) ** 0.5
    for direction in sample_uniform(3, 25, seed=4).points:
        assert w_p_1d(project(mu1, direction), project(mu2, direction), 2.0) <= full + 1e-9


def test_batch_equals_single_direction(rng):
    mu1 = EmpiricalMeasure.uniform(rng.normal(size=(30, 3)))
    mu2 = EmpiricalMeasure(rng.normal(size=(12, 3)), np.full(12, 1 / 12))
    dirs = sample_uniform(3, 600, seed=9).points
    batch = w_p_1d_batch(project_many(mu1, dirs), mu1.masses, project_many(mu2, dirs), mu2.masses, 2.0, threads=3)
    single = [w_p_1d(project(mu1, d), project(mu2, d), 2.0) for d in dirs]
    assert batch.shape == (600,)
    assert np.allclose(batch, single, rtol=1e-14, atol=0.0)


def test_moment():
    mu = EmpiricalMeasure(np.array([[3.0, 4.0], [0.0, 1.0]]), np.array([0.5, 0.5]))
    assert np.isclose(moment(mu, 1.0), 3.0)
    assert np.isclose(moment(mu, 2.0), 13.0)
    sphere = EmpiricalMeasure.uniform(sample_uniform(4, 50, seed=1).points)
    assert np.isclose(moment(sphere, 3.0), 1.0)


def test_csv_with_mass_column(tmp_path):
    mu = EmpiricalMeasure(np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]), np.array([0.2, 0.3, 0.5]))
    mu.to_csv(tmp_path / 'mu.csv')
    loaded = EmpiricalMeasure.from_csv(tmp_path / 'mu.csv')
    assert np.array_equal(loaded.points, mu.points)
    assert np.allclose(loaded.masses, mu.masses, atol=1e-15)


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(12)
    mu = EmpiricalMeasure.uniform(rng.normal(size=(500, 3)))
    mu.to_csv(tmp_path / 'cloud.csv')
    loaded = EmpiricalMeasure.from_csv(tmp_path / 'cloud.csv')
    assert np.array_equal(loaded.points, mu.points)
    assert np.allclose(loaded.masses, mu.masses, rtol=1e-15)


def test_csv_without_mass_column_is_uniform(tmp_path):
    path = tmp_path / 'points.csv'
    path.write_text("a,b,c\n1,0,0\n0,1,0\n0,0,1\n0,0,-1\n")
    mu = EmpiricalMeasure.from_csv(path)
    assert mu.n == 3 and mu.m == 4
    assert np.allclose(mu.masses, 0.25)


def test_csv_renormalizes_rounded_masses(tmp_path):
    path = tmp_path / 'rounded.csv'
    path.write_text("x0,mass\n0.0,0.333333\n1.0,0.333333\n2.0,0.333334\n")
    mu = EmpiricalMeasure.from_csv(path)
    assert np.isclose(mu.masses.sum(), 1.0, atol=1e-12)
    bad = tmp_path / 'bad.csv'
    bad.write_text("x0,mass\n0.0,0.5\n1.0,0.6\n")
    with pytest.raises(ValueError):
        EmpiricalMeasure.from_csv(bad)
