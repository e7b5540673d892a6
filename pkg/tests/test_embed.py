import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.distance import pdist, squareform
from scipy.spatial.transform import Rotation

from fuzzyspace.embed import (
    EmbeddingResult,
    correlation_coefficients,
    distance_histogram,
    expected_axes,
    fit_ellipsoid,
    freedman_diaconis_bins,
    plot_embedding,
    plot_histogram,
    sample_ellipsoid,
    smacof_embed,
    upper_triangle,
)
from fuzzyspace.errors import DegenerateInputError


def uniform_sphere(N, rng):
    X = rng.standard_normal((N, 3))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def on_ellipsoid(axes, N, rng):
    return uniform_sphere(N, rng) * np.asarray(axes)


# --- SMACOF -----------------------------------------------------------------

def test_two_points():
    res = smacof_embed(np.array([[0, 1.0], [1, 0]]), d=3)
    assert np.linalg.norm(res.coords[0] - res.coords[1]) == pytest.approx(1, abs=1e-9)
    assert res.stress < 1e-12


def test_equilateral_triangle():
    D = 1 - np.eye(3)
    res = smacof_embed(D, d=2)
    assert res.stress < 1e-10
    assert np.allclose(pdist(res.coords), 1, atol=1e-5)


def test_regular_simplex_not_planar():
    D = 1 - np.eye(4)
    res = smacof_embed(D, d=2, restarts=8)
    assert res.stress > 1e-3
    # the planar optimum is a square with diagonals stretched: many restarts agree
    other = smacof_embed(D, d=2, restarts=8, seed=5)
    assert other.stress == pytest.approx(res.stress, rel=1e-3)


def test_recovers_euclidean_configuration(rng):
    X = rng.standard_normal((15, 3))
    res = smacof_embed(squareform(pdist(X)), d=3, restarts=3)
    assert res.stress < 1e-10
    assert np.allclose(res.correlations, 1, atol=1e-12)
    assert np.allclose(squareform(pdist(res.coords)), squareform(pdist(X)), atol=1e-5)


@given(st.integers(0, 1000))
def test_stress_history_non_increasing(seed):
    rng = np.random.default_rng(seed)
    D = squareform(pdist(rng.standard_normal((10, 5))))
    res = smacof_embed(D, d=2, seed=seed, max_iter=300)
    h = np.array(res.stress_history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert np.all(np.abs(res.correlations) <= 1)


def test_weighted_stress_non_increasing(rng):
    D = squareform(pdist(rng.standard_normal((9, 4))))
    W = rng.uniform(0.2, 2, (9, 9))
    res = smacof_embed(D, d=2, weights=W)
    assert np.all(np.diff(res.stress_history) <= 1e-12 * res.stress_history[0])


def test_rotation_leaves_stress_and_correlations(rng):
    D = squareform(pdist(rng.standard_normal((12, 4))))
    res = smacof_embed(D, d=3)
    Q = Rotation.random(random_state=3).as_matrix()
    Y = res.coords @ Q.T
    E0, E1 = squareform(pdist(res.coords)), squareform(pdist(Y))
    s0 = np.sum(np.triu((E0 - D) ** 2, 1))
    s1 = np.sum(np.triu((E1 - D) ** 2, 1))
    assert s1 == pytest.approx(s0, abs=1e-10)
    assert np.allclose(correlation_coefficients(D, Y)[0], res.correlations, atol=1e-10)


def test_deterministic(rng):
    D = squareform(pdist(rng.standard_normal((10, 3))))
    a, b = smacof_embed(D, seed=4), smacof_embed(D, seed=4)
    assert np.array_equal(a.coords, b.coords)


def test_smacof_errors():
    with pytest.raises(DegenerateInputError):
        smacof_embed(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        smacof_embed(np.array([[0, 1], [2, 0.0]]))
    with pytest.raises(ValueError):
        smacof_embed(1 - np.eye(3), d=0)


def test_correlation_constant_row():
    D = 1 - np.eye(3)
    X = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]])
    corr, flags = correlation_coefficients(D, X)
    assert np.all(flags) and np.all(corr == 0)
    with pytest.raises(ValueError):
        correlation_coefficients(D, X[:2])


def test_embedding_csv(tmp_path, rng):
    D = squareform(pdist(rng.standard_normal((6, 3))))
    res = smacof_embed(D)
    res.write_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "index,x0,x1,x2,correlation"
    assert np.array_equal(EmbeddingResult.read_coords(tmp_path / "e.csv"), res.coords)


# --- expected axes ----------------------------------------------------------

def test_expected_axes_values():
    assert expected_axes(1, 1, 1) == (1, 1, 1)
    assert sorted(expected_axes(1, 1, 2)) == [0.5, 0.5, 1.0]
    assert np.allclose(sorted(expected_axes(1.1, 1.1, 1.5)), [0.61, 0.61, 0.83], atol=5e-3)
    with pytest.raises(ValueError):
        expected_axes(1, 0, 1)


@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.1, 5))
def test_expected_axes_scaling(a, b, c, beta):
    base = expected_axes(a, b, c)
    scaled = expected_axes(beta * a, beta * b, beta * c)
    assert np.allclose(scaled, np.array(base) / beta**2, rtol=1e-12)


# --- ellipsoid fit ----------------------------------------------------------

@pytest.mark.parametrize("axes", [(0.5, 0.5, 1.0), (0.3, 0.7, 1.2), (1, 1, 1)])
def test_fit_recovers_synthetic(axes, rng):
    # 100 antipodal pairs: 200 points on the surface whose centroid is the centre
    P = on_ellipsoid(axes, 100, rng)
    R = Rotation.random(random_state=7).as_matrix()
    shift = np.array([0.2, -0.1, 0.3])
    fit = fit_ellipsoid(np.vstack([P, -P]) @ R.T + shift)
    assert fit.ok
    assert np.allclose(fit.axes, sorted(axes), atol=1e-3)
    assert np.allclose(fit.center, shift, atol=1e-12)


def test_fit_exact_when_centroid_is_centre(rng):
    # symmetric sample: the centroid is exactly the centre
    P = on_ellipsoid((0.5, 0.5, 1.0), 100, rng)
    R = Rotation.random(random_state=11).as_matrix()
    X = np.vstack([P, -P]) @ R.T
    fit = fit_ellipsoid(X)
    assert np.allclose(fit.axes, (0.5, 0.5, 1.0), atol=1e-3)
    assert fit.residual_per_dof < 1e-12
    main = R @ np.array([0, 0, 1.0])
    got = np.array([math.sin(fit.angles[0]) * math.cos(fit.angles[1]),
                    math.sin(fit.angles[0]) * math.sin(fit.angles[1]), math.cos(fit.angles[0])])
    assert abs(abs(got @ main) - 1) < 1e-6


def test_fit_rotation_equivariant(rng):
    P = on_ellipsoid((0.6, 0.8, 1.1), 60, rng)
    X = np.vstack([P, -P]) + 0.01 * rng.standard_normal((120, 3))
    a = fit_ellipsoid(X).axes
    b = fit_ellipsoid(X @ Rotation.random(random_state=2).as_matrix().T).axes
    assert np.allclose(a, b, atol=1e-6)


def test_fit_errors():
    with pytest.raises(DegenerateInputError):
        fit_ellipsoid(np.random.default_rng(0).random((5, 3)))
    with pytest.raises(ValueError):
        fit_ellipsoid(np.zeros((10, 2)))


def test_fit_flags_collapse():
    rng = np.random.default_rng(0)
    flat = np.c_[rng.standard_normal((30, 2)), np.zeros(30)]
    fit = fit_ellipsoid(flat, min_axis=1e-6)
    assert fit.axes[0] >= 0 and fit.residual_per_dof >= 0


# --- ellipsoid samples ------------------------------------------------------

def test_sample_two_antipodal():
    X = sample_ellipsoid((1, 1, 1), 2, seed=3)
    assert np.allclose(X[0], -X[1], atol=1e-6)


def test_sample_octahedron():
    X = sample_ellipsoid((1, 1, 1), 6, seed=1)
    d = np.sort(pdist(X))
    assert np.allclose(d[:12], math.sqrt(2), atol=1e-3) and np.allclose(d[12:], 2, atol=1e-3)


def test_sample_on_surface_and_deterministic():
    axes = np.array([0.5, 0.5, 1.0])
    X = sample_ellipsoid(axes, 21, seed=4)
    assert np.allclose(np.sum((X / axes) ** 2, axis=1), 1, atol=1e-9)
    assert np.array_equal(X, sample_ellipsoid(axes, 21, seed=4))


def test_sample_errors():
    with pytest.raises(ValueError):
        sample_ellipsoid((1, 0, 1), 4)
    with pytest.raises(ValueError):
        sample_ellipsoid((1, 1, 1), 0)


# --- histograms -------------------------------------------------------------

def test_histogram_single_value():
    h = distance_histogram([0.7] * 10, bins=5)
    assert (h.counts > 0).sum() == 1 and h.counts.sum() == 10


def test_histogram_density_and_bins(rng, tmp_path):
    v = rng.uniform(0, 2, 500)
    h = distance_histogram(v)
    assert len(h.counts) == freedman_diaconis_bins(v)
    assert np.sum(h.density * np.diff(h.edges)) == pytest.approx(1)
    assert h.edges[0] == 0 and h.edges[-1] == pytest.approx(v.max())
    h.write_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().startswith("left,right,count,density")
    with pytest.raises(ValueError):
        distance_histogram([])


def test_monte_carlo_chord_and_arc_means():
    rng = np.random.default_rng(0)
    X = uniform_sphere(3000, rng)
    chord = pdist(X)
    arc = 2 * np.arcsin(np.clip(chord / 2, 0, 1))
    for vals, target in ((chord, 4 / 3), (arc, math.pi / 2)):
        h = distance_histogram(vals, bins=60)
        centres = 0.5 * (h.edges[1:] + h.edges[:-1])
        assert np.sum(centres * h.counts) / h.counts.sum() == pytest.approx(target, abs=0.01)
        assert vals.mean() == pytest.approx(target, abs=0.01)


def test_upper_triangle():
    D = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0.0]])
    assert upper_triangle(D).tolist() == [1, 2, 3]


def test_plots_are_deterministic(tmp_path, rng):
    X = rng.standard_normal((8, 3))
    for k in range(2):
        plot_embedding(X, np.linspace(0.5, 1, 8), tmp_path / f"e{k}.svg", "test")
        h = distance_histogram(pdist(X))
        plot_histogram(h, tmp_path / f"h{k}.svg", "test", {"chord": h})
    assert (tmp_path / "e0.svg").read_bytes() == (tmp_path / "e1.svg").read_bytes()
    assert (tmp_path / "h0.svg").read_bytes() == (tmp_path / "h1.svg").read_bytes()
