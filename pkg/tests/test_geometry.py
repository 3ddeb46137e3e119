import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from latentspace.geometry import (
    ConvergenceError,
    GeometrySpec,
    frechet_mean,
    geodesic_distance,
    procrustes_align,
    project_to_sphere,
    random_orthogonal,
    sample_vmf,
    tangent_project,
    uniform_sphere,
)

seeds = st.integers(0, 2 ** 31)


def test_geometry_spec_parsing():
    assert GeometrySpec.parse("S2") == GeometrySpec("spherical", 3)
    assert GeometrySpec.parse("r1").name == "R1"
    assert GeometrySpec("euclidean", 3).degrees_of_freedom(15) == 46
    assert GeometrySpec("spherical", 3).degrees_of_freedom(15) == 32
    for bad in (("euclidean", 0), ("spherical", 1), ("hyperbolic", 2)):
        with pytest.raises(ValueError):
            GeometrySpec(*bad)


def test_project_to_sphere():
    assert np.allclose(project_to_sphere([3.0, 0.0]), [1.0, 0.0])
    assert np.allclose(project_to_sphere([1.0, 1.0]), [2 ** -0.5, 2 ** -0.5])
    with pytest.raises(ValueError):
        project_to_sphere([0.0, 0.0])


def test_tangent_project_cases(rng):
    assert np.allclose(tangent_project([1.0, 0.0], [2.0, 3.0]), [0.0, 3.0])
    assert np.allclose(tangent_project([0.0, 1.0], [0.0, -4.0]), 0.0)
    for _ in range(50):
        x = uniform_sphere(1, 4, rng)[0]
        p = rng.standard_normal(4)
        t = tangent_project(x, p)
        assert abs(x @ t) <= 1e-12
        assert np.allclose(tangent_project(x, t), t, atol=1e-14)
        assert np.allclose(t, (np.eye(4) - np.outer(x, x)) @ p)


def test_vmf_unit_norm_and_concentration(rng):
    mu = np.array([1.0, 0.0, 0.0])
    X = sample_vmf(mu, 50.0, rng, size=10000)
    assert np.max(np.abs(np.linalg.norm(X, axis=1) - 1.0)) < 1e-12
    m = X.mean(axis=0)
    assert np.degrees(np.arccos(m @ mu / np.linalg.norm(m))) < 2.0
    # analytic mean resultant length coth(k) - 1/k on S^2
    k = 50.0
    assert np.linalg.norm(m) == pytest.approx(1 / np.tanh(k) - 1 / k, rel=0.01)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_vmf_kappa_zero_is_uniform(d):
    rng = np.random.default_rng(d)
    mu = np.eye(d)[0]
    X = sample_vmf(mu, 0.0, rng, size=10000)
    # first coordinate of a uniform point on S^{d-1}: (w + 1) / 2 ~ Beta((d-1)/2, (d-1)/2)
    a = (d - 1) / 2.0
    p = stats.kstest((X[:, 0] + 1) / 2, stats.beta(a, a).cdf).pvalue
    assert p > 0.01
    assert np.linalg.norm(X.mean(axis=0)) < 0.05


def test_geodesic_distance_cases():
    u = np.array([1.0, 0.0, 0.0])
    assert geodesic_distance(u, u) == 0.0
    assert geodesic_distance(u, -u) == pytest.approx(np.pi)
    assert geodesic_distance(u, np.array([0.0, 1.0, 0.0])) == pytest.approx(np.pi / 2)
    # round-off past 1 is clamped
    assert geodesic_distance(u, u * (1 + 1e-15)) == 0.0


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 5))
def test_geodesic_distance_rotation_invariant(seed, d):
    r = np.random.default_rng(seed)
    U = uniform_sphere(2, d, r)
    Q = random_orthogonal(d, r)
    assert geodesic_distance(U[0], U[1]) == pytest.approx(geodesic_distance(Q @ U[0], Q @ U[1]), abs=1e-7)


def test_frechet_mean_fixed_point_and_midpoint():
    p = project_to_sphere(np.array([1.0, 2.0, 2.0]))
    assert np.allclose(frechet_mean(np.tile(p, (5, 1))), p)
    u, v = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    assert np.allclose(frechet_mean(np.stack([u, v])), project_to_sphere(u + v), atol=1e-9)
    assert np.allclose(frechet_mean(np.stack([u, v]), spherical=False), [0.5, 0.5, 0.0])


def test_frechet_mean_degenerate():
    u = np.array([1.0, 0.0])
    with pytest.raises(ConvergenceError):
        frechet_mean(np.stack([u, -u]))


def test_frechet_mean_grid_oracle():
    r = np.random.default_rng(7)
    c = project_to_sphere(np.array([0.3, -0.2, 1.0]))
    P = sample_vmf(c, 3.0, r, size=20)
    m = frechet_mean(P)
    th, ph = np.meshgrid(np.linspace(0, np.pi, 721), np.linspace(-np.pi, np.pi, 1441), indexing="ij")
    G = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    cost = (np.arccos(np.clip(G @ P.T, -1, 1)) ** 2).sum(axis=1)
    coarse = G[np.argmin(cost)]
    # refine the grid winner locally, then compare
    loc = project_to_sphere(coarse + 0.01 * np.stack(np.meshgrid(*[np.linspace(-1, 1, 41)] * 3), -1).reshape(-1, 3))
    best = loc[np.argmin((np.arccos(np.clip(loc @ P.T, -1, 1)) ** 2).sum(axis=1))]
    assert geodesic_distance(m, best) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_frechet_mean_equivariant(seed):
    r = np.random.default_rng(seed)
    P = sample_vmf(uniform_sphere(1, 3, r)[0], 5.0, r, size=15)
    Q = random_orthogonal(3, r)
    assert np.allclose(frechet_mean(P @ Q.T), Q @ frechet_mean(P), atol=1e-8)


def test_procrustes_identity_and_rotation(rng):
    ref = uniform_sphere(12, 3, rng)
    assert np.allclose(procrustes_align(ref, ref), ref)
    Q = random_orthogonal(3, rng)
    assert np.linalg.norm(procrustes_align(ref @ Q.T, ref) - ref) <= 1e-8


def test_procrustes_translation(rng):
    ref = rng.standard_normal((10, 2))
    shifted = ref + np.array([3.0, -1.0])
    assert np.allclose(procrustes_align(shifted, ref, "euclidean"), ref, atol=1e-12)
    assert np.linalg.norm(procrustes_align(shifted, ref, "orthogonal") - ref) > 0.1
    with pytest.raises(ValueError):
        procrustes_align(ref, ref[:5])


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["euclidean", "orthogonal"]))
def test_procrustes_idempotent_and_unit_rows(seed, mode):
    r = np.random.default_rng(seed)
    ref = uniform_sphere(8, 3, r)
    Z = uniform_sphere(8, 3, r)
    once = procrustes_align(Z, ref, mode)
    assert np.max(np.abs(procrustes_align(once, ref, mode) - once)) <= 1e-10
    if mode == "orthogonal":
        assert np.allclose(np.linalg.norm(once, axis=1), 1.0, atol=1e-12)


def test_procrustes_recovery_with_noise(rng):
    ref = rng.standard_normal((15, 2))
    R = random_orthogonal(2, rng)
    Z = (ref + 0.01 * rng.standard_normal(ref.shape)) @ R.T + 5.0
    out = procrustes_align(Z, ref, "euclidean")
    assert np.sqrt(np.mean((out - ref) ** 2)) < 0.02


def test_generalized_procrustes_recovers_common_shape(rng):
    from latentspace.geometry import generalized_procrustes, project_to_sphere
    base = project_to_sphere(rng.normal(size=(12, 3)))
    stack = [project_to_sphere((base + 0.01 * rng.normal(size=base.shape)) @ random_orthogonal(3, rng).T)
             for _ in range(40)]
    aligned, mean = generalized_procrustes(np.stack(stack))
    np.testing.assert_allclose(np.linalg.norm(mean, axis=1), 1.0, atol=1e-12)
    # the mean equals the base shape up to one global orthogonal map
    assert np.max(np.abs(procrustes_align(mean, base) - base)) < 0.02
    assert np.max(np.abs(aligned - mean).mean(axis=0)) < 0.02
