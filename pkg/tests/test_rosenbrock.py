import numpy as np
import pytest
from scipy import integrate, optimize

from latentspace.rosenbrock import (
    _hmc_step_2d,
    _target,
    angle_gap,
    angular_modes,
    circle_density,
    circle_reference,
    rosenbrock,
    rosenbrock_grad,
    run_rosenbrock,
)
from latentspace.samplers import ghmc_step, hmc_step


def test_rosenbrock_values_and_gradient():
    assert rosenbrock([1.0, 1.0]) == 0.0
    assert rosenbrock([0.0, 0.0]) == 1.0
    x = np.array([0.3, -0.7])
    fd = optimize.approx_fprime(x, rosenbrock, 1e-7)
    np.testing.assert_allclose(rosenbrock_grad(x), fd, rtol=1e-5)
    lp, g = _target(1.0, 5.0)(x)
    assert lp == pytest.approx(-rosenbrock(x))
    np.testing.assert_allclose(g, -rosenbrock_grad(x))


@pytest.mark.parametrize("sphere", [False, True])
def test_scalar_kernel_matches_generic_kernel(sphere):
    # same generator stream, same transitions, draw for draw
    f = _target(1.0, 5.0)
    step = ghmc_step if sphere else hmc_step
    x0 = np.array([1.0, 0.0]) if sphere else np.zeros(2)
    r1, r2 = np.random.default_rng(4), np.random.default_rng(4)
    xa, la, ga = x0, *f(x0)
    xb, lb, gb = x0, *f(x0)
    n_acc = 0
    for _ in range(300):
        xa, la, ga, acc_a, dha = _hmc_step_2d(xa, la, ga, 0.3, 10, r1, 1.0, 5.0, sphere)
        xb, lb, gb, acc_b, dhb = step(xb, lb, gb, f, 0.3, 10, r2)
        assert acc_a == acc_b
        n_acc += acc_a
        np.testing.assert_allclose(xa, xb, rtol=1e-11, atol=1e-12)
        assert dha == pytest.approx(dhb, rel=1e-8, abs=1e-10)
        # restart both routes from the same state so round-off cannot compound
        xb, lb, gb = xa, la, ga
    assert 0 < n_acc < 300


def test_pairings():
    with pytest.raises(ValueError):
        run_rosenbrock("plane", "GHMC", samples=10, burn_in=10, thin=1)
    with pytest.raises(ValueError):
        run_rosenbrock("circle", "HMC", samples=10, burn_in=10, thin=1)


def test_circle_reference_against_quad():
    Z, _ = integrate.quad(circle_density, -np.pi, np.pi, limit=200)
    num, _ = integrate.quad(lambda t: circle_density(t) * rosenbrock([np.cos(t), np.sin(t)]), -np.pi, np.pi,
                            limit=200)
    ref = circle_reference()
    assert ref["mean_R"] == pytest.approx(num / Z, rel=1e-8)
    # two dominant peaks, the higher near 38 degrees
    assert len(ref["modes_deg"]) >= 2
    assert angle_gap(ref["modes_deg"][0], 37.7) < 0.5 and angle_gap(ref["modes_deg"][1], 137.4) < 0.5


def test_angular_modes_on_known_mixture(rng):
    ang = np.concatenate([rng.normal(np.radians(40), 0.1, 4000), rng.normal(np.radians(-120), 0.1, 2000)])
    X = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    m = angular_modes(X)
    assert angle_gap(m[0], 40.0) < 2.0 and angle_gap(m[1], -120.0) < 2.0
    assert angle_gap(350.0, 10.0) == 20.0


@pytest.mark.parametrize("space,alg", [("plane", "MH"), ("plane", "HMC"), ("circle", "MH"), ("circle", "GHMC")])
def test_short_runs(space, alg):
    res = run_rosenbrock(space, alg, samples=300, burn_in=3000, thin=5, chains=2, seed=1)
    assert res.samples.shape == (2, 300, 2)
    assert all(0.05 < a < 0.95 for a in res.accept_rate)
    if space == "circle":
        np.testing.assert_allclose(np.linalg.norm(res.samples, axis=2), 1.0, atol=1e-9)
        assert res.max_norm_error < 1e-9
    s = res.summary()
    assert s["space"] == space and np.isfinite(s["mean_R"])


def test_short_run_is_reproducible():
    a = run_rosenbrock("plane", "HMC", samples=120, burn_in=500, thin=2, chains=1, seed=9)
    b = run_rosenbrock("plane", "HMC", samples=120, burn_in=500, thin=2, chains=1, seed=9)
    assert np.array_equal(a.samples, b.samples)
