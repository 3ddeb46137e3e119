"""Maximum likelihood by gradient ascent with Armijo backtracking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometrySpec, project_to_sphere, tangent_project, uniform_sphere
from .model import HyperParameters, LatentSpaceModel, ParameterState
from .network import Network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float = 1.0
    rho: float = 0.5
    c: float = 1e-4
    max_iters: int = 5000
    grad_tolerance: float = 1e-6
    restarts: int = 20
    seed: int = 0
    min_step: float = 1e-14

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be positive")


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    trace: list = field(default_factory=list)  # (iteration, step size, objective)
    converged: bool = False
    stalled: bool = False
    iterations: int = 0


def armijo_ascent(f, grad, x0, cfg: OptimizerConfig, retract=None, tangent=None) -> AscentResult:
    """Maximise ``f`` along its gradient with backtracking line search.

    Each iteration starts from step ``cfg.eta`` and shrinks it by ``cfg.rho``
    until f(x + r D) >= f(x) + c r ||D||^2. ``tangent`` maps the raw gradient
    to the search direction and ``retract`` maps a trial point back onto the
    constraint set; both default to the identity.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    res = AscentResult(x, fx, [(0, 0.0, fx)])
    for it in range(1, cfg.max_iters + 1):
        D = grad(x)
        if tangent is not None:
            D = tangent(x, D)
        if np.max(np.abs(D)) <= cfg.grad_tolerance:
            res.converged = True
            break
        slope = float(D @ D)
        r = cfg.eta
        while True:
            trial = x + r * D
            if retract is not None:
                trial = retract(trial)
            ft = f(trial)
            if np.isfinite(ft) and ft >= fx + cfg.c * r * slope:
                break
            r *= cfg.rho
            if r < cfg.min_step:
                res.stalled = True
                break
        if res.stalled:
            break
        x, fx = trial, ft
        res.trace.append((it, r, fx))
    res.x, res.value, res.iterations = x, fx, len(res.trace) - 1
    return res


@dataclass
class MLFit:
    state: ParameterState
    loglik: float
    trace: list
    converged: bool
    stalled: bool
    restart_logliks: list


def _pack(state: ParameterState) -> np.ndarray:
    return np.concatenate([state.theta(), state.Z.ravel()])


def _unpack(x, geometry: GeometrySpec, n: int, check: bool = True) -> ParameterState:
    k = 2 if geometry.spherical else 1
    Z = x[k:].reshape(n, geometry.dim).copy()
    if geometry.spherical and check:
        Z = project_to_sphere(Z)
    return ParameterState(geometry, x[0], Z, x[1] if geometry.spherical else None)


def random_start(model: LatentSpaceModel, rng) -> ParameterState:
    g = model.geometry
    alpha = rng.normal()
    if g.spherical:
        return ParameterState(g, alpha, uniform_sphere(model.n, g.dim, rng), model.hp.mu_beta)
    return ParameterState(g, alpha, rng.standard_normal((model.n, g.dim)))


def maximize(model: LatentSpaceModel, start: ParameterState, cfg: OptimizerConfig,
             posterior: bool = False) -> AscentResult:
    """Ascend the log-likelihood (or the log posterior) from ``start``."""
    g, n = model.geometry, model.n
    k = 2 if g.spherical else 1

    def f(x):
        Z = x[k:].reshape(n, g.dim)
        beta = x[1] if g.spherical else None
        val = model.theta_loglik(x[0], beta, model.similarity(Z))
        if posterior:
            val += model.log_prior_theta(x[0], beta) + model.log_prior_z(Z)
        return val

    def grad(x):
        st = _unpack(x, g, n, check=False)
        gr = model.grad_log_posterior(st) if posterior else model.grad_log_likelihood(st)
        return gr.flat()

    retract = tangent = None
    if g.spherical:
        def retract(x):
            y = x.copy()
            y[k:] = project_to_sphere(x[k:].reshape(n, g.dim)).ravel()
            return y

        def tangent(x, D):
            D = D.copy()
            D[k:] = tangent_project(x[k:].reshape(n, g.dim), D[k:].reshape(n, g.dim)).ravel()
            return D

    return armijo_ascent(f, grad, _pack(start), cfg, retract=retract, tangent=tangent)


def fit_ml(net: Network, geometry: GeometrySpec, cfg: OptimizerConfig | None = None, mask=None,
           hp: HyperParameters | None = None) -> MLFit:
    """Best of ``cfg.restarts`` random-start ascents; restart ``k`` uses seed ``cfg.seed + k``."""
    cfg = cfg or OptimizerConfig()
    model = LatentSpaceModel(net, geometry, hp, mask)
    best = None
    values = []
    for k in range(cfg.restarts):
        rng = np.random.default_rng(cfg.seed + k)
        res = maximize(model, random_start(model, rng), cfg)
        values.append(res.value)
        log.debug("restart %d: loglik %.4f after %d iterations", k, res.value, res.iterations)
        if best is None or res.value > best.value:
            best = res
    state = _unpack(best.x, geometry, net.n)
    return MLFit(state, best.value, best.trace, best.converged, best.stalled, values)


def maximize_posterior(model: LatentSpaceModel, start: ParameterState, cfg: OptimizerConfig) -> ParameterState:
    """Local posterior mode reached from ``start`` (used to start chains)."""
    res = maximize(model, start, cfg, posterior=True)
    return _unpack(res.x, model.geometry, model.n)
