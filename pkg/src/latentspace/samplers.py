"""Metropolis-Hastings, Hamiltonian and geodesic (spherical) Hamiltonian Monte Carlo.

Two layers live here. The generic kernels (:func:`run_mh`, :func:`run_hmc`,
:func:`run_ghmc`) sample any log density given as a callable. The latent
space driver (:func:`sample_posterior`) sweeps node positions one at a time
and then the global parameters, using either random-walk Metropolis or
(geodesic) HMC for every block.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    GeometrySpec,
    procrustes_align,
    project_to_sphere,
    sample_vmf,
    tangent_project,
    uniform_sphere,
)
from .mle import MLFit, OptimizerConfig, fit_ml, maximize_posterior
from .model import HyperParameters, LatentSpaceModel, ParameterState
from .network import Network

log = logging.getLogger(__name__)

ALGORITHMS = ("MH", "HMC", "GHMC")
DEFAULT_TARGET = {"MH": 0.40, "HMC": 0.65, "GHMC": 0.65}


@dataclass(frozen=True)
class SamplerConfig:
    """Run settings shared by all samplers.

    ``iters`` counts every iteration including burn-in; draws are kept at
    iterations ``burn_in + thin, burn_in + 2 thin, ...``. ``tau_z`` is the
    random-walk standard deviation (Euclidean) or the vMF concentration
    (spherical) of latent proposals, ``tau_theta`` the random-walk standard
    deviation for global parameters. The HMC variants use ``epsilon`` and
    ``L`` with an identity mass matrix.
    """

    algorithm: str = "MH"
    iters: int = 20000
    burn_in: int = 5000
    thin: int = 10
    chains: int = 2
    seed: int = 0
    tau_z: float | None = None
    tau_theta: float = 0.1
    epsilon: float = 0.05
    L: int = 10
    target_accept: float | None = None
    adapt_every: int = 100
    init: str = "map"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.iters <= 0 or self.thin < 1 or self.chains < 1:
            raise ValueError("iters must be positive, thin >= 1 and chains >= 1")
        if not 0 <= self.burn_in < self.iters:
            raise ValueError("burn_in must lie in [0, iters)")
        if not self.epsilon > 0 or self.L < 0:
            raise ValueError("epsilon must be positive and L non-negative")
        if self.init not in ("map", "ml", "prior"):
            raise ValueError("init must be 'map', 'ml' or 'prior'")

    @property
    def target(self) -> float:
        return self.target_accept if self.target_accept is not None else DEFAULT_TARGET[self.algorithm]

    @property
    def n_retained(self) -> int:
        return (self.iters - self.burn_in) // self.thin

    def retained(self, b: int) -> bool:
        """Whether iteration ``b`` (1-based) is stored."""
        return b > self.burn_in and (b - self.burn_in) % self.thin == 0


class Adapter:
    """Robbins-Monro tuning of log step sizes from windowed acceptance rates.

    Every ``every`` iterations the log scale moves by ``gain * (rate - target)``
    with the gain shrinking as 1/sqrt(window index). ``sign=-1`` suits
    parameters where larger values mean smaller moves (vMF concentration).
    """

    def __init__(self, scales, target, every=100, sign=1.0, lo=1e-8, hi=1e8):
        self.log_scale = np.log(np.atleast_1d(np.asarray(scales, dtype=float))).copy()
        self.target = target
        self.every = every
        self.sign = sign
        self.lo, self.hi = math.log(lo), math.log(hi)
        self.acc = np.zeros_like(self.log_scale)
        self.tries = np.zeros_like(self.log_scale)
        self.windows = 0

    @property
    def scales(self):
        return np.exp(self.log_scale)

    def record(self, k, accepted):
        self.acc[k] += accepted
        self.tries[k] += 1

    def step(self, b):
        if b % self.every:
            return
        self.windows += 1
        gain = 1.0 / math.sqrt(self.windows)
        rate = np.divide(self.acc, self.tries, out=np.full_like(self.acc, self.target), where=self.tries > 0)
        self.log_scale = np.clip(self.log_scale + self.sign * 2.0 * gain * (rate - self.target), self.lo, self.hi)
        self.acc[:] = 0
        self.tries[:] = 0


# ---------------------------------------------------------------------------
# single transitions


def _evaluate(logp_fn, x):
    """``logp_fn(x)``, or ``(None, None)`` if it overflows or is not finite."""
    try:
        with np.errstate(over="raise", invalid="raise"):
            lp, g = logp_fn(x)
    except (OverflowError, FloatingPointError):
        return None, None
    if not (np.isfinite(lp) and np.all(np.isfinite(g))):
        return None, None
    return lp, g


def hmc_step(x, logp, grad_x, logp_fn, eps, L, rng):
    """One HMC transition with identity mass.

    ``logp_fn(x)`` returns ``(log f, grad log f)``; ``logp``/``grad_x`` are the
    cached values at ``x``. Returns ``(x, logp, grad, accepted, dH)``.
    """
    p0 = rng.standard_normal(x.shape)
    xs, p, g = x.copy(), p0.copy(), grad_x
    lp = logp
    for _ in range(L):
        p = p + 0.5 * eps * g
        xs = xs + eps * p
        lp, g = _evaluate(logp_fn, xs)
        if lp is None:
            return x, logp, grad_x, False, np.inf
        p = p + 0.5 * eps * g
    h_cur = -logp + 0.5 * float(p0 @ p0)
    with np.errstate(over="ignore"):
        h_new = -lp + 0.5 * float(p @ p)
    dH = h_new - h_cur
    if math.log(rng.random()) < -dH:
        return xs, lp, g, True, dH
    return x, logp, grad_x, False, dH


def geodesic_flow(x, p, t):
    """Exact great-circle flow for time ``t`` from ``x`` with tangent velocity ``p``."""
    nu = math.sqrt(float(p @ p))
    if nu == 0.0:
        return x, p
    c, s = math.cos(nu * t), math.sin(nu * t)
    x_new = x * c + p * (s / nu)
    p_new = p * c - x * (nu * s)
    return x_new, p_new


def ghmc_step(x, logp, grad_x, logp_fn, eps, L, rng, norm_log=None):
    """One spherical HMC transition; gradients are ambient and projected here."""
    p0 = tangent_project(x, rng.standard_normal(x.shape))
    xs, p, g = x.copy(), p0.copy(), grad_x
    lp = logp
    for _ in range(L):
        p = tangent_project(xs, p + 0.5 * eps * g)
        xs, p = geodesic_flow(xs, p, eps)
        # renormalise against round-off drift; the flow itself is norm preserving
        nrm = math.sqrt(float(xs @ xs))
        if norm_log is not None:
            norm_log.append(abs(nrm - 1.0))
        xs = xs / nrm
        lp, g = _evaluate(logp_fn, xs)
        if lp is None:
            return x, logp, grad_x, False, np.inf
        p = tangent_project(xs, p + 0.5 * eps * g)
    h_cur = -logp + 0.5 * float(p0 @ p0)
    with np.errstate(over="ignore"):
        h_new = -lp + 0.5 * float(p @ p)
    dH = h_new - h_cur
    if math.log(rng.random()) < -dH:
        return xs, lp, g, True, dH
    return x, logp, grad_x, False, dH


# ---------------------------------------------------------------------------
# generic chains


@dataclass
class Chain:
    """Retained draws of a generic sampler."""

    samples: np.ndarray
    logp: np.ndarray
    accept_rate: float
    step_size: float
    delta_h: np.ndarray | None = None


def _run_generic(step, x0, logp_fn, cfg: SamplerConfig, rng, scale, sign=1.0):
    x = np.array(x0, dtype=float)
    lp, g = logp_fn(x)
    if not np.isfinite(lp):
        raise ValueError("log density is not finite at the initial state")
    adapter = Adapter([scale], cfg.target, cfg.adapt_every, sign=sign)
    out = np.empty((cfg.n_retained, x.size))
    out_lp = np.empty(cfg.n_retained)
    dhs = []
    acc = tries = 0
    k = 0
    for b in range(1, cfg.iters + 1):
        s = float(adapter.scales[0])
        x, lp, g, accepted, dH = step(x, lp, g, s)
        if b <= cfg.burn_in:
            adapter.record(0, accepted)
            adapter.step(b)
        else:
            acc += accepted
            tries += 1
            dhs.append(dH)
        if cfg.retained(b):
            out[k] = x
            out_lp[k] = lp
            k += 1
    rate = acc / tries if tries else float("nan")
    return Chain(out, out_lp, rate, float(adapter.scales[0]), np.asarray(dhs))


def run_hmc(target, x0, cfg: SamplerConfig, rng=None) -> Chain:
    """HMC on R^d. ``target(x)`` returns ``(log f(x), grad log f(x))``.

    The step size starts at ``cfg.epsilon`` and is tuned toward
    ``cfg.target`` during burn-in only.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def step(x, lp, g, eps):
        return hmc_step(x, lp, g, target, eps, cfg.L, rng)

    return _run_generic(step, x0, target, cfg, rng, cfg.epsilon)


def run_ghmc(target, x0, cfg: SamplerConfig, rng=None, norm_log=None) -> Chain:
    """Geodesic HMC on the unit sphere; ``target`` gives the ambient gradient."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    x0 = np.asarray(x0, dtype=float)
    if abs(np.linalg.norm(x0) - 1.0) > 1e-10:
        raise ValueError("initial point must lie on the unit sphere")

    def step(x, lp, g, eps):
        return ghmc_step(x, lp, g, target, eps, cfg.L, rng, norm_log)

    return _run_generic(step, x0, target, cfg, rng, cfg.epsilon)


def run_mh(target, x0, cfg: SamplerConfig, rng=None, space: str = "plane") -> Chain:
    """Random-walk Metropolis: Gaussian proposals on the plane, vMF on the sphere.

    ``target`` may return a bare log density or a ``(logp, grad)`` pair.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    spherical = space != "plane"

    def logp_only(x):
        v = target(x)
        return (v[0] if isinstance(v, tuple) else v), None

    def step(x, lp, _g, s):
        prop = sample_vmf(x, s, rng) if spherical else x + s * rng.standard_normal(x.shape)
        lq, _ = logp_only(prop)
        if np.isfinite(lq) and math.log(rng.random()) < lq - lp:
            return prop, lq, None, True, 0.0
        return x, lp, None, False, 0.0

    if spherical:
        scale = cfg.tau_z if cfg.tau_z is not None else 10.0
        return _run_generic(step, x0, logp_only, cfg, rng, scale, sign=-1.0)
    scale = cfg.tau_z if cfg.tau_z is not None else 0.5
    return _run_generic(step, x0, logp_only, cfg, rng, scale)


# ---------------------------------------------------------------------------
# latent space posterior


@dataclass
class ChainOutput:
    """Aligned retained draws of one latent space chain."""

    geometry: GeometrySpec
    alpha: np.ndarray
    beta: np.ndarray | None
    Z: np.ndarray  # (S, n, d), aligned to the reference
    loglik: np.ndarray
    logpost: np.ndarray
    pointwise: np.ndarray  # (S, n(n-1)/2) per-dyad log-likelihood
    acceptance: dict
    tuned: dict
    seed: list = field(default_factory=list)
    Z_raw: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.alpha.shape[0]

    def state(self, s: int) -> ParameterState:
        beta = None if self.beta is None else self.beta[s]
        return ParameterState(self.geometry, self.alpha[s], self.Z[s], beta)

    @property
    def draws(self) -> list:
        return [self.state(s) for s in range(self.n_draws)]


@dataclass
class PosteriorSamples:
    chains: list
    ml: MLFit
    config: SamplerConfig
    geometry: GeometrySpec
    hp: HyperParameters

    def concat(self, attr):
        parts = [getattr(c, attr) for c in self.chains]
        return None if parts[0] is None else np.concatenate(parts, axis=0)

    @property
    def n_draws(self) -> int:
        return sum(c.n_draws for c in self.chains)

    def states(self) -> list:
        return [s for c in self.chains for s in c.draws]


def initial_state(model: LatentSpaceModel, mode: str, ml: MLFit | None, rng, opt: OptimizerConfig | None = None):
    g = model.geometry
    if mode == "ml":
        return ml.state.copy()
    if g.spherical:
        hp = model.hp
        cov = [[hp.sigma_alpha ** 2, hp.rho * hp.sigma_alpha * hp.sigma_beta],
               [hp.rho * hp.sigma_alpha * hp.sigma_beta, hp.sigma_beta ** 2]]
        a, b = rng.multivariate_normal([hp.mu_alpha, hp.mu_beta], cov)
        prior = ParameterState(g, a, uniform_sphere(model.n, g.dim, rng), b)
    else:
        prior = ParameterState(g, rng.normal(model.hp.mu_alpha, model.hp.sigma_alpha),
                               model.hp.sigma_z * rng.standard_normal((model.n, g.dim)))
    if mode == "prior":
        return prior
    opt = opt or OptimizerConfig(max_iters=500, restarts=1)
    return maximize_posterior(model, prior, opt)


class _LatentChain:
    """Mutable sampler state for one chain; one call to :meth:`sweep` is one iteration."""

    def __init__(self, model: LatentSpaceModel, cfg: SamplerConfig, state: ParameterState, rng):
        self.model, self.cfg, self.rng = model, cfg, rng
        self.g = model.geometry
        self.Z = state.Z.copy()
        self.alpha = state.alpha
        self.beta = state.beta
        n = model.n
        self.k_theta = 2 if self.g.spherical else 1
        if cfg.algorithm == "MH":
            if self.g.spherical:
                z0 = cfg.tau_z if cfg.tau_z is not None else 20.0
                self.z_adapt = Adapter(np.full(n, z0), cfg.target, cfg.adapt_every, sign=-1.0, lo=1e-3, hi=1e6)
            else:
                z0 = cfg.tau_z if cfg.tau_z is not None else 0.5
                self.z_adapt = Adapter(np.full(n, z0), cfg.target, cfg.adapt_every, lo=1e-4, hi=50.0)
            self.t_adapt = Adapter(np.full(self.k_theta, cfg.tau_theta), cfg.target, cfg.adapt_every, lo=1e-4, hi=50.0)
        else:
            self.z_adapt = Adapter(np.full(n, cfg.epsilon), cfg.target, cfg.adapt_every, lo=1e-5, hi=10.0)
            self.t_adapt = Adapter([cfg.epsilon], cfg.target, cfg.adapt_every, lo=1e-5, hi=10.0)
        self.z_acc = np.zeros(n)
        self.t_acc = np.zeros(self.k_theta)
        self.post_iters = 0
        self._refresh()

    def _refresh(self):
        self.S = self.model.similarity(self.Z)
        self.ll = self.model.theta_loglik(self.alpha, self.beta, self.S)

    def logpost(self):
        return self.ll + self.model.log_prior_theta(self.alpha, self.beta) + self.model.log_prior_z(self.Z)

    # --- blocks -----------------------------------------------------------

    def _node_mh(self, i, tuning):
        m, rng = self.model, self.rng
        zi = self.Z[i]
        s = self.z_adapt.scales[i]
        prop = sample_vmf(zi, s, rng) if self.g.spherical else zi + s * rng.standard_normal(zi.shape)
        cur = m.node_logpost(i, zi, self.Z, self.alpha, self.beta)
        new = m.node_logpost(i, prop, self.Z, self.alpha, self.beta)
        ok = bool(np.isfinite(new) and math.log(rng.random()) < new - cur)
        if ok:
            self.Z[i] = prop
        return ok

    def _node_hmc(self, i, tuning):
        m = self.model
        others = self.Z

        def target(z):
            return m.node_logpost(i, z, others, self.alpha, self.beta), m.node_grad(i, z, others, self.alpha, self.beta)

        zi = self.Z[i].copy()
        lp, g = target(zi)
        eps = float(self.z_adapt.scales[i])
        step = ghmc_step if self.g.spherical else hmc_step
        z_new, _, _, ok, _ = step(zi, lp, g, target, eps, self.cfg.L, self.rng)
        if ok:
            self.Z[i] = z_new
        return ok

    def _theta_mh(self):
        m, rng = self.model, self.rng
        acc = []
        for k in range(self.k_theta):
            s = self.t_adapt.scales[k]
            a, b = self.alpha, self.beta
            if k == 0:
                a = a + s * rng.standard_normal()
            else:
                b = b + s * rng.standard_normal()
            ll_new = m.theta_loglik(a, b, self.S)
            d = ll_new + m.log_prior_theta(a, b) - self.ll - m.log_prior_theta(self.alpha, self.beta)
            ok = bool(np.isfinite(d) and math.log(rng.random()) < d)
            if ok:
                self.alpha, self.beta, self.ll = a, b, ll_new
            acc.append(ok)
        return acc

    def _theta_hmc(self):
        m = self.model
        S = self.S

        def unpack(x):
            return x[0], (x[1] if self.g.spherical else None)

        def target(x):
            a, b = unpack(x)
            return m.theta_loglik(a, b, S) + m.log_prior_theta(a, b), m.theta_grad(a, b, S)

        x = np.array([self.alpha, self.beta]) if self.g.spherical else np.array([self.alpha])
        lp, g = target(x)
        x_new, _, _, ok, _ = hmc_step(x, lp, g, target, float(self.t_adapt.scales[0]), self.cfg.L, self.rng)
        if ok:
            self.alpha, self.beta = unpack(x_new)
            self.ll = m.theta_loglik(self.alpha, self.beta, S)
        return [ok] * self.k_theta

    def sweep(self, b):
        tuning = b <= self.cfg.burn_in
        node = self._node_mh if self.cfg.algorithm == "MH" else self._node_hmc
        for i in range(self.model.n):
            ok = node(i, tuning)
            if tuning:
                self.z_adapt.record(i, ok)
            else:
                self.z_acc[i] += ok
        self._refresh()
        acc = self._theta_mh() if self.cfg.algorithm == "MH" else self._theta_hmc()
        for k, ok in enumerate(acc):
            if tuning:
                self.t_adapt.record(k if self.cfg.algorithm == "MH" else 0, ok)
            else:
                self.t_acc[k] += ok
        if tuning:
            self.z_adapt.step(b)
            self.t_adapt.step(b)
        else:
            self.post_iters += 1


def run_latent_chain(model: LatentSpaceModel, cfg: SamplerConfig, start: ParameterState, reference: np.ndarray,
                     rng, seed=None) -> ChainOutput:
    """Run one chain and align every retained draw of Z to ``reference``."""
    chain = _LatentChain(model, cfg, start, rng)
    if not np.isfinite(chain.logpost()):
        raise ValueError("log posterior is not finite at the initial state")
    S = cfg.n_retained
    n, d = model.n, model.geometry.dim
    alpha = np.empty(S)
    beta = np.empty(S) if model.geometry.spherical else None
    Z_raw = np.empty((S, n, d))
    ll = np.empty(S)
    lpost = np.empty(S)
    k = 0
    for b in range(1, cfg.iters + 1):
        chain.sweep(b)
        if cfg.retained(b):
            alpha[k] = chain.alpha
            if beta is not None:
                beta[k] = chain.beta
            Z_raw[k] = chain.Z
            ll[k] = chain.ll
            lpost[k] = chain.logpost()
            k += 1
    mode = "orthogonal" if model.geometry.spherical else "euclidean"
    Z = np.stack([procrustes_align(z, reference, mode) for z in Z_raw]) if S else Z_raw
    if model.geometry.spherical and S:
        Z = project_to_sphere(Z)
    pointwise = np.empty((S, model.n * (model.n - 1) // 2))
    for s in range(S):
        st = ParameterState(model.geometry, alpha[s], Z[s], None if beta is None else beta[s])
        pointwise[s] = model.pointwise_loglik(st)
    post = max(chain.post_iters, 1)
    acceptance = {"z": (chain.z_acc / post).tolist(), "theta": (chain.t_acc / post).tolist()}
    if model.geometry.spherical and cfg.algorithm == "MH":
        acceptance["alpha"], acceptance["beta"] = acceptance["theta"]
    else:
        acceptance["alpha"] = acceptance["theta"][0]
        if model.geometry.spherical:
            acceptance["beta"] = acceptance["theta"][-1]
    tuned = {"z": chain.z_adapt.scales.tolist(), "theta": chain.t_adapt.scales.tolist()}
    return ChainOutput(model.geometry, alpha, beta, Z, ll, lpost, pointwise, acceptance, tuned,
                       seed=list(seed) if seed is not None else [], Z_raw=Z_raw)


def sample_posterior(net: Network, geometry: GeometrySpec, hp: HyperParameters | None = None,
                     cfg: SamplerConfig | None = None, mask=None, ml: MLFit | None = None,
                     ml_cfg: OptimizerConfig | None = None) -> PosteriorSamples:
    """Fit the ML reference, then run ``cfg.chains`` independent chains.

    Chain ``c`` draws from ``np.random.default_rng([cfg.seed, c])``. The ML
    configuration is the Procrustes reference for all retained draws.
    """
    cfg = cfg or SamplerConfig()
    model = LatentSpaceModel(net, geometry, hp, mask)
    if ml is None:
        ml = fit_ml(net, geometry, ml_cfg or OptimizerConfig(seed=cfg.seed), mask=mask)
    chains = []
    for c in range(cfg.chains):
        seed = [cfg.seed, c]
        rng = np.random.default_rng(seed)
        start = initial_state(model, cfg.init, ml, rng)
        log.info("chain %d: starting %s sampler at log posterior %.3f", c, cfg.algorithm, model.log_posterior(start))
        chains.append(run_latent_chain(model, cfg, start, ml.state.Z, rng, seed))
    return PosteriorSamples(chains, ml, cfg, geometry, model.hp)
