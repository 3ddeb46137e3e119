"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from latentspace.geometry import GeometrySpec, uniform_sphere
from latentspace.model import LatentSpaceModel, ParameterState
from latentspace.network import from_edges


def random_net(n, p, rng):
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    return from_edges(list(zip(iu[0][keep], iu[1][keep])), n=n)


def random_state(geometry: GeometrySpec, n, rng):
    if geometry.spherical:
        return ParameterState(geometry, rng.normal(), uniform_sphere(n, geometry.dim, rng), rng.normal(2.0, 2.0))
    return ParameterState(geometry, rng.normal(), rng.standard_normal((n, geometry.dim)))


def raw_objective(model: LatentSpaceModel, posterior: bool):
    """Objective on the flat vector (alpha, [beta], Z) without any sphere constraint."""
    g, n = model.geometry, model.n
    k = 2 if g.spherical else 1

    def f(x):
        Z = x[k:].reshape(n, g.dim)
        beta = x[1] if g.spherical else None
        val = model.theta_loglik(x[0], beta, model.similarity(Z))
        if posterior:
            val += model.log_prior_theta(x[0], beta) + model.log_prior_z(Z)
        return val
    return f


def central_difference(f, x, h=1e-6):
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def flat(state: ParameterState):
    return np.concatenate([state.theta(), state.Z.ravel()])


def gradient_rel_error(model, state, posterior):
    g = (model.grad_log_posterior(state) if posterior else model.grad_log_likelihood(state)).flat()
    fd = central_difference(raw_objective(model, posterior), flat(state))
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))


def loglik_by_dyad(state, A):
    n = A.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if state.geometry.spherical:
                eta = state.alpha + state.beta * float(state.Z[i] @ state.Z[j])
            else:
                eta = state.alpha - float(np.sqrt(np.sum((state.Z[i] - state.Z[j]) ** 2)))
            total += A[i, j] * eta - np.log1p(np.exp(eta))
    return total


def waic_by_hand(pll):
    """Direct transcription of the three WAIC formulas with explicit loops."""
    S, D = len(pll), len(pll[0])
    lppd = 0.0
    p = 0.0
    for d in range(D):
        col = [pll[s][d] for s in range(S)]
        lppd += np.log(sum(np.exp(v) for v in col) / S)
        m = sum(col) / S
        p += sum((v - m) ** 2 for v in col) / (S - 1)
    return lppd, p, -2 * (lppd - p)


def ar1(phi, n, rng, chains=1):
    x = np.empty((chains, n))
    x[:, 0] = rng.standard_normal(chains) / np.sqrt(1 - phi ** 2)
    eps = rng.standard_normal((chains, n))
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + eps[:, t]
    return x


def samples_from_states(net, states, chains=1):
    """PosteriorSamples wrapping a hand-made list of states (split evenly over chains)."""
    from latentspace.mle import MLFit
    from latentspace.samplers import ChainOutput, PosteriorSamples, SamplerConfig

    g = states[0].geometry
    model = LatentSpaceModel(net, g)
    out = []
    for part in np.array_split(np.arange(len(states)), chains):
        sts = [states[k] for k in part]
        out.append(ChainOutput(
            g, np.array([s.alpha for s in sts]), None if not g.spherical else np.array([s.beta for s in sts]),
            np.stack([s.Z for s in sts]), np.array([model.log_likelihood(s) for s in sts]),
            np.array([model.log_posterior(s) for s in sts]), np.stack([model.pointwise_loglik(s) for s in sts]),
            {}, {}))
    ml = MLFit(states[0], model.log_likelihood(states[0]), [], True, False, [])
    return PosteriorSamples(out, ml, SamplerConfig(), g, model.hp)
