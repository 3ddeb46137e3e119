"""Likelihood, priors and gradients of the Euclidean and spherical latent space models.

Euclidean:  eta_ij = alpha - ||z_i - z_j||
Spherical:  eta_ij = alpha + beta <z_i, z_j>,  ||z_i|| = 1

with y_ij ~ Bernoulli(expit(eta_ij)) independently over dyads i < j.
Dyads can be masked out (treated as missing) for held-out evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .geometry import GeometrySpec, pairwise_euclidean
from .network import Network

COINCIDENT_TOL = 1e-12


def softplus(eta):
    """log(1 + exp(eta)) without overflow or loss of relative precision."""
    return np.logaddexp(0.0, eta)


@dataclass(frozen=True)
class HyperParameters:
    sigma_z: float = 5.0
    mu_alpha: float = 0.0
    sigma_alpha: float = 5.0
    mu_beta: float = 10.0
    sigma_beta: float = 5.0
    rho: float = -0.5

    def __post_init__(self):
        for name in ("sigma_z", "sigma_alpha", "sigma_beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")

    @classmethod
    def default(cls, geometry: GeometrySpec) -> "HyperParameters":
        """Prior settings used for the Florentine analysis."""
        if geometry.spherical:
            return cls(mu_alpha=0.0, sigma_alpha=1.0, mu_beta=10.0, sigma_beta=5.0, rho=-0.5)
        return cls(sigma_z=5.0, mu_alpha=0.0, sigma_alpha=5.0)


@dataclass
class ParameterState:
    """Intercept, similarity coefficient (spherical only) and latent positions (rows)."""

    geometry: GeometrySpec
    alpha: float
    Z: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        self.alpha = float(self.alpha)
        if self.Z.ndim != 2 or self.Z.shape[1] != self.geometry.dim:
            raise ValueError(f"Z must be n x {self.geometry.dim}")
        if self.geometry.spherical:
            if self.beta is None:
                raise ValueError("spherical states need beta")
            self.beta = float(self.beta)
            if np.max(np.abs(np.linalg.norm(self.Z, axis=1) - 1.0)) > 1e-10:
                raise ValueError("spherical latent positions must have unit norm")
        elif self.beta is not None:
            raise ValueError("beta is only defined for spherical models")
        if not np.all(np.isfinite(self.Z)):
            raise ValueError("latent positions must be finite")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    def copy(self) -> "ParameterState":
        return replace(self, Z=self.Z.copy())

    def theta(self) -> np.ndarray:
        return np.array([self.alpha, self.beta]) if self.geometry.spherical else np.array([self.alpha])

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry.name,
            "alpha": self.alpha,
            "beta": self.beta,
            "Z": self.Z.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterState":
        return cls(GeometrySpec.parse(d["geometry"]), d["alpha"], np.array(d["Z"], dtype=float), d.get("beta"))


@dataclass
class Gradient:
    alpha: float
    Z: np.ndarray
    beta: float | None = None

    def flat(self) -> np.ndarray:
        head = [self.alpha] if self.beta is None else [self.alpha, self.beta]
        return np.concatenate([head, self.Z.ravel()])

    def sq_norm(self) -> float:
        return float(np.dot(self.flat(), self.flat()))


class LatentSpaceModel:
    """Network + geometry + priors, with an optional mask of observed dyads.

    ``mask`` is a symmetric 0/1 matrix; dyads with mask 0 contribute nothing
    to the likelihood or its gradient.
    """

    def __init__(self, net: Network, geometry: GeometrySpec, hp: HyperParameters | None = None, mask=None):
        self.net = net
        self.geometry = geometry
        self.hp = hp if hp is not None else HyperParameters.default(geometry)
        self.Y = net.adjacency.astype(float)
        n = net.n
        M = np.ones((n, n)) if mask is None else np.asarray(mask, dtype=float).copy()
        if M.shape != (n, n) or not np.array_equal(M, M.T):
            raise ValueError("mask must be a symmetric n x n matrix")
        np.fill_diagonal(M, 0.0)
        self.mask = M
        self.iu = np.triu_indices(n, k=1)

    @property
    def n(self) -> int:
        return self.net.n

    def _check(self, state: ParameterState):
        if state.geometry != self.geometry or state.n != self.n:
            raise ValueError("state does not match the model's geometry or network size")

    # --- linear predictor -------------------------------------------------

    def similarity(self, Z):
        """Pairwise distances (Euclidean) or inner products (spherical)."""
        return Z @ Z.T if self.geometry.spherical else pairwise_euclidean(Z)

    def eta_from(self, alpha, beta, S):
        return alpha + beta * S if self.geometry.spherical else alpha - S

    def eta(self, state: ParameterState) -> np.ndarray:
        return self.eta_from(state.alpha, state.beta, self.similarity(state.Z))

    # --- likelihood -------------------------------------------------------

    def loglik_matrix(self, eta) -> np.ndarray:
        return self.mask * (self.Y * eta - softplus(eta))

    def log_likelihood(self, state: ParameterState) -> float:
        self._check(state)
        eta = self.eta(state)[self.iu]
        terms = self.Y[self.iu] * eta - softplus(eta)
        return float(np.sum(self.mask[self.iu] * terms))

    def pointwise_loglik(self, state: ParameterState) -> np.ndarray:
        """Per-dyad log-likelihood terms over the upper triangle (unmasked)."""
        eta = self.eta(state)[self.iu]
        return self.Y[self.iu] * eta - softplus(eta)

    def probabilities(self, state: ParameterState) -> np.ndarray:
        P = expit(self.eta(state))
        np.fill_diagonal(P, 0.0)
        return P

    def grad_log_likelihood(self, state: ParameterState) -> Gradient:
        self._check(state)
        Z = state.Z
        S = self.similarity(Z)
        R = self.mask * (self.Y - expit(self.eta_from(state.alpha, state.beta, S)))
        d_alpha = 0.5 * R.sum()
        if self.geometry.spherical:
            return Gradient(d_alpha, state.beta * (R @ Z), 0.5 * float(np.sum(R * S)))
        return Gradient(d_alpha, self._distance_grad(R, S, Z))

    @staticmethod
    def _distance_grad(R, D, Z):
        # row k: sum_i R_ik (z_i - z_k) / ||z_i - z_k||; coincident pairs contribute zero
        safe = D > COINCIDENT_TOL
        W = np.where(safe, R / np.where(safe, D, 1.0), 0.0)
        np.fill_diagonal(W, 0.0)
        return W @ Z - W.sum(axis=1)[:, None] * Z

    # --- priors -----------------------------------------------------------

    def log_prior_theta(self, alpha, beta=None) -> float:
        hp = self.hp
        if self.geometry.spherical:
            a = (alpha - hp.mu_alpha) / hp.sigma_alpha
            b = (beta - hp.mu_beta) / hp.sigma_beta
            return float(-(a * a - 2.0 * hp.rho * a * b + b * b) / (2.0 * (1.0 - hp.rho ** 2)))
        return float(-((alpha - hp.mu_alpha) ** 2) / (2.0 * hp.sigma_alpha ** 2))

    def grad_log_prior_theta(self, alpha, beta=None) -> np.ndarray:
        hp = self.hp
        if self.geometry.spherical:
            a = (alpha - hp.mu_alpha) / hp.sigma_alpha
            b = (beta - hp.mu_beta) / hp.sigma_beta
            k = 1.0 / (1.0 - hp.rho ** 2)
            return np.array([-k * (a - hp.rho * b) / hp.sigma_alpha, -k * (b - hp.rho * a) / hp.sigma_beta])
        return np.array([-(alpha - hp.mu_alpha) / hp.sigma_alpha ** 2])

    def log_prior_z(self, Z) -> float:
        if self.geometry.spherical:
            return 0.0
        return float(-np.sum(np.asarray(Z) ** 2) / (2.0 * self.hp.sigma_z ** 2))

    def log_prior(self, state: ParameterState) -> float:
        return self.log_prior_theta(state.alpha, state.beta) + self.log_prior_z(state.Z)

    def grad_log_prior(self, state: ParameterState) -> Gradient:
        g = self.grad_log_prior_theta(state.alpha, state.beta)
        if self.geometry.spherical:
            return Gradient(g[0], np.zeros_like(state.Z), g[1])
        return Gradient(g[0], -state.Z / self.hp.sigma_z ** 2)

    def log_posterior(self, state: ParameterState) -> float:
        return self.log_likelihood(state) + self.log_prior(state)

    def grad_log_posterior(self, state: ParameterState) -> Gradient:
        gl = self.grad_log_likelihood(state)
        gp = self.grad_log_prior(state)
        beta = None if gl.beta is None else gl.beta + gp.beta
        return Gradient(gl.alpha + gp.alpha, gl.Z + gp.Z, beta)

    # --- single-node pieces used by the samplers -------------------------

    def node_similarity(self, zi, Z):
        if self.geometry.spherical:
            return Z @ zi
        diff = Z - zi
        return np.sqrt(np.sum(diff * diff, axis=1))

    def node_logpost(self, i, zi, state_Z, alpha, beta) -> float:
        """Terms of the log posterior that involve node ``i`` placed at ``zi``."""
        s = self.node_similarity(zi, state_Z)
        eta = self.eta_from(alpha, beta, s)
        m = self.mask[i]
        val = float(np.sum(m * (self.Y[i] * eta - softplus(eta))))
        if not self.geometry.spherical:
            val -= float(zi @ zi) / (2.0 * self.hp.sigma_z ** 2)
        return val

    def node_grad(self, i, zi, state_Z, alpha, beta) -> np.ndarray:
        """Ambient gradient of :meth:`node_logpost` with respect to ``zi``."""
        s = self.node_similarity(zi, state_Z)
        r = self.mask[i] * (self.Y[i] - expit(self.eta_from(alpha, beta, s)))
        r[i] = 0.0
        if self.geometry.spherical:
            return beta * (r @ state_Z)
        safe = s > COINCIDENT_TOL
        w = np.where(safe, r / np.where(safe, s, 1.0), 0.0)
        return w @ state_Z - w.sum() * zi - zi / self.hp.sigma_z ** 2

    def theta_loglik(self, alpha, beta, S) -> float:
        """Log-likelihood for given globals with a precomputed similarity matrix."""
        eta = self.eta_from(alpha, beta, S[self.iu])
        return float(np.sum(self.mask[self.iu] * (self.Y[self.iu] * eta - softplus(eta))))

    def theta_grad(self, alpha, beta, S) -> np.ndarray:
        s = S[self.iu]
        r = self.mask[self.iu] * (self.Y[self.iu] - expit(self.eta_from(alpha, beta, s)))
        g = np.array([r.sum(), r @ s]) if self.geometry.spherical else np.array([r.sum()])
        return g + self.grad_log_prior_theta(alpha, beta)


# functional front end ------------------------------------------------------


def linear_predictor(state: ParameterState, i: int, j: int) -> float:
    if i == j:
        raise ValueError("the linear predictor is defined for distinct nodes only")
    zi, zj = state.Z[i], state.Z[j]
    if state.geometry.spherical:
        return state.alpha + state.beta * float(zi @ zj)
    return state.alpha - float(np.linalg.norm(zi - zj))


def log_likelihood(state: ParameterState, net: Network, mask=None) -> float:
    return LatentSpaceModel(net, state.geometry, mask=mask).log_likelihood(state)


def grad_log_likelihood(state: ParameterState, net: Network, mask=None) -> Gradient:
    return LatentSpaceModel(net, state.geometry, mask=mask).grad_log_likelihood(state)


def log_prior(state: ParameterState, hp: HyperParameters) -> float:
    return LatentSpaceModel(Network(np.zeros((state.n, state.n))), state.geometry, hp).log_prior(state)


def log_posterior(state: ParameterState, net: Network, hp: HyperParameters, mask=None) -> float:
    return LatentSpaceModel(net, state.geometry, hp, mask).log_posterior(state)


def grad_log_posterior(state: ParameterState, net: Network, hp: HyperParameters, mask=None) -> Gradient:
    return LatentSpaceModel(net, state.geometry, hp, mask).grad_log_posterior(state)
