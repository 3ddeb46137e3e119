"""Model comparison, predictive checks, latent centrality and link prediction."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp
from scipy.stats import rankdata

from .geometry import (
    ConvergenceError,
    GeometrySpec,
    frechet_mean,
    generalized_procrustes,
    pairwise_euclidean,
    pairwise_geodesic,
    project_to_sphere,
)
from .mle import OptimizerConfig
from .model import HyperParameters, LatentSpaceModel, ParameterState
from .network import (
    Network,
    geodesic_distances,
    greedy_modularity,
    shared_partner_counts,
    triad_census,
)
from .samplers import SamplerConfig, sample_posterior

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# WAIC and point estimates


def waic(pll) -> dict:
    """WAIC from an (S draws x D dyads) matrix of pointwise log-likelihoods.

    lppd sums the log of the per-dyad posterior mean likelihood; p_waic sums
    the per-dyad sample variances across draws.
    """
    pll = np.asarray(pll, dtype=float)
    if pll.ndim != 2 or pll.shape[0] < 1:
        raise ValueError("pointwise log-likelihood must be a non-empty S x D matrix")
    S = pll.shape[0]
    lppd = float(np.sum(logsumexp(pll, axis=0) - np.log(S)))
    p_waic = float(np.sum(pll.var(axis=0, ddof=1))) if S > 1 else 0.0
    return {"waic": -2.0 * (lppd - p_waic), "lppd": lppd, "p_waic": p_waic}


def posterior_mean_state(samples, refine: bool = True) -> ParameterState:
    """Coordinatewise mean of the aligned draws; spherical rows are re-projected.

    With ``refine`` the draws (already aligned to the ML configuration) are
    re-aligned to their own Procrustes mean before averaging. This matters
    when the ML reference is a poor representative of the posterior, e.g.
    when its slope has the opposite sign to most draws.
    """
    g = samples.geometry
    alpha = float(samples.concat("alpha").mean())
    Zs = samples.concat("Z")
    if refine and len(Zs) > 1:
        try:
            Z = generalized_procrustes(Zs, "orthogonal" if g.spherical else "euclidean")[1]
        except ConvergenceError:
            log.warning("Procrustes mean did not converge; using the ML-aligned mean")
            Z = Zs.mean(axis=0)
    else:
        Z = Zs.mean(axis=0)
    if g.spherical:
        Z = project_to_sphere(Z)
        return ParameterState(g, alpha, Z, float(samples.concat("beta").mean()))
    return ParameterState(g, alpha, Z)


def map_state(samples) -> ParameterState:
    """Retained draw with the largest log posterior."""
    best = None
    for c in samples.chains:
        k = int(np.argmax(c.logpost))
        if best is None or c.logpost[k] > best[0]:
            best = (c.logpost[k], c.state(k))
    return best[1]


def point_estimate_logliks(samples, net: Network, mask=None) -> dict:
    """Log-likelihood at the ML, MAP and posterior-mean states plus its posterior mean."""
    model = LatentSpaceModel(net, samples.geometry, samples.hp, mask)
    return {
        "mean": float(samples.concat("loglik").mean()),
        "ml": model.log_likelihood(samples.ml.state),
        "map": model.log_likelihood(map_state(samples)),
        "cm": model.log_likelihood(posterior_mean_state(samples)),
    }


def model_comparison(samples, net: Network) -> dict:
    """WAIC summary and point-estimate log-likelihoods for one fitted model."""
    out = waic(samples.concat("pointwise"))
    out.update({f"{k}_loglik": v for k, v in point_estimate_logliks(samples, net).items()})
    out["geometry"] = samples.geometry.name
    out["dof"] = samples.geometry.degrees_of_freedom(net.n)
    return out


# ---------------------------------------------------------------------------
# posterior predictive checks


def _geodesic_mean(A):
    d = geodesic_distances(A)
    if d.size == 0:
        raise ValueError("largest component has a single node")
    return float(d.mean())


def _modularity(A):
    if A.sum() == 0:
        raise ValueError("no edges")
    return greedy_modularity(A)[1]


STATISTICS = {
    "density": lambda A: A.sum() / (A.shape[0] * (A.shape[0] - 1)),
    "edges": lambda A: A.sum() / 2.0,
    "degree_mean": lambda A: A.sum(axis=1).mean(),
    "degree_var": lambda A: A.sum(axis=1).var(),
    "geodesic_mean": _geodesic_mean,
    "shared_partner_mean": lambda A: shared_partner_counts(A).mean(),
    "triad_0": lambda A: triad_census(A)[0],
    "triad_1": lambda A: triad_census(A)[1],
    "triad_2": lambda A: triad_census(A)[2],
    "triad_3": lambda A: triad_census(A)[3],
    "modularity": _modularity,
}


@dataclass
class PPCResult:
    name: str
    observed: float
    simulated: np.ndarray
    skipped: int

    @property
    def p_upper(self) -> float:
        return float(np.mean(self.simulated >= self.observed))

    @property
    def p_lower(self) -> float:
        return float(np.mean(self.simulated <= self.observed))

    @property
    def ppp(self) -> float:
        """Two-sided tail probability, capped at 1."""
        return min(1.0, 2.0 * min(self.p_upper, self.p_lower))

    def interval(self, level=0.95):
        q = (1.0 - level) / 2.0
        return tuple(float(v) for v in np.quantile(self.simulated, [q, 1.0 - q]))

    def histogram(self, bins=20):
        return np.histogram(self.simulated, bins=bins)

    def summary(self) -> dict:
        lo, hi = self.interval()
        return {"observed": float(self.observed), "mean": float(self.simulated.mean()),
                "ppp": self.ppp, "p_upper": self.p_upper, "interval95": [lo, hi],
                "n": int(self.simulated.size), "skipped": self.skipped}


def simulate_network(P, rng) -> np.ndarray:
    """Independent Bernoulli draw of every dyad from a probability matrix."""
    n = P.shape[0]
    iu = np.triu_indices(n, k=1)
    A = np.zeros((n, n), dtype=np.int8)
    A[iu] = rng.random(iu[0].size) < P[iu]
    return A + A.T


def posterior_predictive_check(samples, net: Network, statistics=None, seed: int = 0,
                               max_draws: int | None = None) -> dict:
    """Simulate one network per retained draw and compare statistics with the data.

    Statistics undefined on a simulated network are skipped for that draw
    only. Returns a dict of :class:`PPCResult` keyed by statistic name.
    """
    names = list(statistics) if statistics is not None else list(STATISTICS)
    model = LatentSpaceModel(net, samples.geometry, samples.hp)
    states = samples.states()
    if max_draws is not None and len(states) > max_draws:
        idx = np.linspace(0, len(states) - 1, max_draws).round().astype(int)
        states = [states[k] for k in idx]
    rng = np.random.default_rng(seed)
    obs_A = net.adjacency.astype(np.int64)
    sims = {k: [] for k in names}
    skips = dict.fromkeys(names, 0)
    for st in states:
        A = simulate_network(model.probabilities(st), rng).astype(np.int64)
        for k in names:
            try:
                v = float(STATISTICS[k](A))
            except ValueError:
                skips[k] += 1
                continue
            if np.isfinite(v):
                sims[k].append(v)
            else:
                skips[k] += 1
    out = {}
    for k in names:
        out[k] = PPCResult(k, float(STATISTICS[k](obs_A)), np.asarray(sims[k]), skips[k])
    return out


# ---------------------------------------------------------------------------
# centrality


@dataclass
class CentralityReport:
    labels: list
    degree: np.ndarray
    probability_connection: np.ndarray
    mean_distance: np.ndarray
    center_distance: np.ndarray
    correlations: dict
    skipped_centers: int = 0

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "degree": self.degree.tolist(),
            "probability_connection": self.probability_connection.tolist(),
            "mean_distance": self.mean_distance.tolist(),
            "center_distance": self.center_distance.tolist(),
            "correlations": self.correlations,
            "skipped_centers": self.skipped_centers,
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "degree", "probability_connection", "mean_distance", "center_distance"])
            for k, lab in enumerate(self.labels):
                w.writerow([lab, int(self.degree[k]), repr(float(self.probability_connection[k])),
                            repr(float(self.mean_distance[k])), repr(float(self.center_distance[k]))])


def _pearson(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def centrality(samples, net: Network) -> CentralityReport:
    """Posterior averages of three latent centralities and their correlation with degree.

    Per draw: the summed connection probabilities of node i, its summed
    latent distances to all other nodes, and its distance to the centroid of
    that draw (Frechet mean on the sphere, arithmetic mean in the plane).
    """
    g = samples.geometry
    model = LatentSpaceModel(net, g, samples.hp)
    n = net.n
    pc, md, cd = np.zeros(n), np.zeros(n), np.zeros(n)
    n_draws = n_centers = 0
    for st in samples.states():
        pc += model.probabilities(st).sum(axis=1)
        D = pairwise_geodesic(st.Z) if g.spherical else pairwise_euclidean(st.Z)
        np.fill_diagonal(D, 0.0)
        md += D.sum(axis=1)
        n_draws += 1
        try:
            c = frechet_mean(st.Z, spherical=g.spherical)
        except ConvergenceError:
            continue
        if g.spherical:
            cd += np.arccos(np.clip(st.Z @ c, -1.0, 1.0))
        else:
            cd += np.linalg.norm(st.Z - c, axis=1)
        n_centers += 1
    pc /= n_draws
    md /= n_draws
    cd = cd / n_centers if n_centers else np.full(n, np.nan)
    deg = net.degrees()
    corr = {
        "probability_connection": _pearson(pc, deg),
        "mean_distance": _pearson(md, deg),
        "center_distance": _pearson(cd, deg),
    }
    labels = list(net.labels) if net.labels else [str(i) for i in range(n)]
    return CentralityReport(labels, deg, pc, md, cd, corr, n_draws - n_centers)


# ---------------------------------------------------------------------------
# link prediction


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative cases")
    r = rankdata(scores)
    return float((r[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels):
    """False and true positive rates at every distinct score threshold, from (0,0) to (1,1)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    tpr = np.r_[0.0, tp / max(y.sum(), 1)]
    fpr = np.r_[0.0, fp / max((~y).sum(), 1)]
    return fpr, tpr


def classification_metrics(scores, labels, threshold: float = 0.5) -> dict:
    labels = np.asarray(labels).astype(bool)
    pred = np.asarray(scores, dtype=float) >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    f1 = 2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return {"accuracy": float(np.mean(pred == labels)), "f1": float(f1)}


def stratified_folds(y, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold index per dyad, dealing edges and non-edges round-robin after shuffling."""
    y = np.asarray(y).astype(bool)
    if k < 2:
        raise ValueError("need at least two folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=int)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return folds


def predictive_probabilities(samples, net: Network, dyads) -> np.ndarray:
    """Posterior mean tie probability on the given (rows, cols) dyads."""
    g = samples.geometry
    i, j = dyads
    total = np.zeros(len(i))
    m = 0
    for c in samples.chains:
        for s in range(c.n_draws):
            Z = c.Z_raw[s] if c.Z_raw is not None else c.Z[s]
            if g.spherical:
                eta = c.alpha[s] + c.beta[s] * np.sum(Z[i] * Z[j], axis=1)
            else:
                eta = c.alpha[s] - np.linalg.norm(Z[i] - Z[j], axis=1)
            total += expit(eta)
            m += 1
    return total / m


@dataclass
class LinkPredictionResult:
    geometry: str
    auc: float
    fold_auc: list
    mean_fold_auc: float
    accuracy: float
    f1: float
    fpr: np.ndarray
    tpr: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    folds: np.ndarray
    skipped_folds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"geometry": self.geometry, "auc": self.auc, "fold_auc": self.fold_auc,
                "mean_fold_auc": self.mean_fold_auc, "accuracy": self.accuracy, "f1": self.f1,
                "skipped_folds": self.skipped_folds}

    def write_roc(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr"])
            for a, b in zip(self.fpr, self.tpr):
                w.writerow([repr(float(a)), repr(float(b))])


def link_prediction(net: Network, geometry: GeometrySpec, hp: HyperParameters | None = None,
                    cfg: SamplerConfig | None = None, k: int = 5, seed: int = 0,
                    ml_cfg: OptimizerConfig | None = None) -> LinkPredictionResult:
    """Stratified k-fold cross-validation over dyads.

    Each fold is refitted with its dyads masked out of the likelihood and
    scored by the posterior mean tie probability. ``auc`` pools all
    out-of-fold scores; per-fold values are kept alongside.
    """
    cfg = cfg or SamplerConfig(iters=6000, burn_in=2000, thin=10, chains=1, seed=seed)
    ml_cfg = ml_cfg or OptimizerConfig(restarts=5, max_iters=2000, seed=seed)
    n = net.n
    iu = np.triu_indices(n, k=1)
    y = net.adjacency[iu].astype(bool)
    folds = stratified_folds(y, k, seed)
    scores = np.empty(y.size)
    fold_auc, skipped = [], []
    for f in range(k):
        test = folds == f
        M = np.ones((n, n))
        M[iu[0][test], iu[1][test]] = 0.0
        M[iu[1][test], iu[0][test]] = 0.0
        ps = sample_posterior(net, geometry, hp, cfg, mask=M, ml_cfg=ml_cfg)
        scores[test] = predictive_probabilities(ps, net, (iu[0][test], iu[1][test]))
        try:
            fold_auc.append(auc(scores[test], y[test]))
        except ValueError:
            skipped.append(f)
        log.info("%s fold %d done", geometry.name, f)
    fpr, tpr = roc_curve(scores, y)
    cls = classification_metrics(scores, y)
    return LinkPredictionResult(geometry.name, auc(scores, y), fold_auc,
                                float(np.mean(fold_auc)) if fold_auc else float("nan"),
                                cls["accuracy"], cls["f1"], fpr, tpr, scores, y, folds, skipped)


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
