"""Spectral clustering of latent positions with silhouette and modularity selection."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import pairwise_euclidean, pairwise_geodesic
from .network import Network, modularity


class ClusteringError(ValueError):
    pass


def affinity_matrix(Z, spherical: bool) -> np.ndarray:
    """Geometry-matched kernel with a median bandwidth; zero diagonal.

    Euclidean: exp(-d^2 / (2 s^2)) with s the median pairwise distance.
    Spherical: exp(k z_i^T z_j) with k = 1 / median(1 - z_i^T z_j), shifted
    by exp(-k) so the largest possible entry is 1 (a constant factor, which
    the normalised Laplacian ignores).
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    iu = np.triu_indices(n, k=1)
    if spherical:
        G = np.clip(Z @ Z.T, -1.0, 1.0)
        med = np.median(1.0 - G[iu])
        if not med > 1e-12:
            raise ClusteringError("all positions coincide; only a single cluster exists")
        A = np.exp((G - 1.0) / med)
    else:
        D = pairwise_euclidean(Z)
        med = np.median(D[iu])
        if not med > 1e-12:
            raise ClusteringError("all positions coincide; only a single cluster exists")
        A = np.exp(-D ** 2 / (2.0 * med ** 2))
    np.fill_diagonal(A, 0.0)
    return A


def spectral_embedding(A, k: int) -> np.ndarray:
    """Rows of the k leading eigenvectors of D^-1/2 A D^-1/2, scaled to unit length."""
    d = A.sum(axis=1)
    if np.any(d <= 0):
        raise ClusteringError("affinity has an isolated point")
    s = 1.0 / np.sqrt(d)
    M = s[:, None] * A * s[None, :]
    w, V = np.linalg.eigh(M)
    U = V[:, ::-1][:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return U / np.where(norms > 0, norms, 1.0)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        j = rng.choice(n, p=d2 / tot) if tot > 0 else rng.integers(n)
        centers.append(X[j])
        d2 = np.minimum(d2, np.sum((X - X[j]) ** 2, axis=1))
    return np.array(centers)


def kmeans(X, k: int, restarts: int = 20, seed: int = 0, max_iter: int = 300):
    """Lloyd iterations from k-means++ seeds; keeps the lowest-inertia restart."""
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        C = _kmeans_pp(X, k, rng)
        lab = None
        for _ in range(max_iter):
            d2 = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
            new = np.argmin(d2, axis=1)
            if lab is not None and np.array_equal(new, lab):
                break
            lab = new
            for c in range(k):
                if np.any(lab == c):
                    C[c] = X[lab == c].mean(axis=0)
        inertia = float(np.sum((X - C[lab]) ** 2))
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, lab.copy())
    return canonical_labels(best[1]), best[0]


def canonical_labels(labels) -> np.ndarray:
    """Renumber clusters in order of first appearance."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = {labels[i]: c for c, i in enumerate(sorted(first))}
    return np.array([order[v] for v in labels], dtype=int)


def silhouette_samples(D, labels) -> np.ndarray:
    """Per-point silhouette from a precomputed distance matrix (singletons score 0)."""
    D = np.asarray(D, dtype=float)
    labels = np.asarray(labels)
    ks = np.unique(labels)
    out = np.zeros(len(labels))
    if ks.size < 2:
        return out
    for i in range(len(labels)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in ks if c != labels[i])
        out[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return out


@dataclass
class ClusteringResult:
    K: int
    assignment: np.ndarray
    silhouette: float
    modularity: float
    labels: list
    table: list = field(default_factory=list)  # (K, silhouette, modularity) per candidate

    def to_dict(self) -> dict:
        return {"K": self.K, "silhouette": self.silhouette, "modularity": self.modularity,
                "assignment": {str(l): int(c) for l, c in zip(self.labels, self.assignment)},
                "candidates": [{"K": k, "silhouette": s, "modularity": m} for k, s, m in self.table]}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "community"])
            for l, c in zip(self.labels, self.assignment):
                w.writerow([l, int(c)])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def spectral_cluster(Z, spherical: bool, net: Network | None = None, k_range=None, seed: int = 0,
                     restarts: int = 20, window: float = 0.02) -> ClusteringResult:
    """Cluster a point estimate of the latent positions.

    Every K in ``k_range`` is clustered; those whose mean silhouette lies
    within ``window`` of the best become candidates, and the candidate with
    the highest modularity on ``net`` wins (smaller K on ties). Without a
    network the best silhouette wins.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    ks = list(k_range) if k_range is not None else list(range(2, min(n - 1, 10) + 1))
    if not ks:
        raise ClusteringError("k_range is empty")
    if min(ks) < 2 or max(ks) > n - 1:
        raise ClusteringError("k_range must lie within [2, n - 1]")
    A = affinity_matrix(Z, spherical)
    D = pairwise_geodesic(Z) if spherical else pairwise_euclidean(Z)
    np.fill_diagonal(D, 0.0)
    runs = []
    for k in ks:
        lab, _ = kmeans(spectral_embedding(A, k), k, restarts, seed)
        sil = float(silhouette_samples(D, lab).mean())
        q = modularity(net.adjacency, lab) if net is not None and net.n_edges else float("nan")
        runs.append((k, lab, sil, q))
    top = max(r[2] for r in runs)
    cands = [r for r in runs if r[2] >= top - window]
    if net is not None and net.n_edges:
        best = max(cands, key=lambda r: (r[3], -r[0]))
    else:
        best = max(cands, key=lambda r: (r[2], -r[0]))
    k, lab, sil, q = best
    labels = list(net.labels) if net is not None and net.labels else [str(i) for i in range(n)]
    return ClusteringResult(int(len(np.unique(lab))), lab, sil, q, labels,
                            [(r[0], r[2], r[3]) for r in runs])
