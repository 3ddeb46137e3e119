"""Sphere and Euclidean primitives: projections, vMF sampling, means, Procrustes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GeometrySpec:
    """Latent space choice.

    ``dim`` is always the ambient dimension: ``GeometrySpec("spherical", 3)``
    is the 2-sphere embedded in R^3.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "spherical"):
            raise ValueError(f"unknown geometry {self.kind!r}")
        if int(self.dim) != self.dim:
            raise ValueError("dimension must be an integer")
        if self.kind == "euclidean" and self.dim < 1:
            raise ValueError("Euclidean latent space needs dimension >= 1")
        if self.kind == "spherical" and self.dim < 2:
            raise ValueError("spherical latent space needs ambient dimension >= 2")

    @property
    def spherical(self) -> bool:
        return self.kind == "spherical"

    @property
    def name(self) -> str:
        return f"S{self.dim - 1}" if self.spherical else f"R{self.dim}"

    @classmethod
    def parse(cls, text: str) -> "GeometrySpec":
        """``"R2"`` -> Euclidean plane, ``"S1"`` -> circle in R^2."""
        text = text.strip().upper()
        if len(text) < 2 or text[0] not in "RS" or not text[1:].isdigit():
            raise ValueError(f"cannot parse geometry {text!r}; expected e.g. R2 or S1")
        k = int(text[1:])
        return cls("euclidean", k) if text[0] == "R" else cls("spherical", k + 1)

    def degrees_of_freedom(self, n: int) -> int:
        return n * (self.dim - 1) + 2 if self.spherical else n * self.dim + 1


def project_to_sphere(v):
    """Scale ``v`` (or every row of a matrix) to unit length."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot project the zero vector onto the sphere")
    return v / norm


def tangent_project(x, p):
    """Component of ``p`` orthogonal to the unit vector ``x``: (I - x x^T) p."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return p - np.sum(x * p, axis=-1, keepdims=True) * x


def _vmf_cosine(kappa, d, rng):
    """Wood's rejection sampler for w = <x, mu> under vMF on S^{d-1}."""
    if kappa == 0:
        return 2.0 * rng.beta((d - 1) / 2.0, (d - 1) / 2.0) - 1.0
    b = (d - 1.0) / (2.0 * kappa + np.sqrt(4.0 * kappa ** 2 + (d - 1.0) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (d - 1.0) * np.log(1.0 - x0 ** 2)
    while True:
        z = rng.beta((d - 1) / 2.0, (d - 1) / 2.0)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random()
        if kappa * w + (d - 1.0) * np.log(1.0 - x0 * w) - c >= np.log(u):
            return w


def sample_vmf(mu, kappa, rng, size=None):
    """Draw from the von Mises-Fisher distribution with mean ``mu`` and concentration ``kappa``.

    The cosine to ``mu`` comes from Wood's (1994) rejection scheme; the
    remaining direction is uniform in the tangent space at ``mu``.
    Returns one vector, or an array of shape ``(size, d)``.
    """
    mu = np.asarray(mu, dtype=float)
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    d = mu.shape[0]
    m = 1 if size is None else int(size)
    out = np.empty((m, d))
    for k in range(m):
        w = _vmf_cosine(float(kappa), d, rng)
        v = rng.standard_normal(d)
        v -= v.dot(mu) * mu
        nv = np.linalg.norm(v)
        while nv < 1e-12:
            v = rng.standard_normal(d)
            v -= v.dot(mu) * mu
            nv = np.linalg.norm(v)
        x = w * mu + np.sqrt(max(1.0 - w * w, 0.0)) * (v / nv)
        out[k] = x / np.linalg.norm(x)
    return out[0] if size is None else out


def geodesic_distance(u, v):
    """Great-circle angle arccos(<u, v>) in [0, pi], broadcasting over leading axes."""
    ip = np.sum(np.asarray(u, dtype=float) * np.asarray(v, dtype=float), axis=-1)
    return np.arccos(np.clip(ip, -1.0, 1.0))


def pairwise_geodesic(Z):
    return np.arccos(np.clip(Z @ Z.T, -1.0, 1.0))


def pairwise_euclidean(Z):
    diff = Z[:, None, :] - Z[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _log_map(x, y):
    """Tangent vector at ``x`` pointing along the geodesic to ``y`` with the arc length."""
    c = np.clip(y @ x, -1.0, 1.0)
    theta = np.arccos(c)
    u = y - c[:, None] * x
    s = np.linalg.norm(u, axis=1)
    scale = np.where(s > 1e-15, theta / np.where(s > 1e-15, s, 1.0), 0.0)
    return u * scale[:, None]


def _exp_map(x, v):
    t = np.linalg.norm(v)
    if t < 1e-300:
        return x
    y = np.cos(t) * x + np.sin(t) * v / t
    return y / np.linalg.norm(y)


class ConvergenceError(RuntimeError):
    pass


def frechet_mean(points, spherical: bool = True, tol: float = 1e-10, max_iter: int = 1000):
    """Minimiser of the summed squared geodesic distances to ``points``.

    Riemannian gradient descent from the normalised arithmetic mean. For
    Euclidean points this is just the arithmetic mean.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if not spherical:
        return P.mean(axis=0)
    m = P.mean(axis=0)
    if np.linalg.norm(m) < 1e-12:
        raise ConvergenceError("points are antipodally balanced; Frechet mean is not unique")
    x = m / np.linalg.norm(m)
    for _ in range(max_iter):
        step = _log_map(x, P).mean(axis=0)
        x = _exp_map(x, step)
        if np.linalg.norm(step) < tol:
            return x
    raise ConvergenceError("Frechet mean iteration did not converge")


def procrustes_rotation(Z, reference):
    """Orthogonal T minimising ||reference - Z T^T||_F (rows are points)."""
    M = np.asarray(reference, dtype=float).T @ np.asarray(Z, dtype=float)
    try:
        U, _, Vt = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("SVD failed on degenerate cross-product matrix") from exc
    return U @ Vt


def procrustes_align(Z, reference, mode: str = "orthogonal"):
    """Rotate (and in Euclidean mode translate) ``Z`` onto ``reference``.

    ``orthogonal`` applies T = U V^T from the SVD of reference^T Z to each
    row. ``euclidean`` centres both configurations first and moves the result
    to the reference centroid. Neither mode rescales.
    """
    Z = np.asarray(Z, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if Z.shape != reference.shape:
        raise ValueError("configurations must have the same shape")
    if mode == "orthogonal":
        return Z @ procrustes_rotation(Z, reference).T
    if mode == "euclidean":
        zc = Z.mean(axis=0)
        rc = reference.mean(axis=0)
        T = procrustes_rotation(Z - zc, reference - rc)
        return (Z - zc) @ T.T + rc
    raise ValueError(f"unknown Procrustes mode {mode!r}")


def random_orthogonal(d, rng):
    """Haar-distributed orthogonal matrix."""
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def uniform_sphere(n, d, rng):
    return project_to_sphere(rng.standard_normal((n, d)))


def generalized_procrustes(Zs, mode: str = "orthogonal", tol: float = 1e-10, max_iter: int = 200):
    """Align a stack of configurations to their own Procrustes mean.

    Starts from the plain mean of ``Zs`` (shape ``(S, n, d)``) and alternates
    aligning every configuration to the current mean with recomputing that
    mean, until the mean moves less than ``tol``. In orthogonal mode the mean
    rows are projected back onto the sphere. Returns ``(aligned, mean)``.
    """
    Zs = np.asarray(Zs, dtype=float)
    spherical = mode == "orthogonal"
    mean = Zs.mean(axis=0)
    if spherical:
        mean = project_to_sphere(mean)
    aligned = Zs
    for _ in range(max_iter):
        aligned = np.stack([procrustes_align(z, mean, mode) for z in Zs])
        new = aligned.mean(axis=0)
        if spherical:
            new = project_to_sphere(new)
        moved = np.linalg.norm(new - mean)
        mean = new
        if moved < tol:
            return aligned, mean
    raise ConvergenceError("generalized Procrustes did not converge")
