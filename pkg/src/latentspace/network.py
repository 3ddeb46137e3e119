"""Undirected binary networks: loading, validation and graph statistics."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path


class NetworkError(ValueError):
    """Raised for malformed or degenerate network input."""


@dataclass(frozen=True)
class Network:
    """Symmetric 0/1 adjacency matrix with zero diagonal and node labels.

    ``meta`` carries bookkeeping such as the original labels of nodes that
    were dropped by :func:`drop_isolated`.
    """

    adjacency: np.ndarray
    labels: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.asarray(self.adjacency)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NetworkError("adjacency must be a square matrix")
        if not np.all((A == 0) | (A == 1)):
            raise NetworkError("non-binary entry in adjacency")
        if not np.array_equal(A, A.T):
            raise NetworkError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise NetworkError("self-loops are not allowed")
        A = A.astype(np.int8)
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        labels = tuple(self.labels) if len(self.labels) else tuple(str(i) for i in range(A.shape[0]))
        if len(labels) != A.shape[0]:
            raise NetworkError("number of labels does not match adjacency size")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum() // 2)

    @property
    def n_dyads(self) -> int:
        return self.n * (self.n - 1) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def density(self) -> float:
        return self.n_edges / self.n_dyads if self.n > 1 else 0.0

    def dyads(self):
        """Upper-triangle index arrays ``(rows, cols)`` in row-major order."""
        return np.triu_indices(self.n, k=1)

    def dyad_values(self) -> np.ndarray:
        return self.adjacency[self.dyads()]


def from_edges(edges, n=None, labels=None) -> Network:
    edges = np.asarray(list(edges), dtype=int).reshape(-1, 2)
    if n is None:
        n = len(labels) if labels is not None else (int(edges.max()) + 1 if len(edges) else 0)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise NetworkError("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise NetworkError("self-loops are not allowed")
    A = np.zeros((n, n), dtype=np.int8)
    A[edges[:, 0], edges[:, 1]] = 1
    A[edges[:, 1], edges[:, 0]] = 1
    return Network(A, tuple(labels) if labels is not None else ())


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                            and os.path.exists(source)):
        with open(source) as fh:
            return fh.read()
    return str(source)


def load_network(source, fmt: str = "auto", n: int | None = None, labels=None) -> Network:
    """Read a network from a path, file object or literal text.

    ``fmt`` is ``"edgelist"`` (one 0-based ``i j`` pair per line),
    ``"dense"`` (whitespace or comma separated 0/1 rows) or ``"auto"``,
    which picks dense when the first row has more than two entries.
    Lines starting with ``#`` are ignored. Duplicate edges collapse.
    """
    text = _read_text(source)
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.replace(",", " ").split())
    if fmt == "auto":
        # two columns read as an edge list; pass fmt="dense" for 2x2 matrices
        fmt = "dense" if rows and len(rows[0]) != 2 else "edgelist"
    try:
        if fmt == "dense":
            if any(len(r) != len(rows) for r in rows):
                raise NetworkError("dense matrix is not square")
            A = np.array(rows, dtype=float).reshape(len(rows), len(rows))
            if not np.all((A == 0) | (A == 1)):
                raise NetworkError("non-binary entry in dense matrix")
            return Network(A.astype(np.int8), tuple(labels) if labels is not None else ())
        if fmt == "edgelist":
            if any(len(r) != 2 for r in rows):
                raise NetworkError("edge list lines must contain exactly two node indices")
            edges = [(int(a), int(b)) for a, b in rows]
            return from_edges(edges, n=n, labels=labels)
    except ValueError as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"could not parse network input: {exc}") from exc
    raise NetworkError(f"unknown format {fmt!r}")


def write_edgelist(net: Network, path) -> None:
    r, c = net.dyads()
    y = net.dyad_values()
    with open(path, "w") as fh:
        for i, j in zip(r[y == 1], c[y == 1]):
            fh.write(f"{i} {j}\n")


def drop_isolated(net: Network) -> Network:
    """Remove degree-zero nodes; dropped labels are kept in ``meta``."""
    keep = np.flatnonzero(net.degrees() > 0)
    if keep.size == 0:
        raise NetworkError("empty network after removing isolated nodes")
    if keep.size == net.n:
        return net
    A = net.adjacency[np.ix_(keep, keep)]
    dropped = [net.labels[i] for i in range(net.n) if i not in set(keep)]
    meta = dict(net.meta)
    meta["dropped"] = list(meta.get("dropped", [])) + dropped
    meta["original_index"] = [int(i) for i in keep]
    return Network(A, tuple(net.labels[i] for i in keep), meta)


# Padgett's marriage ties among 16 Florentine families; Pucci has none.
FLORENTINE_FAMILIES = (
    "Acciaiuoli", "Albizzi", "Barbadori", "Bischeri", "Castellani", "Ginori",
    "Guadagni", "Lamberteschi", "Medici", "Pazzi", "Peruzzi", "Pucci",
    "Ridolfi", "Salviati", "Strozzi", "Tornabuoni",
)
_FLORENTINE_EDGES = """\
0 8
1 5
1 6
1 8
2 4
2 8
3 6
3 10
3 14
4 10
4 14
6 7
6 15
8 12
8 13
8 15
9 13
10 14
12 14
12 15
"""


def florentine(drop_isolates: bool = True) -> Network:
    """The Florentine marriage network (15 families once Pucci is dropped)."""
    net = load_network(io.StringIO(_FLORENTINE_EDGES), fmt="edgelist", n=16, labels=FLORENTINE_FAMILIES)
    return drop_isolated(net) if drop_isolates else net


# ---------------------------------------------------------------------------
# statistics


def triad_census(A: np.ndarray) -> np.ndarray:
    """Counts of node triples spanning 0, 1, 2 and 3 edges."""
    A = np.asarray(A, dtype=np.int64)
    n = A.shape[0]
    deg = A.sum(axis=1)
    common = A @ A
    t3 = int(np.trace(common @ A)) // 6
    t2 = int((deg * (deg - 1) // 2).sum()) - 3 * t3
    i, j = np.nonzero(np.triu(A, 1))
    # third nodes adjacent to neither endpoint of each edge
    t1 = int((n - 2 - (deg[i] - 1) - (deg[j] - 1) + common[i, j]).sum())
    t0 = comb(n, 3) - t1 - t2 - t3
    return np.array([t0, t1, t2, t3], dtype=np.int64)


def shared_partner_counts(A: np.ndarray) -> np.ndarray:
    """Number of common neighbours of every dyad ``i < j``."""
    A = np.asarray(A, dtype=np.int64)
    return (A @ A)[np.triu_indices(A.shape[0], k=1)]


def shared_partner_distribution(A: np.ndarray) -> np.ndarray:
    """Histogram over dyads of the number of shared partners (length ``n - 1``)."""
    n = np.asarray(A).shape[0]
    return np.bincount(shared_partner_counts(A), minlength=max(n - 1, 1))


def largest_component(A: np.ndarray) -> np.ndarray:
    """Node indices of the largest connected component (lowest label on ties)."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return np.arange(0)
    _, lab = connected_components(csr_matrix(A), directed=False)
    sizes = np.bincount(lab)
    return np.flatnonzero(lab == int(np.argmax(sizes)))


def geodesic_distances(A: np.ndarray, component: bool = True) -> np.ndarray:
    """BFS path lengths over dyads ``i < j`` (restricted to the largest component)."""
    A = np.asarray(A)
    if component:
        keep = largest_component(A)
        A = A[np.ix_(keep, keep)]
    D = shortest_path(csr_matrix(A), method="D", directed=False, unweighted=True)
    return D[np.triu_indices(A.shape[0], k=1)]


def geodesic_distribution(A: np.ndarray) -> np.ndarray:
    """Histogram of finite geodesic lengths 1, 2, ...; entry ``k-1`` counts length ``k``."""
    d = geodesic_distances(A)
    d = d[np.isfinite(d)].astype(int)
    if d.size == 0:
        return np.zeros(0, dtype=int)
    return np.bincount(d, minlength=int(d.max()) + 1)[1:]


def modularity(A: np.ndarray, communities) -> float:
    """Newman modularity of a partition given as a label array or a list of node groups."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if len(communities) == n and not hasattr(communities[0], "__len__"):
        labels = np.asarray(communities)
    else:
        labels = np.empty(n, dtype=int)
        for c, group in enumerate(communities):
            labels[list(group)] = c
    two_m = A.sum()
    if two_m == 0:
        raise NetworkError("modularity undefined for a graph without edges")
    deg = A.sum(axis=1)
    q = 0.0
    for c in np.unique(labels):
        idx = labels == c
        q += A[np.ix_(idx, idx)].sum() / two_m - (deg[idx].sum() / two_m) ** 2
    return float(q)


def greedy_modularity(A: np.ndarray):
    """Clauset-Newman-Moore agglomeration.

    Starts from singletons and repeatedly merges the pair of adjacent
    communities with the largest modularity gain, stopping once every gain
    is negative. Ties go to the lexicographically smallest community pair.
    Returns ``(labels, modularity)`` with labels numbered by first node.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    two_m = A.sum()
    if two_m == 0:
        raise NetworkError("modularity undefined for a graph without edges")
    E = A / two_m
    a = E.sum(axis=1)
    members = {i: [i] for i in range(n)}
    q = float(np.trace(E) - (a ** 2).sum())
    while len(members) > 1:
        alive = sorted(members)
        idx = np.array(alive)
        sub = E[np.ix_(idx, idx)]
        gain = 2.0 * (sub - np.outer(a[idx], a[idx]))
        iu = np.triu_indices(len(idx), k=1)
        linked = sub[iu] > 0
        if not np.any(linked):
            break
        g = np.where(linked, gain[iu], -np.inf)
        best = g.max()
        if best < 0:
            break
        k = int(np.flatnonzero(g >= best - 1e-14)[0])
        i, j = idx[iu[0][k]], idx[iu[1][k]]
        E[i, :] += E[j, :]
        E[:, i] += E[:, j]
        E[j, :] = 0.0
        E[:, j] = 0.0
        a[i] += a[j]
        a[j] = 0.0
        members[i].extend(members.pop(j))
        q += best
    labels = np.empty(n, dtype=int)
    for c, key in enumerate(sorted(members, key=lambda k: min(members[k]))):
        labels[members[key]] = c
    return labels, modularity(A, labels)


def graph_statistics(net_or_adjacency) -> dict:
    """Deterministic summary statistics used by predictive checks."""
    A = net_or_adjacency.adjacency if isinstance(net_or_adjacency, Network) else np.asarray(net_or_adjacency)
    deg = A.sum(axis=1)
    stats = {
        "degrees": deg.astype(int),
        "geodesic_distribution": geodesic_distribution(A),
        "shared_partner_distribution": shared_partner_distribution(A),
        "triad_census": triad_census(A),
    }
    if A.sum() > 0:
        labels, q = greedy_modularity(A)
        stats["communities"] = labels
        stats["modularity"] = q
    else:
        stats["communities"] = np.arange(A.shape[0])
        stats["modularity"] = float("nan")
    return stats
