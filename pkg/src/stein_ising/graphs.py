"""Regular-graph constructions, spectral reports, and graph-derived couplings.

The comparison pipeline contrasts the complete-graph (Curie-Weiss) coupling
``beta/n`` with a ``d``-regular coupling ``beta/d``.  The quality of a
``d``-regular graph as a stand-in for the complete graph is measured by
``epsilon = max_{i >= 2} |lambda_i| / d`` over its adjacency spectrum, and
the whole comparison rests on the operator-norm deviation between the two
couplings, which is at most ``beta * (epsilon + 1/n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .ising import DENSE_SITE_CAP, InteractionMatrix

__all__ = [
    "SimpleGraph",
    "SpectralReport",
    "complete_graph",
    "random_regular",
    "disjoint_cliques",
    "spectral_report",
    "interaction_from_graph",
    "spectral_deviation",
    "operator_norm",
    "abs_operator_norm",
    "save_graph",
    "load_graph",
]


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected simple graph with a known regular degree.

    ``edges`` is an (m, 2) int array, each row ``i < j``, rows sorted
    lexicographically — a canonical form, so equal graphs compare equal.
    """

    n: int
    edges: np.ndarray
    degree: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (
            edges.min() < 0 or edges.max() >= self.n or np.any(edges[:, 0] >= edges[:, 1])
        ):
            raise ValueError("edges must satisfy 0 <= i < j < n")
        canon = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        if len(np.unique(canon, axis=0)) != len(canon):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", canon)
        degs = np.zeros(self.n, dtype=np.int64)
        for col in (0, 1):
            np.add.at(degs, canon[:, col], 1)
        if self.n and not np.all(degs == self.degree):
            raise ValueError("graph is not regular with the declared degree")

    @property
    def num_edges(self):
        return len(self.edges)

    def adjacency(self, sparse=True):
        """0/1 adjacency matrix (CSR by default)."""
        ones = np.ones(2 * self.num_edges)
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        adj = sp.csr_matrix((ones, (rows, cols)), shape=(self.n, self.n))
        return adj if sparse else adj.toarray()

    def is_connected(self):
        if self.n <= 1:
            return True
        ncomp, _ = connected_components(self.adjacency(), directed=False)
        return ncomp == 1


def complete_graph(n):
    """The complete graph on ``n`` vertices."""
    if n < 2:
        raise ValueError("complete graph needs at least 2 vertices")
    idx = np.triu_indices(n, k=1)
    return SimpleGraph(n=n, edges=np.column_stack(idx), degree=n - 1)


def disjoint_cliques(n, clique_size):
    """Disjoint union of ``n / clique_size`` complete graphs.

    A (clique_size - 1)-regular graph whose adjacency spectrum has second
    eigenvalue equal to its degree, i.e. epsilon = 1: the anti-expander
    used as the counterexample model.
    """
    if n % clique_size != 0:
        raise ValueError(f"{clique_size} does not divide {n}")
    if clique_size < 2:
        raise ValueError("cliques need at least 2 vertices")
    blocks = []
    for start in range(0, n, clique_size):
        i, j = np.triu_indices(clique_size, k=1)
        blocks.append(np.column_stack((i + start, j + start)))
    return SimpleGraph(n=n, edges=np.vstack(blocks), degree=clique_size - 1)


def _pairing_attempt(n, d, rng):
    """One configuration-model attempt; returns an edge set or None.

    Shuffles the stub multiset and keeps collision-free pairs; collided
    stubs are re-queued and re-shuffled until none remain or no suitable
    pair can exist.
    """
    edges = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover = {}
        for s1, s2 in zip(stubs[::2], stubs[1::2]):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((int(s1), int(s2)))
            else:
                leftover[int(s1)] = leftover.get(int(s1), 0) + 1
                leftover[int(s2)] = leftover.get(int(s2), 0) + 1
        if not leftover:
            break
        # feasibility: some pair of distinct leftover nodes must be non-adjacent
        nodes = sorted(leftover)
        ok = False
        for a in nodes:
            for b in nodes:
                if a >= b:
                    continue
                if (a, b) not in edges:
                    ok = True
                    break
            if ok:
                break
        if not ok:
            return None
        stubs = np.array(
            [node for node, count in leftover.items() for _ in range(count)],
            dtype=np.int64,
        )
    return edges


def random_regular(n, d, seed, restart_budget=10_000):
    """Random ``d``-regular simple graph on ``n`` vertices (pairing model).

    Deterministic for a given ``seed``.  Each attempt pairs the ``n * d``
    stubs uniformly and repairs collisions by re-pairing the collided
    stubs; an attempt that gets stuck restarts from scratch, up to
    ``restart_budget`` restarts.

    Raises ``ValueError`` for infeasible (n, d) — in particular when
    ``n * d`` is odd — and ``RuntimeError`` if the budget is exhausted.
    """
    if not 0 <= d < n:
        raise ValueError(f"degree must satisfy 0 <= d < n, got d={d}, n={n}")
    if (n * d) % 2 != 0:
        raise ValueError(f"n * d must be even to build a {d}-regular graph on {n} vertices")
    if d == 0:
        return SimpleGraph(n=n, edges=np.empty((0, 2), dtype=np.int64), degree=0)
    rng = np.random.default_rng(seed)
    for _ in range(restart_budget):
        edges = _pairing_attempt(n, d, rng)
        if edges is not None:
            return SimpleGraph(
                n=n, edges=np.array(sorted(edges), dtype=np.int64), degree=d
            )
    raise RuntimeError(
        f"random_regular(n={n}, d={d}): restart budget {restart_budget} exhausted"
    )


@dataclass(frozen=True)
class SpectralReport:
    """Adjacency spectrum summary of a regular graph.

    ``epsilon`` is ``max_{i >= 2} |lambda_i| / d``: small for good
    expanders, exactly 1 for disconnected regular graphs.
    """

    n: int
    degree: int
    epsilon: float
    second_max_abs: float
    is_connected: bool
    method: str
    eigenvalues: np.ndarray | None = None


def spectral_report(graph, dense_cap=DENSE_SITE_CAP, tol=1e-8, max_iter=50_000):
    """Spectral expansion report for a regular graph.

    Uses a full symmetric eigensolve up to ``dense_cap`` vertices; above
    that, power iteration on the adjacency operator deflated by the
    all-ones eigenvector (applied twice per step so that +-lambda pairs
    cannot stall it), iterated to residual ``tol``.
    """
    d = graph.degree
    if d == 0:
        raise ValueError("spectral report needs a positive degree")
    connected = graph.is_connected()
    if graph.n <= dense_cap:
        eigenvalues = np.linalg.eigvalsh(graph.adjacency(sparse=False))[::-1]
        second = float(max(abs(eigenvalues[1]), abs(eigenvalues[-1])))
        return SpectralReport(
            n=graph.n, degree=d, epsilon=second / d, second_max_abs=second,
            is_connected=connected, method="dense", eigenvalues=eigenvalues,
        )

    adj = graph.adjacency()
    n = graph.n
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)

    def deflated(u):
        return adj @ u - (d / n) * u.sum()

    v -= v.mean()
    v /= np.linalg.norm(v)
    lam_sq = 0.0
    for _ in range(max_iter):
        w = deflated(deflated(v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        w /= norm
        lam_sq = float(w @ deflated(deflated(w)))
        if np.linalg.norm(deflated(deflated(w)) - lam_sq * w) <= tol * max(1.0, lam_sq):
            v = w
            break
        v = w
    second = float(np.sqrt(max(lam_sq, 0.0)))
    return SpectralReport(
        n=n, degree=d, epsilon=second / d, second_max_abs=second,
        is_connected=connected, method="power", eigenvalues=None,
    )


def interaction_from_graph(graph, beta, scale="per-d"):
    """Gibbs coupling from a regular graph.

    ``scale="per-n"`` puts ``beta / n`` on every edge (the complete graph
    then gives the Curie-Weiss model); ``scale="per-d"`` puts
    ``beta / degree`` on every edge.
    """
    if scale == "per-n":
        weight = beta / graph.n
    elif scale == "per-d":
        if graph.degree == 0:
            raise ValueError("per-d scaling needs a positive degree")
        weight = beta / graph.degree
    else:
        raise ValueError(f"unknown scale {scale!r} (use 'per-n' or 'per-d')")
    if graph.num_edges == graph.n * (graph.n - 1) // 2:
        return InteractionMatrix.uniform(graph.n, weight)
    return InteractionMatrix.from_sparse(graph.adjacency() * weight)


def operator_norm(mat, tol=1e-10, max_iter=100_000):
    """Spectral norm of a symmetric matrix (dense solve up to the site cap)."""
    if isinstance(mat, InteractionMatrix):
        mat = mat.dense() if mat.n <= DENSE_SITE_CAP else mat.csr()
    if not sp.issparse(mat):
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape[0] <= DENSE_SITE_CAP:
            return float(np.max(np.abs(np.linalg.eigvalsh(mat))))
        mat = sp.csr_matrix(mat)
    n = mat.shape[0]
    rng = np.random.default_rng(2718)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_sq = 0.0
    for _ in range(max_iter):
        w = mat @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        w /= norm
        lam_sq = float(w @ (mat @ (mat @ w)))
        if np.linalg.norm(mat @ (mat @ w) - lam_sq * w) <= tol * max(1.0, lam_sq):
            return float(np.sqrt(max(lam_sq, 0.0)))
        v = w
    return float(np.sqrt(max(lam_sq, 0.0)))


def abs_operator_norm(J):
    """Spectral norm of the entrywise absolute interaction, ``|| |J| ||_2``."""
    if isinstance(J, InteractionMatrix):
        if J.uniform_coupling is not None:
            return abs(J.uniform_coupling) * (J.n - 1)
        mat = J.dense() if J.n <= DENSE_SITE_CAP else J.csr()
    else:
        mat = J
    if sp.issparse(mat):
        return operator_norm(abs(mat))
    return operator_norm(np.abs(np.asarray(mat, dtype=np.float64)))


def spectral_deviation(J1, J2):
    """Operator-norm distance ``||J1 - J2||_2`` between two couplings."""
    if J1.n != J2.n:
        raise ValueError("couplings live on different site counts")
    if J1.n <= DENSE_SITE_CAP:
        return operator_norm(J1.dense() - J2.dense())
    return operator_norm(J1.csr() - J2.csr())


# -- plain-text serialization -----------------------------------------------

def save_graph(graph, path):
    """Write ``n d`` header plus one ``i j`` line per edge (0-indexed, i < j)."""
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.degree}\n")
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")


def load_graph(path):
    """Inverse of :func:`save_graph`; validates regularity on load."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("graph file must start with 'n d'")
        n, d = int(header[0]), int(header[1])
        edges = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            i_s, j_s = line.split()
            edges.append((int(i_s), int(j_s)))
    arr = np.array(edges, dtype=np.int64) if edges else np.empty((0, 2), dtype=np.int64)
    return SimpleGraph(n=n, edges=arr, degree=d)
