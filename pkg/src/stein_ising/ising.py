"""Core Ising primitives: interactions, spin configurations, observables.

Conventions used across the package:

* a spin configuration is a length-``n`` integer vector with entries in
  ``{-1, +1}``;
* an interaction matrix ``J`` is symmetric with zero diagonal and induces
  the Gibbs law ``pi(x) ~ exp(x.J.x / 2)``;
* the single-site conditional for coordinate ``i`` is
  ``P(x_i = +1 | rest) = (1 + tanh(J_i . x)) / 2``, which does not depend
  on ``x[i]`` itself because the diagonal of ``J`` is zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Interactions are stored densely up to this many sites, sparsely above.
DENSE_SITE_CAP = 4096

__all__ = [
    "DENSE_SITE_CAP",
    "InteractionMatrix",
    "MomentFunction",
    "as_spins",
    "magnetization",
    "hamiltonian",
    "local_field",
    "conditional_prob_plus",
    "conditional_tv",
    "curie_weiss",
    "random_interaction",
    "lattice_round",
    "save_interaction",
    "load_interaction",
]


def as_spins(x, n=None):
    """Validate and return a spin configuration as an int8 array.

    Accepts any array-like with entries in {-1, +1}.  Raises ``ValueError``
    on anything else (wrong length, zeros, non-integers, wrong shape).
    """
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"spin configuration must be 1-d, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected {n} sites, got {arr.shape[0]}")
    out = arr.astype(np.int8, copy=True)
    if not np.array_equal(out, arr) or not np.all(np.abs(out) == 1):
        raise ValueError("spin entries must be exactly -1 or +1")
    return out


def magnetization(x):
    """Average spin ``sum_i x_i / n`` of one configuration (or a batch)."""
    arr = np.asarray(x, dtype=np.float64)
    return arr.mean(axis=-1)


class InteractionMatrix:
    """Symmetric zero-diagonal coupling matrix for a spin system.

    Three storage layouts share one interface:

    * ``uniform`` -- every off-diagonal entry equals one coupling constant
      (complete-graph models); kept implicit so samplers get O(1) updates,
    * dense ndarray (small systems, up to ``DENSE_SITE_CAP`` sites),
    * scipy CSR (graph-derived systems of any size).
    """

    def __init__(self, n, *, dense=None, csr=None, uniform=None):
        if sum(arg is not None for arg in (dense, csr, uniform)) != 1:
            raise ValueError("exactly one of dense/csr/uniform must be given")
        if n < 1:
            raise ValueError("need at least one site")
        self.n = int(n)
        self._dense = dense
        self._csr = csr
        self.uniform_coupling = uniform

    # -- constructors -------------------------------------------------

    @classmethod
    def uniform(cls, n, coupling):
        """All off-diagonal entries equal to ``coupling``."""
        return cls(n, uniform=float(coupling))

    @classmethod
    def from_dense(cls, arr):
        arr = np.array(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"interaction matrix must be square, got {arr.shape}")
        if not np.array_equal(arr, arr.T):
            raise ValueError("interaction matrix must be symmetric")
        if np.any(np.diag(arr) != 0.0):
            raise ValueError("interaction matrix must have zero diagonal")
        return cls(arr.shape[0], dense=arr)

    @classmethod
    def from_sparse(cls, mat):
        mat = sp.csr_matrix(mat, dtype=np.float64)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"interaction matrix must be square, got {mat.shape}")
        if (mat != mat.T).nnz != 0:
            raise ValueError("interaction matrix must be symmetric")
        if np.any(mat.diagonal() != 0.0):
            raise ValueError("interaction matrix must have zero diagonal")
        return cls(mat.shape[0], csr=mat)

    # -- views ---------------------------------------------------------

    def dense(self):
        """Materialize as a dense array (refuses above ``DENSE_SITE_CAP``)."""
        if self._dense is not None:
            return self._dense
        if self.n > DENSE_SITE_CAP:
            raise ValueError(
                f"refusing to densify a {self.n}-site interaction "
                f"(cap is {DENSE_SITE_CAP})"
            )
        if self.uniform_coupling is not None:
            arr = np.full((self.n, self.n), self.uniform_coupling)
            np.fill_diagonal(arr, 0.0)
            return arr
        return self._csr.toarray()

    def csr(self):
        if self._csr is not None:
            return self._csr
        if self.uniform_coupling is not None:
            arr = self.dense()
            return sp.csr_matrix(arr)
        return sp.csr_matrix(self._dense)

    def row(self, i):
        """Dense row ``J_i`` (length ``n``)."""
        if self._dense is not None:
            return self._dense[i]
        if self.uniform_coupling is not None:
            r = np.full(self.n, self.uniform_coupling)
            r[i] = 0.0
            return r
        return self._csr.getrow(i).toarray().ravel()

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.uniform_coupling is not None:
            return self.uniform_coupling * (x.sum() - x)
        if self._dense is not None:
            return self._dense @ x
        return self._csr @ x

    def quad_form(self, x):
        """``x . J . x`` for one configuration or row-wise for a batch."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return float(x @ self.matvec(x))
        if self.uniform_coupling is not None:
            s = x.sum(axis=1)
            return self.uniform_coupling * (s * s - (x * x).sum(axis=1))
        if self._dense is not None:
            return np.einsum("si,ij,sj->s", x, self._dense, x)
        return ((self._csr @ x.T).T * x).sum(axis=1)

    def scaled(self, factor):
        """A new interaction ``factor * J``."""
        if self.uniform_coupling is not None:
            return InteractionMatrix.uniform(self.n, factor * self.uniform_coupling)
        if self._dense is not None:
            return InteractionMatrix(self.n, dense=factor * self._dense)
        return InteractionMatrix(self.n, csr=self._csr * factor)

    def __repr__(self):
        if self.uniform_coupling is not None:
            kind = f"uniform={self.uniform_coupling!r}"
        elif self._dense is not None:
            kind = "dense"
        else:
            kind = f"csr nnz={self._csr.nnz}"
        return f"InteractionMatrix(n={self.n}, {kind})"


def curie_weiss(n, beta):
    """Complete-graph interaction at inverse temperature ``beta``: entries beta/n."""
    if n < 2:
        raise ValueError("Curie-Weiss needs at least two sites")
    return InteractionMatrix.uniform(n, beta / n)


def random_interaction(n, scale, rng):
    """Random symmetric zero-diagonal interaction, entries uniform in [-scale, scale]."""
    upper = np.triu(rng.uniform(-scale, scale, size=(n, n)), k=1)
    return InteractionMatrix.from_dense(upper + upper.T)


def _coerce(J):
    if isinstance(J, InteractionMatrix):
        return J
    if sp.issparse(J):
        return InteractionMatrix.from_sparse(J)
    return InteractionMatrix.from_dense(J)


def hamiltonian(J, x):
    """Energy functional ``H(x) = x . J . x / 2``.

    ``x`` may be a single configuration or a batch with one configuration
    per row; the batch form returns one value per row.
    """
    J = _coerce(J)
    x = np.asarray(x)
    if x.ndim == 1:
        as_spins(x, J.n)
    return 0.5 * J.quad_form(x)


def local_field(J, x, i):
    """Field ``J_i . x`` felt by coordinate ``i``."""
    J = _coerce(J)
    x = as_spins(x, J.n)
    return float(J.row(i) @ x)


def conditional_prob_plus(J, x, i):
    """``P(x_i = +1 | x_j, j != i)`` under the Gibbs law of ``J``.

    Equals ``(1 + tanh(J_i . x)) / 2``; insensitive to the current value
    of ``x[i]``.
    """
    return 0.5 * (1.0 + np.tanh(local_field(J, x, i)))


def conditional_tv(L, M, x, i):
    """Total variation between the site-``i`` conditionals of two Gibbs laws.

    For single-site laws on {-1, +1} the distance reduces to
    ``|tanh(L_i . x) - tanh(M_i . x)| / 2``.
    """
    return 0.5 * abs(
        np.tanh(local_field(L, x, i)) - np.tanh(local_field(M, x, i))
    )


def lattice_round(s, n):
    """Largest point of ``{-1, -1 + 2/n, ..., 1}`` that is <= ``s``.

    This is the magnetization lattice of an ``n``-site system.  ``s`` must
    lie in ``[-1, 1]``.
    """
    if not -1.0 <= s <= 1.0:
        raise ValueError(f"can only round magnetizations in [-1, 1], got {s}")
    t = (s + 1.0) * n / 2.0
    k = int(np.floor(t))
    # guard against values that are a hair under an exact lattice point
    if t - k > 1.0 - 1e-9:
        k += 1
    k = min(k, n)
    return 2.0 * k / n - 1.0


@dataclass(frozen=True)
class MomentFunction:
    """Signed, normalized ``k``-subset spin product observable.

    f(x) = sum_R c_R prod_{i in R} x_i / (2 k #subsets),  c_R in {-1, +1}.

    With all subsets of size ``k`` present this is (1/n)-Lipschitz in
    Hamming distance and has oscillation at most 1; its mean gap between
    two laws is a normalized sum of ``k``-point correlation gaps.
    """

    n: int
    k: int
    subsets: np.ndarray  # (m, k) int32, rows sorted, distinct
    signs: np.ndarray  # (m,) float64 entries +-1
    exhaustive: bool = field(default=True)

    # subset counts above the cap are sampled instead of enumerated
    EXHAUSTIVE_CAP = 100_000
    DEFAULT_SAMPLE = 10_000

    def __post_init__(self):
        if self.k % 2 != 0 or not 2 <= self.k <= self.n:
            raise ValueError("subset size k must be even with 2 <= k <= n")
        if self.subsets.shape[1] != self.k or len(self.signs) != len(self.subsets):
            raise ValueError("subsets/signs shape mismatch")

    @property
    def num_subsets(self):
        return len(self.subsets)

    @property
    def normalization(self):
        return 1.0 / (2.0 * self.k * self.num_subsets)

    @classmethod
    def create(cls, n, k, *, signs="plus", rng=None,
               exhaustive_cap=EXHAUSTIVE_CAP, sample_size=DEFAULT_SAMPLE):
        """Build the observable over all ``k``-subsets, or a sampled family.

        All ``C(n, k)`` subsets are enumerated when that count is at most
        ``exhaustive_cap``; otherwise ``sample_size`` distinct subsets are
        drawn (requires ``rng``).  ``signs`` is ``"plus"``, ``"random"``
        (requires ``rng``), or an explicit +-1 array.
        """
        from math import comb

        total = comb(n, k)
        if total <= exhaustive_cap:
            subsets = np.array(
                list(itertools.combinations(range(n), k)), dtype=np.int32
            )
            exhaustive = True
        else:
            if rng is None:
                raise ValueError("sampled subsets need an rng")
            # Cannot draw more distinct subsets than exist.
            sample_size = min(sample_size, total)
            chosen = set()
            while len(chosen) < sample_size:
                draw = rng.choice(n, size=k, replace=False)
                chosen.add(tuple(sorted(int(v) for v in draw)))
            subsets = np.array(sorted(chosen), dtype=np.int32)
            exhaustive = False

        m = len(subsets)
        if isinstance(signs, str):
            if signs == "plus":
                sign_arr = np.ones(m)
            elif signs == "random":
                if rng is None:
                    raise ValueError("random signs need an rng")
                sign_arr = rng.choice([-1.0, 1.0], size=m)
            else:
                raise ValueError(f"unknown sign spec {signs!r}")
        else:
            sign_arr = np.asarray(signs, dtype=np.float64)
            if not np.all(np.abs(sign_arr) == 1.0):
                raise ValueError("signs must be +-1")
        return cls(n=n, k=k, subsets=subsets, signs=sign_arr, exhaustive=exhaustive)

    def subset_products(self, X):
        """Products ``prod_{i in R} x_i`` for each row of ``X``: (N, m) int8."""
        X = np.asarray(X)
        batch = X.ndim == 2
        if not batch:
            X = X[None, :]
        out = np.ones((X.shape[0], self.num_subsets), dtype=np.int8)
        for j in range(self.k):
            out *= X[:, self.subsets[:, j]]
        return out if batch else out[0]

    def evaluate(self, x):
        """Value of the observable at one configuration."""
        x = as_spins(x, self.n)
        prods = self.subset_products(x).astype(np.float64)
        return float(self.signs @ prods) * self.normalization

    def evaluate_batch(self, X, chunk=4096):
        """Observable values for a batch of configurations, chunked over subsets."""
        X = np.asarray(X)
        acc = np.zeros(X.shape[0])
        for lo in range(0, self.num_subsets, chunk):
            hi = min(lo + chunk, self.num_subsets)
            part = np.ones((X.shape[0], hi - lo), dtype=np.int8)
            for j in range(self.k):
                part *= X[:, self.subsets[lo:hi, j]]
            acc += part @ self.signs[lo:hi]
        return acc * self.normalization


# -- plain-text serialization -----------------------------------------------

def save_interaction(J, path):
    """Write an interaction to a text file: ``n`` header, then upper-triangle
    nonzeros as ``i j value`` with 17 significant digits."""
    J = _coerce(J)
    mat = sp.coo_matrix(sp.triu(J.csr(), k=1))
    with open(path, "w") as fh:
        fh.write(f"{J.n}\n")
        order = np.lexsort((mat.col, mat.row))
        for idx in order:
            fh.write(f"{mat.row[idx]} {mat.col[idx]} {mat.data[idx]:.17g}\n")


def load_interaction(path):
    """Inverse of :func:`save_interaction`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 1:
            raise ValueError("interaction file must start with a lone site count")
        n = int(header[0])
        rows, cols, vals = [], [], []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            i_s, j_s, v_s = line.split()
            i, j, v = int(i_s), int(j_s), float(v_s)
            if not 0 <= i < j < n:
                raise ValueError(f"bad entry indices on line {line_no}: {line!r}")
            rows.append(i)
            cols.append(j)
            vals.append(v)
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    full = sp.csr_matrix(upper + upper.T)
    if n <= DENSE_SITE_CAP:
        return InteractionMatrix.from_dense(full.toarray())
    return InteractionMatrix.from_sparse(full)
