"""Monte Carlo engine: samplers, couplings, and sampled estimators.

This module scales the model family past exact enumeration: plain and
restricted (censored) Glauber chains up to ~10^4 sites, shared-randomness
couplings with order tracking, the low-temperature contraction constants
for the complete-graph model, a birth-death comparison chain for the
magnetization's escape band, and batch-mean estimators for moments, the
symmetric KL divergence, and the magnetization law.

Randomness policy: every chain, pair, and trial shard owns a named stream
derived from one master seed via :func:`rng_stream`, so results are
reproducible bit-for-bit regardless of worker count.
"""

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels as kern
from .ising import InteractionMatrix, MomentFunction, as_spins, lattice_round
from .reporting import CheckRecord

_EMPTY_IDX = np.empty(0, dtype=np.int64)
_EMPTY_WTS = np.empty(0, dtype=np.float64)


def rng_stream(master_seed, *names):
    """Independent named generator derived from one master seed.

    Each name is hashed (sha256) to four 32-bit words appended to the
    seed sequence's spawn key, so the stream depends only on
    ``(master_seed, names)`` -- never on thread scheduling or call order.
    """
    words = []
    for name in names:
        digest = hashlib.sha256(str(name).encode("utf-8")).digest()
        words.extend(
            int.from_bytes(digest[off:off + 4], "little") for off in range(0, 16, 4)
        )
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(words))
    return np.random.default_rng(seq)


def default_burn_in(n):
    """Default burn-in: 20 n ceil(log n) single-site updates."""
    return 20 * n * max(1, math.ceil(math.log(n)))


def _sampler_arrays(J):
    """(is_uniform, coupling, indptr, indices, weights) for the kernels."""
    cached = getattr(J, "_sampler_arrays", None)
    if cached is not None:
        return cached
    if J.uniform_coupling is not None:
        arrays = (True, float(J.uniform_coupling), _EMPTY_IDX, _EMPTY_IDX, _EMPTY_WTS)
    else:
        mat = J.csr()
        arrays = (
            False,
            0.0,
            np.ascontiguousarray(mat.indptr, dtype=np.int64),
            np.ascontiguousarray(mat.indices, dtype=np.int64),
            np.ascontiguousarray(mat.data, dtype=np.float64),
        )
    J._sampler_arrays = arrays
    return arrays


def _is_ferromagnetic(J):
    if J.uniform_coupling is not None:
        return J.uniform_coupling >= 0.0
    if J._dense is not None:
        return bool(np.all(J._dense >= 0.0))
    return bool(np.all(J.csr().data >= 0.0))


def _initial_spins(n, init, rng, restricted):
    if isinstance(init, str):
        if init == "plus":
            spins = np.ones(n, dtype=np.int8)
        elif init == "random":
            spins = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
        else:
            raise ValueError(f"unknown initial state {init!r}")
    else:
        spins = as_spins(init, n).copy()
    if restricted and spins.sum() < 0:
        spins = -spins  # the global flip embeds any state into the half-space
    return np.ascontiguousarray(spins)


# -- chains -------------------------------------------------------------------

@dataclass
class ChainState:
    """One Glauber chain: spin configuration, update counter, own stream."""

    spins: np.ndarray
    step: int
    rng: np.random.Generator

    @property
    def spin_sum(self):
        return int(self.spins.sum())

    @property
    def magnetization(self):
        return self.spin_sum / len(self.spins)

    def copy(self):
        """Copy the configuration; the stream object is shared."""
        return ChainState(self.spins.copy(), self.step, self.rng)


def new_chain(n, master_seed, *, name="chain", init="random", restricted=False):
    """Fresh chain with its own named stream and a validated start state."""
    rng = rng_stream(master_seed, name)
    spins = _initial_spins(n, init, rng, restricted)
    return ChainState(spins=spins, step=0, rng=rng)


def glauber_run(J, state, steps):
    """Advance a plain heat-bath chain by ``steps`` single-site updates."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    arrays = _sampler_arrays(J)
    kern.advance(state.spins, state.spin_sum, steps, False, *arrays, state.rng)
    state.step += steps
    return state


def restricted_run(J, state, steps):
    """Advance the censored chain: plain update, then global flip out of Σx < 0."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if state.spin_sum < 0:
        raise ValueError("restricted chain must start in the Σ spins >= 0 half-space")
    arrays = _sampler_arrays(J)
    kern.advance(state.spins, state.spin_sum, steps, True, *arrays, state.rng)
    state.step += steps
    return state


# -- couplings ----------------------------------------------------------------

@dataclass
class CoupledPair:
    """Two chains driven by one shared (site, uniform) stream.

    ``monotone`` mode is the plain order-preserving coupling;
    ``composite`` mode additionally tracks ``tau1``, the first update at
    which the y-chain's magnetization hits the profile's lower lattice
    target, after which the shared randomness simply runs until collision.
    """

    x: ChainState
    y: ChainState
    mode: str
    rng: np.random.Generator
    restricted: bool = False
    tau1: Optional[int] = None
    coalesced_at: Optional[int] = None

    @property
    def coalesced(self):
        return self.coalesced_at is not None


def new_pair(n, master_seed, *, name="pair", mode="monotone",
             x0="plus", y0=None, restricted=False):
    """Coupled pair with one shared stream; default starts are adjacent.

    With ``y0`` omitted the pair starts at ``x0`` and its copy with site 0
    forced down -- the canonical adjacent-start configuration.
    """
    if mode not in ("monotone", "composite"):
        raise ValueError(f"unknown coupling mode {mode!r}")
    rng = rng_stream(master_seed, name)
    x_spins = _initial_spins(n, x0, rng, restricted)
    if y0 is None:
        x_spins[0] = 1
        y_spins = x_spins.copy()
        y_spins[0] = -1
    else:
        y_spins = _initial_spins(n, y0, rng, restricted)
    if restricted and (x_spins.sum() < 0 or y_spins.sum() < 0):
        raise ValueError("restricted pair must start in the Σ spins >= 0 half-space")
    x = ChainState(spins=x_spins, step=0, rng=rng)
    y = ChainState(spins=y_spins, step=0, rng=rng)
    return CoupledPair(x=x, y=y, mode=mode, rng=rng, restricted=restricted)


def coupled_run(J, pair, steps, *, profile=None, check_every=None,
                stop_on_coalesce=False, debug=False):
    """Advance both chains of ``pair`` under the shared threshold rule.

    Every update draws one site index and one uniform; each chain takes
    spin +1 iff the uniform falls below its own heat-bath probability.
    For ferromagnetic couplings this preserves entrywise order, which is
    asserted per update when ``debug`` is set (order tracking stops at a
    global flip, which lawfully breaks it).  Coalescence is detected by a
    full equality check every ``check_every`` updates (default: n).
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    n = len(pair.x.spins)
    if pair.mode == "composite":
        if profile is None:
            raise ValueError("composite mode needs a contraction profile")
        if not _is_ferromagnetic(J):
            raise ValueError("composite mode requires a ferromagnetic interaction")
        s1_sum = profile.s1_lattice_sum(n)
    else:
        s1_sum = -(n + 2)  # unreachable spin sum: tau1 tracking disabled
    arrays = _sampler_arrays(J)
    if check_every is None:
        check_every = n
    ordered = bool(np.all(pair.x.spins >= pair.y.spins))
    track_order = bool(debug and ordered and _is_ferromagnetic(J))
    start = pair.x.step
    tau1_in = -1 if pair.tau1 is None else 0
    sx, sy, coal, tau1, violation, done = kern.coupled_run(
        pair.x.spins, pair.y.spins, pair.x.spin_sum, pair.y.spin_sum,
        steps, pair.restricted, *arrays, pair.rng,
        check_every, stop_on_coalesce, track_order, s1_sum, tau1_in,
    )
    pair.x.step += done
    pair.y.step += done
    if pair.tau1 is None and tau1 >= 0:
        pair.tau1 = start + int(tau1)
    if pair.coalesced_at is None and coal >= 0:
        pair.coalesced_at = start + int(coal)
    if violation >= 0:
        raise RuntimeError(
            f"monotone coupling lost entrywise order at update {start + int(violation)}"
        )
    return pair


def coalescence_times(n, beta, pairs, *, seed=0, restricted=True,
                      max_steps=None, check_every=None, jobs=1):
    """Coalescence times of adjacent-start coupled complete-graph chains.

    Returns one time per pair (single-site updates, granularity
    ``check_every``); -1 marks pairs still apart at ``max_steps``.  Each
    pair owns stream ``(seed, "coalescence", index)``, so results do not
    depend on ``jobs``.
    """
    if max_steps is None:
        max_steps = 500 * n * max(1, math.ceil(math.log(n)))
    if check_every is None:
        check_every = n
    coupling = beta / n
    times = np.full(pairs, -1, dtype=np.int64)

    def run_one(index):
        gen = rng_stream(seed, "coalescence", index)
        x = np.ones(n, dtype=np.int8)
        y = np.ones(n, dtype=np.int8)
        y[0] = -1
        result = kern.coupled_run(
            x, y, n, n - 2, max_steps, restricted,
            True, coupling, _EMPTY_IDX, _EMPTY_IDX, _EMPTY_WTS, gen,
            check_every, True, False, -(n + 2), -1,
        )
        times[index] = result[2]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_one, range(pairs)))
    else:
        for index in range(pairs):
            run_one(index)
    return times


# -- low-temperature contraction constants -------------------------------------

@dataclass(frozen=True)
class ContractionProfile:
    """Drift constants of s -> tanh(beta s) - s for one beta > 1.

    ``m_star`` is the positive fixed point, ``gamma_star`` the negative
    of the drift slope there, and ``s1 < s2 < m_star`` are the points
    where the slope equals -0.6 and -0.8 times ``gamma_star`` -- the
    fixed, reproducible choices for the coupling's magnetization bands.
    """

    beta: float
    m_star: float
    gamma_star: float
    s1: float
    s2: float

    def drift(self, s):
        return math.tanh(self.beta * s) - s

    def drift_slope(self, s):
        return self.beta * (1.0 - math.tanh(self.beta * s) ** 2) - 1.0

    def rho(self, n):
        """Per-update contraction factor for the stopped coupled gap."""
        if n < 2:
            raise ValueError("need at least two sites")
        return 1.0 - self.gamma_star * (n - 1) / (2.0 * n * n)

    def s1_lattice(self, n):
        return lattice_round(self.s1, n)

    def s2_lattice(self, n):
        return lattice_round(self.s2, n)

    def s1_lattice_sum(self, n):
        return int(round(self.s1_lattice(n) * n))

    def s2_lattice_sum(self, n):
        return int(round(self.s2_lattice(n) * n))


def contraction_profile(beta):
    """Solve for the drift constants at ``beta > 1``.

    The fixed point comes from root-finding tanh(beta s) = s on
    [1e-6, 1] to 1e-12; the band points invert the slope targets on
    (0, m*), where the slope is strictly decreasing.
    """
    if beta <= 1.0:
        raise ValueError("the drift has no positive fixed point at beta <= 1")
    m_star = float(
        brentq(lambda s: math.tanh(beta * s) - s, 1e-6, 1.0, xtol=1e-14, maxiter=200)
    )
    gamma_star = 1.0 - beta * (1.0 - m_star * m_star)

    def slope(s):
        return beta * (1.0 - math.tanh(beta * s) ** 2) - 1.0

    s1 = float(brentq(lambda s: slope(s) + 0.6 * gamma_star, 1e-12, m_star, xtol=1e-14))
    s2 = float(brentq(lambda s: slope(s) + 0.8 * gamma_star, 1e-12, m_star, xtol=1e-14))
    profile = ContractionProfile(
        beta=float(beta), m_star=m_star, gamma_star=gamma_star, s1=s1, s2=s2
    )
    if abs(math.tanh(beta * m_star) - m_star) > 1e-12:
        raise RuntimeError("fixed point did not converge to 1e-12")
    if not (gamma_star > 0.0 and s1 < s2 < m_star):
        raise RuntimeError("contraction constants violate their ordering")
    if not (profile.drift_slope(s2) < profile.drift_slope(s1) < -gamma_star / 2.0):
        raise RuntimeError("band slopes violate their ordering")
    return profile


@dataclass
class ContractionReport:
    """Monte Carlo record of the stopped coupled-gap contraction check."""

    n: int
    beta: float
    trials: int
    rho: float
    checkpoints: np.ndarray
    means: np.ndarray
    ses: np.ndarray
    envelopes: np.ndarray
    records: list
    tau1: np.ndarray
    coalesced: np.ndarray

    @property
    def holds(self):
        return all(record.passed for record in self.records)

    def tau1_fraction(self, limit):
        """Fraction of trials whose y-chain hit the lower band before ``limit``."""
        return float(np.mean((self.tau1 >= 0) & (self.tau1 < limit)))

    def coalesced_fraction(self, limit=None):
        hit = self.coalesced >= 0
        if limit is not None:
            hit &= self.coalesced <= limit
        return float(np.mean(hit))


def contraction_check(J, profile, trials, *, seed=0, checkpoints=None,
                      jobs=1, shards=64):
    """Verify the stopped magnetization-gap supermartingale bound by Monte Carlo.

    Couples restricted complete-graph chains from adjacent all-plus starts
    (site 0 forced to +-1) and checks, at each checkpoint ``t``, that the
    trial mean of ``(m(X_t) - m(Y_t)) * 1[t <= tau1]`` stays below
    ``(2/n) rho(n)^t`` plus three standard errors.  Work is split into
    seed-stable shards, so the result is independent of ``jobs``.
    """
    n = J.n
    if J.uniform_coupling is None or J.uniform_coupling <= 0.0:
        raise ValueError("the contraction check is for complete-graph interactions")
    beta = J.uniform_coupling * n
    if abs(beta - profile.beta) > 1e-9:
        raise ValueError(
            f"profile is for beta={profile.beta}, interaction has beta={beta}"
        )
    if checkpoints is None:
        checkpoints = np.array([n, 5 * n, 25 * n], dtype=np.int64)
    else:
        checkpoints = np.asarray(checkpoints, dtype=np.int64)
        if np.any(np.diff(checkpoints) <= 0) or checkpoints[0] < 1:
            raise ValueError("checkpoints must be strictly increasing and >= 1")
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    s1_sum = profile.s1_lattice_sum(n)
    if profile.s2_lattice(n) + 2.0 / n > 1.0:
        raise ValueError("system too small: the start must sit above the upper band")
    start = np.ones(n, dtype=np.int8)

    num_checks = len(checkpoints)
    out_d = np.empty((trials, num_checks), dtype=np.float64)
    out_tau = np.empty(trials, dtype=np.int64)
    out_coal = np.empty(trials, dtype=np.int64)
    shards = max(1, min(shards, trials))
    bounds = np.linspace(0, trials, shards + 1).astype(int)

    def run_shard(index):
        lo, hi = bounds[index], bounds[index + 1]
        if lo == hi:
            return
        gen = rng_stream(seed, "contraction", index)
        kern.contraction_trials(
            n, J.uniform_coupling, hi - lo, checkpoints, s1_sum, start, 0,
            True, gen, out_d[lo:hi], out_tau[lo:hi], out_coal[lo:hi],
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_shard, range(shards)))
    else:
        for index in range(shards):
            run_shard(index)

    means = out_d.mean(axis=0)
    ses = out_d.std(axis=0, ddof=1) / math.sqrt(trials)
    rho = profile.rho(n)
    envelopes = (2.0 / n) * rho ** checkpoints.astype(np.float64)
    records = []
    for j, t in enumerate(checkpoints):
        rhs = envelopes[j] + 3.0 * ses[j]
        records.append(CheckRecord(
            check_name=f"contraction_checkpoint_{int(t)}",
            n=n, beta=beta, lhs=float(means[j]), rhs=float(rhs),
            passed=bool(means[j] <= rhs),
            extra={
                "checkpoint": int(t),
                "se": float(ses[j]),
                "envelope": float(envelopes[j]),
                "rho": rho,
                "trials": trials,
            },
        ))
    return ContractionReport(
        n=n, beta=beta, trials=trials, rho=rho, checkpoints=checkpoints,
        means=means, ses=ses, envelopes=envelopes, records=records,
        tau1=out_tau, coalesced=out_coal,
    )


# -- batch-mean estimators ------------------------------------------------------

def _site_subset_index(moment_fn):
    """CSR-style map site -> subsets containing it, for incremental products."""
    flat = moment_fn.subsets.ravel().astype(np.int64)
    order = np.argsort(flat, kind="stable")
    subset_of_site = (order // moment_fn.k).astype(np.int64)
    counts = np.bincount(flat, minlength=moment_fn.n)
    ptr = np.zeros(moment_fn.n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, subset_of_site


@dataclass
class MomentEstimate:
    """Batch-mean estimates of subset spin-product expectations."""

    moment_fn: MomentFunction
    subset_means: np.ndarray
    subset_ses: np.ndarray
    batch_means: np.ndarray  # (batches, num_subsets)
    value: float  # the normalized signed combination (the observable's mean)
    se: float
    sampler: str
    budget: int
    burn_in: int

    @property
    def batches(self):
        return self.batch_means.shape[0]


def estimate_moments(J, moment_fn, budget, *, sampler="plain", seed=0,
                     batches=30, burn_in=None, init=None, name="moments"):
    """Estimate subset product moments from one chain with batch-mean errors.

    ``budget`` counts post-burn-in single-site updates; estimates are
    exact time averages over every update (no thinning), accumulated
    incrementally as spins flip, and split into ``batches`` equal batches
    for standard errors.  The restricted sampler is the right choice at
    low temperature; subset sizes are even, so the global spin flip never
    changes a product.
    """
    if sampler not in ("plain", "restricted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if J.n != moment_fn.n:
        raise ValueError("interaction and observable disagree on system size")
    if batches < 2:
        raise ValueError("need at least two batches for a standard error")
    batch_len = budget // batches
    if batch_len < 1:
        raise ValueError(f"budget {budget} cannot fill {batches} batches")
    if batch_len < 10 * J.n:
        warnings.warn(
            "batches span fewer than ten sweeps; standard errors may be optimistic",
            stacklevel=2,
        )
    restricted = sampler == "restricted"
    if burn_in is None:
        burn_in = default_burn_in(J.n)
    rng = rng_stream(seed, name)
    if init is None:
        init = "plus" if restricted else "random"
    spins = _initial_spins(J.n, init, rng, restricted)
    if restricted and spins.sum() < 0:
        raise ValueError("restricted sampler must start in the half-space")

    arrays = _sampler_arrays(J)
    kern.advance(spins, int(spins.sum()), burn_in, restricted, *arrays, rng)
    ptr, subset_of_site = _site_subset_index(moment_fn)
    prod = np.ascontiguousarray(moment_fn.subset_products(spins))
    out = np.empty((batches, moment_fn.num_subsets), dtype=np.float64)
    kern.moment_batches(
        spins, int(spins.sum()), batches, batch_len, restricted,
        *arrays, rng, ptr, subset_of_site, prod, out,
    )

    subset_means = out.mean(axis=0)
    subset_ses = out.std(axis=0, ddof=1) / math.sqrt(batches)
    f_batches = (out @ moment_fn.signs) * moment_fn.normalization
    return MomentEstimate(
        moment_fn=moment_fn,
        subset_means=subset_means,
        subset_ses=subset_ses,
        batch_means=out,
        value=float(f_batches.mean()),
        se=float(f_batches.std(ddof=1) / math.sqrt(batches)),
        sampler=sampler,
        budget=batches * batch_len,
        burn_in=burn_in,
    )


@dataclass
class PairCorrelationEstimate:
    """Conditional-expectation estimates of pair moments E[x_i x_j]."""

    pairs: np.ndarray
    subset_means: np.ndarray
    subset_ses: np.ndarray
    batch_means: np.ndarray
    sampler: str
    samples: int
    thin: int
    burn_in: int


def estimate_pair_correlations(J, pairs, samples, *, sampler="plain", seed=0,
                               thin=None, batches=30, burn_in=None,
                               name="pairs"):
    """Low-variance pair-moment estimates via conditional expectations.

    Each snapshot contributes (x_j tanh(f_i) + x_i tanh(f_j)) / 2 per
    pair, where f_i is the local field at site i.  The tower property
    makes this unbiased for E[x_i x_j], and at weak coupling the field is
    small, so the variance is far below that of the raw product -- the
    difference between resolvable and noise-drowned gaps when the true
    correlations are O(1/n).  ``samples`` snapshots are taken every
    ``thin`` updates (default: half a sweep) and split into ``batches``
    equal batches for standard errors.
    """
    if sampler not in ("plain", "restricted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (m, 2) index array")
    n = J.n
    if np.any(pairs < 0) or np.any(pairs >= n):
        raise ValueError("pair indices out of range")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        # the conditional-expectation trick needs f_i independent of x_i
        raise ValueError("pairs must couple two distinct sites")
    if batches < 2:
        raise ValueError("need at least two batches for a standard error")
    per = samples // batches
    if per < 1:
        raise ValueError(f"{samples} samples cannot fill {batches} batches")
    restricted = sampler == "restricted"
    if thin is None:
        thin = max(1, n // 2)
    if burn_in is None:
        burn_in = default_burn_in(n)
    rng = rng_stream(seed, name)
    spins = _initial_spins(n, "plus" if restricted else "random", rng, restricted)
    arrays = _sampler_arrays(J)
    s = kern.advance(spins, int(spins.sum()), burn_in, restricted, *arrays, rng)

    i_idx = pairs[:, 0]
    j_idx = pairs[:, 1]
    batch_means = np.empty((batches, len(pairs)), dtype=np.float64)
    acc = np.zeros(len(pairs), dtype=np.float64)
    x = np.empty(n, dtype=np.float64)
    for b in range(batches):
        acc[:] = 0.0
        for _ in range(per):
            s = kern.advance(spins, s, thin, restricted, *arrays, rng)
            np.copyto(x, spins, casting="safe")
            g = np.tanh(J.matvec(x))
            acc += x[j_idx] * g[i_idx]
            acc += x[i_idx] * g[j_idx]
        batch_means[b] = acc / (2.0 * per)
    subset_means = batch_means.mean(axis=0)
    subset_ses = batch_means.std(axis=0, ddof=1) / math.sqrt(batches)
    return PairCorrelationEstimate(
        pairs=pairs,
        subset_means=subset_means,
        subset_ses=subset_ses,
        batch_means=batch_means,
        sampler=sampler,
        samples=per * batches,
        thin=thin,
        burn_in=burn_in,
    )


@dataclass
class DivergenceEstimate:
    """Sampled symmetric KL divergence between two Ising models."""

    value: float
    se: float
    first_mean: float  # E under the first model of H_first - H_second
    first_se: float
    second_mean: float  # E under the second model of the same gap
    second_se: float
    budget: int
    burn_in: int
    sampler: str


def estimate_symmetric_kl(first, second, budget, *, sampler="plain", seed=0,
                          batches=30, burn_in=None, name="skl"):
    """Sample the symmetric KL divergence between two Ising models.

    Normalizing constants cancel in the symmetric sum, leaving the energy
    gap ``H_first - H_second`` averaged under each model; the estimate is
    the difference of those two means with pooled batch-mean errors.
    ``budget`` counts post-burn-in updates per chain.
    """
    if first.n != second.n:
        raise ValueError("models must share the system size")
    if sampler not in ("plain", "restricted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if batches < 2:
        raise ValueError("need at least two batches for a standard error")
    batch_len = budget // batches
    if batch_len < 1:
        raise ValueError(f"budget {budget} cannot fill {batches} batches")
    restricted = sampler == "restricted"
    if burn_in is None:
        burn_in = default_burn_in(first.n)
    init = "plus" if restricted else "random"

    def one_chain(driver, other, label):
        rng = rng_stream(seed, name, label)
        spins = _initial_spins(driver.n, init, rng, restricted)
        out = np.empty(batches, dtype=np.float64)
        kern.energy_gap_batches(
            spins, int(spins.sum()), burn_in, batches, batch_len, restricted,
            *_sampler_arrays(driver), *_sampler_arrays(other), rng, out,
        )
        return out

    # each kernel call averages H_driver - H_other along its own chain
    first_out = one_chain(first, second, "first")
    second_out = -one_chain(second, first, "second")
    first_mean = float(first_out.mean())
    second_mean = float(second_out.mean())
    first_se = float(first_out.std(ddof=1) / math.sqrt(batches))
    second_se = float(second_out.std(ddof=1) / math.sqrt(batches))
    return DivergenceEstimate(
        value=first_mean - second_mean,
        se=math.hypot(first_se, second_se),
        first_mean=first_mean,
        first_se=first_se,
        second_mean=second_mean,
        second_se=second_se,
        budget=batches * batch_len,
        burn_in=burn_in,
        sampler=sampler,
    )


@dataclass
class MagnetizationHistogram:
    """Empirical law of the magnetization on its n+1 point lattice."""

    n: int
    counts: np.ndarray  # counts[k] for spin sum 2k - n
    num_samples: int
    sampler: str
    thin: int
    burn_in: int

    @property
    def values(self):
        return (2.0 * np.arange(self.n + 1) - self.n) / self.n

    @property
    def masses(self):
        return self.counts / self.num_samples

    def mean(self):
        return float(self.masses @ self.values)

    def mass_within(self, center, delta):
        """Empirical mass of ``|m - center| <= delta``."""
        return float(self.masses[np.abs(self.values - center) <= delta].sum())

    def outlier_fraction(self, m_star, delta):
        """Mass of states with ``min(|m - m*|, |m + m*|) > delta``."""
        values = self.values
        away = np.minimum(np.abs(values - m_star), np.abs(values + m_star)) > delta
        return float(self.masses[away].sum())

    def flip_symmetry_gap(self):
        """Total-variation distance between the law and its reflection."""
        return float(0.5 * np.abs(self.masses - self.masses[::-1]).sum())


def spin_sum_series(J, budget, *, sampler="plain", seed=0, thin=None,
                    burn_in=None, init=None, name="magnetization"):
    """Raw series of ``budget`` spin sums, one every ``thin`` updates."""
    if sampler not in ("plain", "restricted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    restricted = sampler == "restricted"
    n = J.n
    if thin is None:
        thin = n
    if burn_in is None:
        burn_in = default_burn_in(n)
    rng = rng_stream(seed, name)
    if init is None:
        init = "plus" if restricted else "random"
    spins = _initial_spins(n, init, rng, restricted)
    sums = np.empty(budget, dtype=np.int64)
    arrays = _sampler_arrays(J)
    kern.sample_sums(
        spins, int(spins.sum()), burn_in, thin, budget, restricted,
        *arrays, rng, sums,
    )
    return sums


def magnetization_samples(J, budget, *, sampler="plain", seed=0, thin=None,
                          burn_in=None, init=None, name="magnetization"):
    """Histogram of ``budget`` magnetization samples, one every ``thin`` updates."""
    sums = spin_sum_series(J, budget, sampler=sampler, seed=seed, thin=thin,
                           burn_in=burn_in, init=init, name=name)
    n = J.n
    counts = np.bincount((sums + n) // 2, minlength=n + 1)
    if thin is None:
        thin = n
    if burn_in is None:
        burn_in = default_burn_in(n)
    return MagnetizationHistogram(
        n=n, counts=counts, num_samples=budget,
        sampler=sampler, thin=thin, burn_in=burn_in,
    )


def sample_configurations(J, num, *, sampler="plain", seed=0, thin=None,
                          burn_in=None, init=None, name="snapshots"):
    """Matrix of ``num`` spin snapshots (rows), one every ``thin`` updates."""
    if sampler not in ("plain", "restricted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    restricted = sampler == "restricted"
    n = J.n
    if thin is None:
        thin = n
    if burn_in is None:
        burn_in = default_burn_in(n)
    rng = rng_stream(seed, name)
    if init is None:
        init = "plus" if restricted else "random"
    spins = _initial_spins(n, init, rng, restricted)
    out = np.empty((num, n), dtype=np.int8)
    arrays = _sampler_arrays(J)
    kern.sample_spins(
        spins, int(spins.sum()), burn_in, thin, num, restricted,
        *arrays, rng, out,
    )
    return out


# -- birth-death comparison chain ----------------------------------------------

@dataclass(frozen=True)
class BirthDeathChain:
    """Biased nearest-neighbor walk on {0, ..., r-1}.

    Moves up with probability 1/(1+alpha) and down with alpha/(1+alpha);
    the boundary rule depends on the use: hitting probabilities absorb at
    both ends, escape-time tails hold in place at the top.
    """

    r: int
    alpha: float

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("need at least two states")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("the down/up odds ratio must lie in (0, 1)")

    @property
    def p(self):
        """Up-move probability."""
        return 1.0 / (1.0 + self.alpha)

    def hit_top_probability(self, m):
        """Chance of reaching r-1 before 0 from state ``m`` (gambler's ruin)."""
        if not 0 <= m <= self.r - 1:
            raise ValueError(f"start state {m} outside 0..{self.r - 1}")
        return (self.alpha ** m - 1.0) / (self.alpha ** (self.r - 1) - 1.0)


@dataclass
class BirthDeathReport:
    """Simulation vs closed form for the comparison chain."""

    chain: BirthDeathChain
    start: int
    runs: int
    exact: float
    simulated: float
    se: float
    mean_steps: float
    agreement: CheckRecord
    tail_rows: list

    @property
    def holds(self):
        return self.agreement.passed and all(row.passed for row in self.tail_rows)


def birth_death_hitting(chain, m, *, runs=100_000, seed=0, tail_ks=None,
                        tail_runs=None, tail_start=None, name="birth-death"):
    """Simulate the comparison chain against its closed forms.

    Checks the gambler's-ruin probability of hitting the top from ``m``
    against ``(alpha^m - 1)/(alpha^(r-1) - 1)`` within three (exact,
    binomial) standard errors, then tabulates the chance of falling to
    the bottom from ``tail_start`` by each horizon ``K`` against the
    union-bound envelope ``K^2 alpha^(r-2)``.
    """
    r, alpha = chain.r, chain.alpha
    exact = chain.hit_top_probability(m)
    hits = np.empty(runs, dtype=np.bool_)
    steps = np.empty(runs, dtype=np.int64)
    kern.birth_death_hits(r, alpha, m, runs, rng_stream(seed, name, "ruin"),
                          hits, steps)
    simulated = float(hits.mean())
    se = math.sqrt(exact * (1.0 - exact) / runs)
    agreement = CheckRecord(
        check_name="birth_death_ruin",
        n=r, beta=alpha,
        lhs=abs(simulated - exact), rhs=3.0 * se if se > 0 else 0.0,
        passed=bool(abs(simulated - exact) <= (3.0 * se if se > 0 else 0.0)),
        extra={"exact": exact, "simulated": simulated, "se": se,
               "start": m, "runs": runs},
    )

    if tail_start is None:
        tail_start = r - 2
    if tail_ks is None:
        base = max(1, r - 2)
        tail_ks = sorted({base, 2 * base, 5 * base, 10 * base})
    tail_ks = [int(k) for k in tail_ks]
    if tail_runs is None:
        tail_runs = runs
    horizon = max(tail_ks)
    times = np.empty(tail_runs, dtype=np.int64)
    kern.birth_death_bottom_times(r, alpha, tail_start, tail_runs, horizon,
                                  rng_stream(seed, name, "tail"), times)
    tail_rows = []
    for k in tail_ks:
        phat = float(np.mean(times <= k))
        k_se = math.sqrt(max(phat * (1.0 - phat), 1.0 / tail_runs) / tail_runs)
        envelope = k * k * alpha ** (r - 2)
        tail_rows.append(CheckRecord(
            check_name=f"birth_death_tail_K{k}",
            n=r, beta=alpha,
            lhs=phat, rhs=min(envelope, 1.0) + 3.0 * k_se,
            passed=bool(phat <= min(envelope, 1.0) + 3.0 * k_se),
            extra={"K": k, "envelope": envelope, "se": k_se,
                   "start": tail_start, "runs": tail_runs},
        ))
    return BirthDeathReport(
        chain=chain, start=m, runs=runs, exact=exact, simulated=simulated,
        se=se, mean_steps=float(steps.mean()), agreement=agreement,
        tail_rows=tail_rows,
    )


def magnetization_step_probs(beta, n, m):
    """One-step magnetization move probabilities of the complete-graph chain.

    Returns ``(p_plus, p_minus)`` for moves to ``m + 2/n`` and ``m - 2/n``;
    the remaining mass holds still.
    """
    p_plus = 0.5 * (1.0 - m) * 0.5 * (1.0 + math.tanh(beta * m - beta / n))
    p_minus = 0.5 * (1.0 + m) * 0.5 * (1.0 - math.tanh(beta * m + beta / n))
    return p_plus, p_minus


def band_comparison_chain(n, profile):
    """Comparison chain for the magnetization band between the two targets.

    States are the magnetization lattice points from the lower target to
    one step above the upper target; ``alpha`` is the worst down/up odds
    ratio over the band, which must be below one (it is for large enough
    systems; small ones raise).
    """
    s1_sum = profile.s1_lattice_sum(n)
    s2_sum = profile.s2_lattice_sum(n)
    top = s2_sum + 2
    r = (top - s1_sum) // 2 + 1
    if r < 2:
        raise ValueError("band collapsed: system too small for distinct targets")
    worst = 0.0
    for s in range(s1_sum, top + 1, 2):
        p_plus, p_minus = magnetization_step_probs(profile.beta, n, s / n)
        worst = max(worst, p_minus / p_plus)
    if worst >= 1.0:
        raise ValueError(
            f"no uniform upward drift on the band at n={n} (odds ratio {worst:.4f})"
        )
    return BirthDeathChain(r=r, alpha=worst)


def coupling_down_probability(beta, n, m, alpha):
    """Extra down-tilt that aligns the magnetization chain with the comparison walk.

    When the magnetization moves up, the comparison walk still steps down
    with this probability, fixing its down rate at alpha/(1+alpha); a
    valid probability whenever the band odds ratio is at most ``alpha``.
    """
    p_plus, p_minus = magnetization_step_probs(beta, n, m)
    total = p_plus + p_minus
    return (total / p_plus) * (alpha / (1.0 + alpha) - p_minus / total)
