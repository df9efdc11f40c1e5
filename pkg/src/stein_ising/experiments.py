"""Scripted desk-scale studies, each emitting CSV rows and a machine verdict.

Every experiment is a pure function of its :class:`ExperimentConfig`
(seeds included), reruns byte-identically, and returns an
:class:`ExperimentResult` whose ``records`` carry one lhs/rhs/pass verdict
per claim -- no silent assertions.  The CSV schema is uniform: ``seed, n,
beta, d, estimator, value, se`` plus experiment-specific columns.

The headline studies:

* ``moments`` -- complete-graph vs expander moment gaps shrinking with
  degree,
* ``cliques`` -- the disjoint-cliques contrast where the gap stays large,
* ``high-temperature`` -- correlation-sum growth and gap decay below the
  critical temperature,
* ``dobrushin`` -- the proportional-perturbation comparison bound,
* ``concentration`` -- two-point magnetization concentration,
* ``naive-vs-stein`` -- the divergence-based envelope against the
  sharper comparison envelope,
* ``delta-h`` -- solution-derivative bounds and escape-time tails.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphs import (
    complete_graph,
    disjoint_cliques,
    interaction_from_graph,
    random_regular,
    spectral_deviation,
    spectral_report,
)
from .ising import InteractionMatrix, MomentFunction, curie_weiss
from .mcmc import (
    band_comparison_chain,
    contraction_check,
    contraction_profile,
    estimate_moments,
    estimate_pair_correlations,
    estimate_symmetric_kl,
    magnetization_samples,
    rng_stream,
    spin_sum_series,
)
from .reporting import CheckRecord, write_csv

CORE_FIELDS = ("seed", "n", "beta", "d", "estimator", "value", "se")


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Fully explicit inputs for one experiment (no wall-clock seeding)."""

    name: str
    n: int
    beta: float
    k: int
    d_list: tuple
    n_list: tuple
    seed: int
    budget: int
    samples: int
    thin: Optional[int]
    trials: int
    tolerances: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    out_dir: Optional[str] = None

    def __post_init__(self):
        for key, value in self.tolerances.items():
            if value <= 0:
                raise ValueError(f"tolerance {key!r} must be positive, got {value}")
        if self.budget < 0 or self.samples < 0 or self.trials < 0:
            raise ValueError("budgets must be nonnegative")

    def tol(self, key):
        return self.tolerances[key]

    def to_dict(self):
        return {
            "name": self.name, "n": self.n, "beta": self.beta, "k": self.k,
            "d_list": list(self.d_list), "n_list": list(self.n_list),
            "seed": self.seed, "budget": self.budget, "samples": self.samples,
            "thin": self.thin, "trials": self.trials,
            "tolerances": dict(sorted(self.tolerances.items())),
            "extras": dict(sorted(self.extras.items())),
            "out_dir": self.out_dir,
        }


# Per-experiment defaults.  Tolerance windows marked "calibrated" were
# frozen from a seeded calibration run of this code base (see the test
# fixtures, which pin the same numbers).
_DEFAULTS = {
    "moments": dict(
        n=1024, beta=1.2, k=2, d_list=(8, 16, 32, 64), seed=1234,
        budget=80_000_000, samples=0, thin=None, trials=0,
        tolerances={
            "se_slack": 3.0,
            # calibrated: measured gap(d)/gap(4d) = 6.96 and 5.35 at the
            # default scale; per-pair gaps shrink like 1/d^1.4, faster
            # than the 1/sqrt(d) upper-envelope rate
            "ratio_lo": 4.0, "ratio_hi": 9.0,
            "tail_gap": 0.1,
        },
    ),
    "cliques": dict(
        n=1024, beta=1.2, k=2, d_list=(16,), seed=1234,
        budget=60_000_000, samples=0, thin=None, trials=0,
        tolerances={"se_slack": 3.0, "clique_floor": 0.2, "separation": 3.0},
    ),
    "high-temperature": dict(
        n=1024, beta=0.5, k=2, d_list=(16,), n_list=(256, 512, 1024),
        seed=1234, budget=120_000, samples=200_000, thin=None, trials=0,
        tolerances={
            "se_slack": 3.0,
            "exponent_lo": 0.7, "exponent_hi": 1.3,
            "ratio_lo": 0.3, "ratio_hi": 0.8,
        },
        extras={"pairs": "6000"},
    ),
    "dobrushin": dict(
        n=512, beta=0.5, k=2, d_list=(), seed=1234,
        budget=0, samples=200_000, thin=None, trials=0,
        tolerances={"se_slack": 3.0},
        extras={"t": "0.1", "n_exact": "8"},
    ),
    "concentration": dict(
        n=1000, beta=1.2, k=2, d_list=(32,), seed=1234,
        budget=0, samples=1_000_000, thin=None, trials=0,
        tolerances={"threshold": 1e-3, "delta": 0.15},
        extras={"deltas": "0.1,0.15,0.2,2.0", "clique_size": "40"},
    ),
    "naive-vs-stein": dict(
        n=1024, beta=1.2, k=2, d_list=(8, 16, 32, 64), seed=1234,
        budget=60_000_000, samples=0, thin=None, trials=0,
        tolerances={"se_slack": 3.0},
    ),
    "delta-h": dict(
        n=128, beta=1.2, k=2, d_list=(), seed=1234,
        budget=0, samples=0, thin=None, trials=10_000,
        tolerances={"slack": 0.5, "se_slack": 3.0},
        extras={"n_exact": "12"},
    ),
}


def parse_config_text(text):
    """Parse the plain-text ``key = value`` config format.

    Lines starting with ``#`` (or blank) are skipped; values keep their
    raw string form.  List-valued keys use commas.  Keys with a ``tol.``
    prefix populate the tolerance table.
    """
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def load_config_file(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def _as_int_tuple(raw):
    if isinstance(raw, (tuple, list)):
        return tuple(int(v) for v in raw)
    return tuple(int(part) for part in str(raw).split(",") if part.strip())


def make_config(name, overrides=None):
    """Build a config for ``name`` from defaults plus string overrides."""
    if name not in _DEFAULTS:
        raise ValueError(
            f"unknown experiment {name!r}; choose from {sorted(_DEFAULTS)}"
        )
    base = dict(_DEFAULTS[name])
    tolerances = dict(base.pop("tolerances", {}))
    extras = dict(base.pop("extras", {}))
    base.setdefault("n_list", ())
    out_dir = None
    for key, raw in (overrides or {}).items():
        if key.startswith("tol."):
            tolerances[key[4:]] = float(raw)
        elif key in ("d_list", "n_list"):
            base[key] = _as_int_tuple(raw)
        elif key in ("n", "k", "seed", "budget", "samples", "trials"):
            base[key] = int(raw)
        elif key == "thin":
            base[key] = None if str(raw).lower() == "none" else int(raw)
        elif key == "beta":
            base[key] = float(raw)
        elif key == "out_dir":
            out_dir = str(raw)
        elif key == "name":
            if str(raw) != name:
                raise ValueError(f"config is for {raw!r}, requested {name!r}")
        else:
            extras[key] = str(raw)
    return ExperimentConfig(
        name=name, tolerances=tolerances, extras=extras, out_dir=out_dir,
        **{k: (tuple(v) if isinstance(v, (list, tuple)) else v) for k, v in base.items()},
    )


# -- results ----------------------------------------------------------------

@dataclass
class ExperimentResult:
    name: str
    config: ExperimentConfig
    rows: list
    records: list
    summary: dict

    @property
    def passed(self):
        return all(record.passed for record in self.records)

    def fieldnames(self):
        names = list(CORE_FIELDS)
        for row in self.rows:
            for key in row:
                if key not in names:
                    names.append(key)
        return names


def write_result(result, out_dir):
    """Write ``<name>.csv`` and ``<name>.verdicts.json``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{result.name}.csv")
    write_csv(csv_path, result.fieldnames(), result.rows)
    verdict_path = os.path.join(out_dir, f"{result.name}.verdicts.json")
    payload = {
        "name": result.name,
        "passed": result.passed,
        "config": result.config.to_dict(),
        "records": [record.to_dict() for record in result.records],
        "summary": result.summary,
    }
    with open(verdict_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, verdict_path]


def _row(cfg, *, n=None, beta=None, d="", estimator="", value="", se="", **extra):
    row = {
        "seed": cfg.seed,
        "n": cfg.n if n is None else n,
        "beta": cfg.beta if beta is None else beta,
        "d": d,
        "estimator": estimator,
        "value": value,
        "se": se,
    }
    row.update(extra)
    return row


def _graph_seed(cfg, *labels):
    return int(rng_stream(cfg.seed, "graph", *labels).integers(1 << 62))


def _paired_gap(est_a, est_b):
    """Average absolute per-subset gap with a jackknife-over-batches error.

    The statistic is avg_S |rho_a(S) - rho_b(S)| over the full-run means;
    the error deletes one batch from both runs at a time, which respects
    the within-chain correlation that plain per-subset errors would miss.
    """
    if est_a.batch_means.shape != est_b.batch_means.shape:
        raise ValueError("paired gap needs matching batch layouts")
    stat = float(np.mean(np.abs(est_a.subset_means - est_b.subset_means)))
    batches = est_a.batch_means.shape[0]
    total_a = est_a.batch_means.sum(axis=0)
    total_b = est_b.batch_means.sum(axis=0)
    jack = np.empty(batches)
    for b in range(batches):
        mean_a = (total_a - est_a.batch_means[b]) / (batches - 1)
        mean_b = (total_b - est_b.batch_means[b]) / (batches - 1)
        jack[b] = np.mean(np.abs(mean_a - mean_b))
    se = math.sqrt((batches - 1) / batches * np.sum((jack - jack.mean()) ** 2))
    return stat, se


def _map_jobs(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# -- individual experiments ---------------------------------------------------

@dataclass
class MomentGapResult:
    """Averaged absolute moment gap against one regular-graph model."""

    d: int
    epsilon: float
    avg_abs_gap: float
    se: float
    bound_value: float

    def __post_init__(self):
        if self.avg_abs_gap < 0:
            raise ValueError("gaps are absolute values")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("the expansion parameter lives in (0, 1]")


def moment_comparison(cfg, jobs=1):
    """Complete-graph vs d-regular moment gaps across a degree sweep.

    For each degree the study certifies the graph's expansion, estimates
    every sampled subset moment under both models with the restricted
    sampler, and reports avg_S |rho - rho~| with jackknife errors.
    Verdicts: the gap decreases strictly in degree (beyond the standard
    error slack), consecutive-quadrupling ratios stay inside the
    calibrated window, the largest degree lands below the fixed ceiling,
    and the same-scale complete-graph control is statistically zero.
    """
    n, beta, k = cfg.n, cfg.beta, cfg.k
    if beta <= 1.0:
        raise ValueError("this study runs below the critical temperature")
    profile = contraction_profile(beta)
    c_hat = 4.0 * beta / profile.gamma_star
    mf = MomentFunction.create(n, k, rng=rng_stream(cfg.seed, "subsets"))
    cw = curie_weiss(n, beta)
    est_cw = estimate_moments(cw, mf, cfg.budget, sampler="restricted",
                              seed=cfg.seed, name="cw")

    def measure(d):
        graph = random_regular(n, d, seed=_graph_seed(cfg, d))
        eps = spectral_report(graph).epsilon
        J_d = interaction_from_graph(graph, beta, scale="per-d")
        est_d = estimate_moments(J_d, mf, cfg.budget, sampler="restricted",
                                 seed=cfg.seed, name=f"expander-d{d}")
        gap, se = _paired_gap(est_cw, est_d)
        return MomentGapResult(
            d=d, epsilon=eps, avg_abs_gap=gap, se=se,
            bound_value=k * c_hat * (eps + 1.0 / n),
        )

    results = _map_jobs(measure, list(cfg.d_list), jobs)

    rows = []
    for res in results:
        rows.append(_row(
            cfg, d=res.d, estimator="avg_abs_moment_gap",
            value=res.avg_abs_gap, se=res.se,
            epsilon=res.epsilon, bound_value=res.bound_value, c_hat=c_hat,
            subsets=mf.num_subsets,
        ))

    slack = cfg.tol("se_slack")
    records = []
    for prev, cur in zip(results, results[1:]):
        pooled = math.hypot(prev.se, cur.se)
        records.append(CheckRecord(
            check_name=f"gap_decreases_d{prev.d}_to_d{cur.d}", n=n, beta=beta,
            lhs=cur.avg_abs_gap, rhs=prev.avg_abs_gap - slack * pooled,
            passed=bool(cur.avg_abs_gap < prev.avg_abs_gap - slack * pooled),
            extra={"d_small": prev.d, "d_large": cur.d, "pooled_se": pooled},
        ))
    by_d = {res.d: res for res in results}
    for d in cfg.d_list:
        if 4 * d in by_d:
            ratio = by_d[d].avg_abs_gap / by_d[4 * d].avg_abs_gap
            lo, hi = cfg.tol("ratio_lo"), cfg.tol("ratio_hi")
            records.append(CheckRecord(
                check_name=f"gap_ratio_d{d}_over_d{4 * d}", n=n, beta=beta,
                lhs=ratio, rhs=hi, passed=bool(lo <= ratio <= hi),
                extra={"window_lo": lo, "window_hi": hi},
            ))
    tail = results[-1]
    records.append(CheckRecord(
        check_name=f"gap_ceiling_d{tail.d}", n=n, beta=beta,
        lhs=tail.avg_abs_gap, rhs=cfg.tol("tail_gap"),
        passed=bool(tail.avg_abs_gap < cfg.tol("tail_gap")),
        extra={"d": tail.d},
    ))

    # control: the complete graph at per-degree scale is the same model
    control = interaction_from_graph(complete_graph(n), beta, scale="per-d")
    est_control = estimate_moments(control, mf, cfg.budget, sampler="restricted",
                                   seed=cfg.seed, name="complete-control")
    gap0, se0 = _paired_gap(est_cw, est_control)
    null_floor = slack * float(
        np.mean(np.hypot(est_cw.subset_ses, est_control.subset_ses))
    )
    rows.append(_row(
        cfg, d=n - 1, estimator="complete_graph_control", value=gap0, se=se0,
        epsilon=1.0 / (n - 1), bound_value=k * c_hat * (1.0 / (n - 1) + 1.0 / n),
        c_hat=c_hat, subsets=mf.num_subsets,
    ))
    records.append(CheckRecord(
        check_name="complete_graph_control_null", n=n, beta=beta,
        lhs=gap0, rhs=null_floor, passed=bool(gap0 <= null_floor),
        extra={"note": "identical models; gap at the noise floor"},
    ))

    summary = {
        "c_hat": c_hat,
        "m_star": profile.m_star,
        "subsets": mf.num_subsets,
        "budget": cfg.budget,
        "gaps": {str(res.d): res.avg_abs_gap for res in results},
    }
    return ExperimentResult("moments", cfg, rows, records, summary)


def clique_counterexample(cfg, jobs=1):
    """Disjoint cliques keep a macroscopic moment gap where expanders do not.

    Cliques of size d (degree d-1) at per-degree scale magnetize
    independently, so nearly all pairs are cross-clique with vanishing
    correlation while the complete-graph value stays near the squared
    fixed point -- the gap has a floor.  A degree-d expander at the same
    size is the contrast.
    """
    n, beta, k = cfg.n, cfg.beta, cfg.k
    d = cfg.d_list[0]
    if n % d != 0:
        raise ValueError("clique size must divide the system size")
    profile = contraction_profile(beta)
    mf = MomentFunction.create(n, k, rng=rng_stream(cfg.seed, "subsets"))
    cw = curie_weiss(n, beta)

    cliques = disjoint_cliques(n, d)
    J_clique = interaction_from_graph(cliques, beta, scale="per-d")
    expander = random_regular(n, d, seed=_graph_seed(cfg, d))
    J_expander = interaction_from_graph(expander, beta, scale="per-d")

    def measure(pair):
        label, J = pair
        return estimate_moments(J, mf, cfg.budget, sampler="restricted",
                                seed=cfg.seed, name=label)

    est_cw, est_clique, est_expander = _map_jobs(
        measure, [("cw", cw), ("cliques", J_clique), ("expander", J_expander)], jobs
    )
    clique_gap, clique_se = _paired_gap(est_cw, est_clique)
    expander_gap, expander_se = _paired_gap(est_cw, est_expander)

    # cross-clique subsets span at least two blocks and must average to zero
    blocks = mf.subsets // d
    cross = ~np.all(blocks == blocks[:, :1], axis=1)
    cross_batch_means = est_clique.batch_means[:, cross].mean(axis=1)
    cross_mean = float(cross_batch_means.mean())
    cross_se = float(cross_batch_means.std(ddof=1) / math.sqrt(len(cross_batch_means)))

    rows = [
        _row(cfg, d=d, estimator="clique_gap", value=clique_gap, se=clique_se,
             graph="disjoint_cliques", predicted_floor=profile.m_star ** 2),
        _row(cfg, d=d, estimator="expander_gap", value=expander_gap,
             se=expander_se, graph="random_regular",
             predicted_floor=""),
        _row(cfg, d=d, estimator="cross_clique_mean", value=cross_mean,
             se=cross_se, graph="disjoint_cliques",
             predicted_floor=0.0),
    ]
    slack = cfg.tol("se_slack")
    records = [
        CheckRecord(
            check_name="clique_gap_floor", n=n, beta=beta,
            lhs=cfg.tol("clique_floor"), rhs=clique_gap,
            passed=bool(clique_gap >= cfg.tol("clique_floor")),
            extra={"predicted_floor": profile.m_star ** 2,
                   "within_clique_fraction": float(1.0 - cross.mean())},
        ),
        CheckRecord(
            check_name="expander_below_clique", n=n, beta=beta,
            lhs=expander_gap, rhs=clique_gap / cfg.tol("separation"),
            passed=bool(expander_gap < clique_gap / cfg.tol("separation")),
            extra={"separation": cfg.tol("separation")},
        ),
        CheckRecord(
            check_name="cross_clique_independence", n=n, beta=beta,
            lhs=abs(cross_mean), rhs=slack * cross_se,
            passed=bool(abs(cross_mean) <= slack * cross_se),
            extra={"cross_subsets": int(cross.sum())},
        ),
    ]
    summary = {
        "clique_gap": clique_gap,
        "expander_gap": expander_gap,
        "m_star_squared": profile.m_star ** 2,
    }
    return ExperimentResult("cliques", cfg, rows, records, summary)


def high_temperature_scan(cfg, jobs=1):
    """Correlation sums and pairwise gaps in the uniqueness regime.

    For each size the study estimates the off-diagonal correlation sum
    through the variance identity var(S) - n under both models, fits its
    growth exponent across sizes, and checks that the averaged pairwise
    gap roughly halves per doubling.  Pair moments are O(1/n) here, so
    the gap uses the conditional-expectation estimator; raw products
    would bury the signal under Monte Carlo noise at any desk budget.
    """
    beta = cfg.beta
    if beta >= 1.0:
        raise ValueError("this study runs above the critical temperature")
    d = cfg.d_list[0]
    sizes = cfg.n_list
    if len(sizes) < 2:
        raise ValueError("need at least two sizes to fit a growth exponent")
    slack = cfg.tol("se_slack")
    num_pairs = int(cfg.extras.get("pairs", "6000"))
    batches = 30

    def batched_corr_sum(J, label, n):
        sums = spin_sum_series(J, cfg.samples, sampler="plain", seed=cfg.seed,
                               thin=max(1, n // 2), name=label)
        per = len(sums) // batches
        trimmed = sums[: per * batches].reshape(batches, per).astype(np.float64)
        variances = trimmed.var(axis=1)
        values = variances - n
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(batches))

    def measure(n):
        cw = curie_weiss(n, beta)
        graph = random_regular(n, d, seed=_graph_seed(cfg, n, d))
        J_d = interaction_from_graph(graph, beta, scale="per-d")
        sum_cw = batched_corr_sum(cw, f"sums-cw-{n}", n)
        sum_d = batched_corr_sum(J_d, f"sums-expander-{n}", n)
        # force sampling at every size so the statistic is comparable
        mf = MomentFunction.create(n, cfg.k, rng=rng_stream(cfg.seed, "subsets", n),
                                   exhaustive_cap=0,
                                   sample_size=min(num_pairs, math.comb(n, cfg.k)))
        est_cw = estimate_pair_correlations(cw, mf.subsets, cfg.budget,
                                            seed=cfg.seed, name=f"pairs-cw-{n}")
        est_d = estimate_pair_correlations(J_d, mf.subsets, cfg.budget,
                                           seed=cfg.seed,
                                           name=f"pairs-expander-{n}")
        gap, gap_se = _paired_gap(est_cw, est_d)
        return n, sum_cw, sum_d, (gap, gap_se)

    measured = _map_jobs(measure, list(sizes), jobs)

    rows = []
    gaps = {}
    sums_cw = {}
    sums_d = {}
    for n, sum_cw, sum_d, (gap, gap_se) in measured:
        sums_cw[n] = sum_cw
        sums_d[n] = sum_d
        gaps[n] = (gap, gap_se)
        rows.append(_row(cfg, n=n, d="", estimator="corr_sum_cw",
                         value=sum_cw[0], se=sum_cw[1]))
        rows.append(_row(cfg, n=n, d=d, estimator="corr_sum_expander",
                         value=sum_d[0], se=sum_d[1]))
        rows.append(_row(cfg, n=n, d=d, estimator="avg_pair_gap",
                         value=gap, se=gap_se))

    records = []
    log_n = np.log(np.array(sizes, dtype=np.float64))
    for label, table in (("cw", sums_cw), ("expander", sums_d)):
        values = np.array([table[n][0] for n in sizes])
        if np.any(values <= 0):
            exponent = float("nan")
        else:
            exponent = float(np.polyfit(log_n, np.log(values), 1)[0])
        lo, hi = cfg.tol("exponent_lo"), cfg.tol("exponent_hi")
        records.append(CheckRecord(
            check_name=f"corr_sum_growth_{label}", n=sizes[-1], beta=beta,
            lhs=exponent, rhs=hi, passed=bool(lo <= exponent <= hi),
            extra={"window_lo": lo, "window_hi": hi,
                   "values": {str(n): table[n][0] for n in sizes}},
        ))
    for n_small, n_large in zip(sizes, sizes[1:]):
        if n_large != 2 * n_small:
            continue
        ratio = gaps[n_large][0] / gaps[n_small][0]
        lo, hi = cfg.tol("ratio_lo"), cfg.tol("ratio_hi")
        records.append(CheckRecord(
            check_name=f"gap_halves_n{n_small}_to_n{n_large}",
            n=n_large, beta=beta,
            lhs=ratio, rhs=hi, passed=bool(lo <= ratio <= hi),
            extra={"window_lo": lo, "window_hi": hi,
                   "gap_small": gaps[n_small][0], "gap_large": gaps[n_large][0]},
        ))

    # the zero-coupling control: the correlation sum vanishes
    n0 = sizes[0]
    free = InteractionMatrix.uniform(n0, 0.0)
    value0, se0 = batched_corr_sum(free, "sums-free", n0)
    rows.append(_row(cfg, n=n0, beta=0.0, d="", estimator="corr_sum_free",
                     value=value0, se=se0))
    records.append(CheckRecord(
        check_name="corr_sum_free_null", n=n0, beta=0.0,
        lhs=abs(value0), rhs=slack * se0, passed=bool(abs(value0) <= slack * se0),
        extra={},
    ))

    summary = {
        "sizes": list(sizes),
        "corr_sums_cw": {str(n): sums_cw[n][0] for n in sizes},
        "gaps": {str(n): gaps[n][0] for n in sizes},
    }
    return ExperimentResult("high-temperature", cfg, rows, records, summary)


def dobrushin_perturbation(cfg, jobs=1):
    """Proportional perturbation M = (1+t) L inside the contraction regime.

    At enumerable size the comparison inequality is checked exactly; at
    sampling scale the magnetization-mean gap is compared against
    t ||L|| / (2 (1 - theta)) with theta the absolute-spectral-norm
    contraction coefficient.
    """
    from .exact import dobrushin_bound_check, exact_distribution
    from .exact import state_spins as _state_spins
    from .graphs import abs_operator_norm, operator_norm

    beta = cfg.beta
    t = float(cfg.extras.get("t", "0.1"))
    n_exact = int(cfg.extras.get("n_exact", "8"))
    slack = cfg.tol("se_slack")

    rows = []
    records = []

    # exact scale; |m| is the two-sided companion with a genuinely
    # nonzero gap (the signed mean vanishes for both models by symmetry)
    L_small = curie_weiss(n_exact, beta)
    f_mag = _state_spins(n_exact).mean(axis=1)
    cases = [(0.0, f_mag, "mag"), (t, f_mag, "mag"), (t, np.abs(f_mag), "absmag")]
    for t_case, f_vals, label in cases:
        M_small = L_small.scaled(1.0 + t_case)
        record = dobrushin_bound_check(L_small, M_small, f_vals)
        record.check_name = f"dobrushin_exact_{label}_t{t_case:g}"
        record.extra["t"] = t_case
        records.append(record)
        rows.append(_row(cfg, n=n_exact, d="",
                         estimator=f"exact_gap_{label}_t{t_case:g}",
                         value=record.lhs, se=0.0, bound=record.rhs))

    # sampling scale
    n = cfg.n
    L = curie_weiss(n, beta)
    M = L.scaled(1.0 + t)
    theta = abs_operator_norm(L)
    if theta >= 1.0:
        raise ValueError("the contraction condition fails at this size/beta")
    bound = t * operator_norm(L.dense() if n <= 4096 else L.csr()) / (2.0 * (1.0 - theta))

    def mean_mag(pair):
        label, J = pair
        sums = spin_sum_series(J, cfg.samples, sampler="plain", seed=cfg.seed,
                               thin=max(1, n // 2), name=label)
        batches = 30
        per = len(sums) // batches
        blocks = sums[: per * batches].reshape(batches, per) / n
        means = blocks.mean(axis=1)
        abs_means = np.abs(blocks).mean(axis=1)
        return (
            (float(means.mean()), float(means.std(ddof=1) / math.sqrt(batches))),
            (float(abs_means.mean()),
             float(abs_means.std(ddof=1) / math.sqrt(batches))),
        )

    (stats_l, abs_l), (stats_m, abs_m) = _map_jobs(
        mean_mag, [("base", L), ("perturbed", M)], jobs
    )
    for label, (a_stat, a_se), (b_stat, b_se) in (
        ("mag", stats_l, stats_m), ("absmag", abs_l, abs_m),
    ):
        gap = abs(a_stat - b_stat)
        se = math.hypot(a_se, b_se)
        rows.append(_row(cfg, d="", estimator=f"sampled_gap_{label}",
                         value=gap, se=se, bound=bound))
        records.append(CheckRecord(
            check_name=f"dobrushin_sampled_{label}", n=n, beta=beta,
            lhs=gap, rhs=bound + slack * se,
            passed=bool(gap <= bound + slack * se),
            extra={"t": t, "theta": theta, "bound": bound},
        ))

    summary = {
        "t": t, "theta": theta, "bound": bound,
        "sampled_gap_absmag": abs(abs_l[0] - abs_m[0]),
    }
    return ExperimentResult("dobrushin", cfg, rows, records, summary)


def concentration_check(cfg, jobs=1):
    """Two-point concentration of the magnetization on an expander.

    Samples the plain chain and measures the fraction of samples whose
    magnetization is far from both fixed points, sweeping the width; the
    disjoint-cliques graph at comparable degree is the non-expander
    contrast expected to fail concentration.
    """
    n, beta = cfg.n, cfg.beta
    d = cfg.d_list[0]
    profile = contraction_profile(beta)
    deltas = [float(part) for part in cfg.extras.get("deltas", "0.15").split(",")]
    delta_main = cfg.tol("delta")
    threshold = cfg.tol("threshold")
    clique_size = int(cfg.extras.get("clique_size", "40"))

    graph = random_regular(n, d, seed=_graph_seed(cfg, d))
    J_d = interaction_from_graph(graph, beta, scale="per-d")
    hist = magnetization_samples(J_d, cfg.samples, sampler="plain",
                                 seed=cfg.seed, thin=cfg.thin, name="expander")

    rows = []
    for delta in deltas:
        frac = hist.outlier_fraction(profile.m_star, delta)
        se = math.sqrt(max(frac * (1.0 - frac), 1.0 / cfg.samples) / cfg.samples)
        rows.append(_row(cfg, d=d, estimator=f"outlier_fraction_delta{delta:g}",
                         value=frac, se=se, graph="random_regular",
                         m_star=profile.m_star))

    frac_main = hist.outlier_fraction(profile.m_star, delta_main)
    records = [CheckRecord(
        check_name=f"outlier_fraction_delta{delta_main:g}", n=n, beta=beta,
        lhs=frac_main, rhs=threshold, passed=bool(frac_main < threshold),
        extra={"delta": delta_main, "samples": cfg.samples,
               "m_star": profile.m_star, "d": d},
    )]
    frac_vacuous = hist.outlier_fraction(profile.m_star, 2.0)
    records.append(CheckRecord(
        check_name="outlier_fraction_delta2_vacuous", n=n, beta=beta,
        lhs=frac_vacuous, rhs=0.0, passed=bool(frac_vacuous == 0.0),
        extra={"delta": 2.0},
    ))

    # non-expander contrast: independent cliques scatter the magnetization
    if n % clique_size != 0:
        raise ValueError("clique size must divide the system size")
    cliques = disjoint_cliques(n, clique_size)
    J_clique = interaction_from_graph(cliques, beta, scale="per-d")
    clique_samples = max(10_000, cfg.samples // 10)
    hist_clique = magnetization_samples(J_clique, clique_samples, sampler="plain",
                                        seed=cfg.seed, thin=cfg.thin,
                                        name="cliques")
    frac_clique = hist_clique.outlier_fraction(profile.m_star, delta_main)
    rows.append(_row(cfg, d=clique_size, estimator="outlier_fraction_cliques",
                     value=frac_clique,
                     se=math.sqrt(max(frac_clique * (1 - frac_clique),
                                      1.0 / clique_samples) / clique_samples),
                     graph="disjoint_cliques", m_star=profile.m_star))
    records.append(CheckRecord(
        check_name="cliques_scatter_more", n=n, beta=beta,
        lhs=frac_main, rhs=frac_clique, passed=bool(frac_clique > frac_main),
        extra={"clique_size": clique_size, "delta": delta_main},
    ))

    summary = {
        "outlier_fraction": frac_main,
        "clique_outlier_fraction": frac_clique,
        "m_star": profile.m_star,
        "epsilon": spectral_report(graph).epsilon,
    }
    return ExperimentResult("concentration", cfg, rows, records, summary)


def naive_vs_stein(cfg, jobs=1):
    """The divergence route vs the comparison route, side by side.

    For each degree the study estimates the symmetric KL divergence,
    checks it against its spectral envelope, and tabulates the naive
    observable-gap envelope sqrt(sqrt(log n / n) + sqrt(beta (eps + 1/n)))
    beside the comparison-method rate k beta (eps + 1/n); the latter wins
    at large degree and the advantage grows with the degree.
    """
    n, beta, k = cfg.n, cfg.beta, cfg.k
    profile = contraction_profile(beta)
    c_hat = 4.0 * beta / profile.gamma_star
    cw = curie_weiss(n, beta)
    slack = cfg.tol("se_slack")
    mf = MomentFunction.create(n, k, rng=rng_stream(cfg.seed, "subsets"))
    gap_budget = max(cfg.budget // 3, 3 * 30)
    est_cw = estimate_moments(cw, mf, gap_budget, sampler="restricted",
                              seed=cfg.seed, name="cw")

    def measure(d):
        graph = random_regular(n, d, seed=_graph_seed(cfg, d))
        eps = spectral_report(graph).epsilon
        J_d = interaction_from_graph(graph, beta, scale="per-d")
        est = estimate_symmetric_kl(cw, J_d, cfg.budget, sampler="restricted",
                                    seed=cfg.seed, name=f"skl-d{d}")
        deviation = spectral_deviation(cw, J_d)
        est_d = estimate_moments(J_d, mf, gap_budget, sampler="restricted",
                                 seed=cfg.seed, name=f"gap-d{d}")
        gap, gap_se = _paired_gap(est_cw, est_d)
        return d, eps, est, deviation, (gap, gap_se)

    measured = _map_jobs(measure, list(cfg.d_list), jobs)

    rows = []
    records = []
    ratios = {}
    for d, eps, est, deviation, (gap, gap_se) in measured:
        rate = eps + 1.0 / n
        kl_envelope = n * beta * rate
        naive_envelope = math.sqrt(
            math.sqrt(math.log(n) / n) + math.sqrt(beta * rate)
        )
        naive_estimate = math.sqrt(
            math.sqrt(math.log(n) / n) + math.sqrt(max(est.value, 0.0) / n)
        )
        stein_rate = k * beta * rate
        ratios[d] = naive_envelope / stein_rate
        rows.append(_row(
            cfg, d=d, estimator="symmetric_kl", value=est.value, se=est.se,
            epsilon=eps, kl_envelope=kl_envelope, spectral_gap_norm=deviation,
            naive_envelope=naive_envelope, naive_estimate=naive_estimate,
            stein_rate=stein_rate, stein_with_c_hat=k * c_hat * rate,
            measured_gap=gap, measured_gap_se=gap_se,
        ))
        records.append(CheckRecord(
            check_name=f"kl_lemma_envelope_d{d}", n=n, beta=beta,
            lhs=est.value, rhs=kl_envelope + slack * est.se,
            passed=bool(est.value <= kl_envelope + slack * est.se),
            extra={"deviation_norm": deviation, "se": est.se},
        ))

    d_top = cfg.d_list[-1]
    eps_top = next(eps for d, eps, _, _, _ in measured if d == d_top)
    rate_top = eps_top + 1.0 / n
    records.append(CheckRecord(
        check_name=f"stein_below_naive_d{d_top}", n=n, beta=beta,
        lhs=k * beta * rate_top,
        rhs=math.sqrt(math.sqrt(math.log(n) / n) + math.sqrt(beta * rate_top)),
        passed=bool(
            k * beta * rate_top
            < math.sqrt(math.sqrt(math.log(n) / n) + math.sqrt(beta * rate_top))
        ),
        extra={"epsilon": eps_top},
    ))
    d_first = cfg.d_list[0]
    records.append(CheckRecord(
        check_name="envelope_advantage_grows", n=n, beta=beta,
        lhs=ratios[d_first], rhs=ratios[d_top],
        passed=bool(ratios[d_top] > ratios[d_first]),
        extra={"ratios": {str(d): ratios[d] for d in cfg.d_list}},
    ))

    # identical models collapse to the noise floor
    est_same = estimate_symmetric_kl(cw, cw, max(cfg.budget // 10, 30),
                                     sampler="restricted", seed=cfg.seed,
                                     name="skl-self")
    rows.append(_row(cfg, d=n - 1, estimator="symmetric_kl_self",
                     value=est_same.value, se=est_same.se,
                     epsilon="", kl_envelope=0.0, spectral_gap_norm=0.0,
                     naive_envelope="", naive_estimate="", stein_rate="",
                     stein_with_c_hat="", measured_gap="", measured_gap_se=""))
    records.append(CheckRecord(
        check_name="identical_models_collapse", n=n, beta=beta,
        lhs=abs(est_same.value), rhs=max(slack * est_same.se, 1e-12),
        passed=bool(abs(est_same.value) <= max(slack * est_same.se, 1e-12)),
        extra={},
    ))

    summary = {
        "ratios": {str(d): ratios[d] for d in cfg.d_list},
        "c_hat": c_hat,
    }
    return ExperimentResult("naive-vs-stein", cfg, rows, records, summary)


def delta_h_study(cfg, jobs=1):
    """Discrete derivatives of the restricted solution, and escape tails.

    At enumerable size the solution of the restricted-kernel equation is
    differentiated exactly: its maximum over the high-magnetization
    region is checked against 4/gamma* (with slack -- the claim is
    asymptotic) and the complement against an n log n envelope.  At
    sampling scale the study measures how often the coupled y-chain's
    magnetization falls to the lower band by each horizon and tabulates
    the union-bound envelope K^2 alpha^(r-2) beside it; at desk sizes the
    envelope is vacuous (above one) and the measured fraction is large,
    which the report records honestly.
    """
    from .exact import (
        discrete_derivatives,
        derivative_bound_region_check,
        exact_distribution,
        glauber_kernel,
        mu_plus_law,
        restricted_states,
        solve_poisson,
        state_spins,
        _spin_sums,
    )

    beta = cfg.beta
    n_exact = int(cfg.extras.get("n_exact", "12"))
    profile = contraction_profile(beta)
    slack = cfg.tol("slack")

    mf = MomentFunction.create(n_exact, 2)
    f_values = mf.evaluate_batch(state_spins(n_exact))

    rows = []
    records = []

    region_record = derivative_bound_region_check(beta, n_exact, f_values,
                                                  slack=slack)
    records.append(region_record)
    rows.append(_row(cfg, n=n_exact, d="", estimator="max_delta_h_high_region",
                     value=region_record.lhs, se=0.0, bound=region_record.rhs))

    # complement region against the global n log n envelope
    J_small = curie_weiss(n_exact, beta)
    dist = exact_distribution(J_small)
    kernel = glauber_kernel(J_small, "restricted")
    states = restricted_states(n_exact)
    sol = solve_poisson(kernel, mu_plus_law(dist), f_values[states])
    deltas = np.abs(discrete_derivatives(sol.h, n_exact, states=states))
    mags = _spin_sums(n_exact)[states] / n_exact
    floor = profile.s2_lattice(n_exact) + 2.0 / n_exact
    complement = mags < floor - 1e-12
    lhs_comp = float(deltas[complement].max())
    envelope_comp = n_exact * math.log(n_exact) * (1.0 + slack)
    records.append(CheckRecord(
        check_name="delta_h_complement_envelope", n=n_exact, beta=beta,
        lhs=lhs_comp, rhs=envelope_comp,
        passed=bool(lhs_comp <= envelope_comp),
        extra={"region_floor": floor, "states": int(complement.sum())},
    ))
    rows.append(_row(cfg, n=n_exact, d="", estimator="max_delta_h_complement",
                     value=lhs_comp, se=0.0, bound=envelope_comp))

    # constant observable: the solution is flat
    sol_const = solve_poisson(kernel, mu_plus_law(dist),
                              np.full(len(states), 0.7))
    flat = float(np.abs(
        discrete_derivatives(sol_const.h, n_exact, states=states)
    ).max())
    records.append(CheckRecord(
        check_name="constant_observable_flat_solution", n=n_exact, beta=beta,
        lhs=flat, rhs=1e-9, passed=bool(flat <= 1e-9), extra={},
    ))

    # sampling scale: escape fractions and the union-bound envelope
    n = cfg.n
    J = curie_weiss(n, beta)
    horizon = n * n
    report = contraction_check(
        J, profile, cfg.trials, seed=cfg.seed,
        checkpoints=[n, 5 * n, 25 * n, horizon], jobs=jobs,
    )
    band = band_comparison_chain(n, profile)
    envelope_base = band.alpha ** (band.r - 2)
    se_slack = cfg.tol("se_slack")
    for k_horizon in (n, 5 * n, 25 * n, horizon):
        phat = report.tau1_fraction(k_horizon)
        se = math.sqrt(max(phat * (1.0 - phat), 1.0 / cfg.trials) / cfg.trials)
        envelope = k_horizon * k_horizon * envelope_base
        rows.append(_row(cfg, d="", estimator=f"escape_fraction_K{k_horizon}",
                         value=phat, se=se, bound=envelope))
        records.append(CheckRecord(
            check_name=f"escape_tail_K{k_horizon}", n=n, beta=beta,
            lhs=phat, rhs=min(envelope, 1.0) + se_slack * se,
            passed=bool(phat <= min(envelope, 1.0) + se_slack * se),
            extra={"envelope": envelope, "vacuous": bool(envelope >= 1.0),
                   "alpha": band.alpha, "band_states": band.r},
        ))

    summary = {
        "gamma_star": profile.gamma_star,
        "derivative_bound": 4.0 / profile.gamma_star,
        "escape_fraction_horizon": report.tau1_fraction(horizon),
        "band_alpha": band.alpha,
        "band_states": band.r,
    }
    return ExperimentResult("delta-h", cfg, rows, records, summary)


EXPERIMENTS = {
    "moments": moment_comparison,
    "cliques": clique_counterexample,
    "high-temperature": high_temperature_scan,
    "dobrushin": dobrushin_perturbation,
    "concentration": concentration_check,
    "naive-vs-stein": naive_vs_stein,
    "delta-h": delta_h_study,
}


def run_experiment(name, overrides=None, jobs=1):
    """Config -> result for one named experiment."""
    cfg = make_config(name, overrides)
    return EXPERIMENTS[name](cfg, jobs=jobs)
