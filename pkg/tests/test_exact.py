"""Exact enumeration engine: Gibbs laws, kernels, the comparison machinery.

Oracles here are recomputed inside the tests with plain numpy (explicit
state enumeration), independently of the module under test.
"""

import math

import numpy as np
import pytest
import scipy.stats

from stein_ising import exact
from stein_ising.exact import (
    detailed_balance_violation,
    derivative_bound_region_check,
    discrete_derivatives,
    dobrushin_bound_check,
    exact_distribution,
    glauber_kernel,
    kernel_stationary,
    mu_plus_law,
    restricted_states,
    solution_spread,
    solve_poisson,
    spectral_tv_bound_check,
    spins_to_index,
    state_spins,
    stationary_law,
    stein_report,
    symmetric_kl_exact,
    symmetric_kl_report,
    symmetric_solution_gap,
    verify_battery,
    wasserstein_pushforward,
)
from stein_ising.graphs import interaction_from_graph, random_regular
from stein_ising.ising import curie_weiss, random_interaction


def _gibbs_oracle(J):
    """Independent Gibbs law: direct log-weight enumeration."""
    dense = J.dense()
    spins = state_spins(J.n).astype(float)
    logw = 0.5 * np.einsum("si,ij,sj->s", spins, dense, spins)
    w = np.exp(logw - logw.max())
    return w / w.sum()


# -- state indexing and distributions -------------------------------------------


def test_state_spins_and_index_round_trip():
    spins = state_spins(4)
    assert spins.shape == (16, 4)
    for idx, row in enumerate(spins):
        assert spins_to_index(row) == idx
    # bit i set <=> spin i positive
    assert spins_to_index([1, -1, -1]) == 1
    assert spins_to_index([-1, 1, 1]) == 6


def test_exact_distribution_two_site_hand_oracle():
    from stein_ising.ising import InteractionMatrix

    a = 0.37
    J = InteractionMatrix(2, dense=np.array([[0.0, a], [a, 0.0]]))
    dist = exact_distribution(J)
    z = 2 * math.exp(a) + 2 * math.exp(-a)
    # states ordered (-,-), (+,-), (-,+), (+,+)
    assert np.allclose(dist.probs,
                       [math.exp(a) / z, math.exp(-a) / z,
                        math.exp(-a) / z, math.exp(a) / z])


def test_exact_distribution_matches_log_weight_oracle(rng):
    J = random_interaction(7, 0.5, rng)
    dist = exact_distribution(J)
    assert np.allclose(dist.probs, _gibbs_oracle(J), atol=1e-12)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(np.exp(dist.log_probs), dist.probs)


def test_exact_distribution_expectation_and_symmetry(rng):
    J = curie_weiss(6, 1.1)
    dist = exact_distribution(J)
    mag = state_spins(6).mean(axis=1)
    assert dist.expectation(mag) == pytest.approx(0.0, abs=1e-12)
    assert dist.expectation(mag**2) > 0.1


def test_exact_distribution_rejects_large_systems():
    with pytest.raises(ValueError):
        exact_distribution(curie_weiss(20, 0.5))


# -- kernels ---------------------------------------------------------------------


@pytest.mark.parametrize("flavor", ["plain", "restricted"])
def test_kernel_rows_are_distributions(flavor, rng):
    J = random_interaction(6, 0.4, rng)
    kern = glauber_kernel(J, flavor)
    rows = np.asarray(kern.matrix.sum(axis=1)).ravel()
    assert np.allclose(rows, 1.0, atol=1e-12)
    assert kern.num_states == (64 if flavor == "plain" else len(restricted_states(6)))


def test_plain_kernel_detailed_balance(rng):
    for n in (5, 6):
        J = random_interaction(n, 0.5, rng)
        kern = glauber_kernel(J, "plain")
        assert detailed_balance_violation(kern) <= 1e-12


def test_plain_kernel_stationary_law_is_gibbs(rng):
    J = random_interaction(6, 0.5, rng)
    kern = glauber_kernel(J, "plain")
    assert np.allclose(kernel_stationary(kern), _gibbs_oracle(J), atol=1e-10)


def test_restricted_kernel_reversible_at_odd_n(rng):
    J = random_interaction(7, 0.5, rng)
    kern = glauber_kernel(J, "restricted")
    assert detailed_balance_violation(kern) <= 1e-12


def test_restricted_kernel_even_n_flux_asymmetry():
    # at even n the zero-magnetization boundary carries an asymmetric
    # probability flux: the half-space law is stationary (checked below)
    # but the chain is *not* reversible there
    kern = glauber_kernel(curie_weiss(6, 1.0), "restricted")
    law = kernel_stationary(kern)
    assert np.max(np.abs(kern.matrix.T @ law - law)) <= 1e-12
    assert detailed_balance_violation(kern, law) > 1e-6


@pytest.mark.parametrize("n,beta", [(5, 1.2), (6, 1.2), (7, 0.8), (8, 1.5)])
def test_restricted_stationary_law_is_halved_gibbs(n, beta):
    J = curie_weiss(n, beta)
    dist = exact_distribution(J)
    law = kernel_stationary(glauber_kernel(J, "restricted"))
    expected = mu_plus_law(dist)
    assert np.max(np.abs(law - expected)) <= 1e-10


def test_restricted_stationary_law_random_model_odd_n(rng):
    # odd n has no boundary states, so the halved law is stationary for
    # any symmetric interaction, not just permutation-invariant ones
    J = random_interaction(7, 0.6, rng)
    law = kernel_stationary(glauber_kernel(J, "restricted"))
    assert np.max(np.abs(law - mu_plus_law(exact_distribution(J)))) <= 1e-10


def test_mu_plus_law_doubles_positive_mass():
    n = 6
    J = curie_weiss(n, 1.0)
    dist = exact_distribution(J)
    states = restricted_states(n)
    sums = state_spins(n)[states].sum(axis=1)
    law = mu_plus_law(dist)
    assert law.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(law[sums > 0], 2.0 * dist.probs[states][sums > 0])
    assert np.allclose(law[sums == 0], dist.probs[states][sums == 0])


def test_mu_plus_law_preserves_even_expectations():
    # restricted sampling computes even observables' full-space means
    n = 6
    J = curie_weiss(n, 1.3)
    dist = exact_distribution(J)
    states = restricted_states(n)
    mag2 = state_spins(n).mean(axis=1) ** 2
    restricted_mean = float(mu_plus_law(dist) @ mag2[states])
    assert restricted_mean == pytest.approx(dist.expectation(mag2), abs=1e-12)


# -- Poisson equation -------------------------------------------------------------


def test_principal_solution_matches_truncated_series(rng):
    n, T = 5, 200 * 5
    J = curie_weiss(n, 0.6)
    kern = glauber_kernel(J, "plain")
    mu = kernel_stationary(kern)
    f = rng.uniform(-1.0, 1.0, size=1 << n)
    sol = solve_poisson(kern, mu, f)
    assert sol.residual_norm <= 1e-10
    assert sol.centering_error <= 1e-10
    # oracle: h = sum_{t<T} P^t (f - mu f)
    P = kern.matrix.toarray() if hasattr(kern.matrix, "toarray") else np.asarray(kern.matrix)
    g = f - float(mu @ f)
    term, acc = g.copy(), np.zeros_like(g)
    for _ in range(T):
        acc += term
        term = P @ term
    assert np.max(np.abs(sol.h - acc)) <= 1e-6


def test_poisson_equation_identity(rng):
    J = random_interaction(6, 0.4, rng)
    kern = glauber_kernel(J, "plain")
    mu = kernel_stationary(kern)
    f = rng.uniform(-1.0, 1.0, size=64)
    sol = solve_poisson(kern, mu, f)
    P = kern.matrix.toarray() if hasattr(kern.matrix, "toarray") else np.asarray(kern.matrix)
    lhs = sol.h - P @ sol.h
    assert np.max(np.abs(lhs - (f - float(mu @ f)))) <= 1e-9


def test_poisson_solver_iterative_path_keeps_contract(rng):
    # state spaces above 2^10 switch to the sparse iterative solver;
    # the residual/centering contract must not degrade
    J = curie_weiss(11, 0.8)
    kern = glauber_kernel(J, "plain")
    mu = kernel_stationary(kern)
    f = rng.uniform(-1.0, 1.0, size=1 << 11)
    sol = solve_poisson(kern, mu, f)
    assert sol.residual_norm <= 1e-10
    assert sol.centering_error <= 1e-10


def test_solution_spread_constant_observable():
    J = curie_weiss(6, 1.2)
    assert solution_spread(J, np.ones(64)) <= 1e-9


# -- comparison bounds -------------------------------------------------------------


def test_single_site_comparison_bound_random_pairs(rng):
    for _ in range(5):
        L = random_interaction(5, 0.3, rng)
        M = random_interaction(5, 0.3, rng)
        f = rng.uniform(-1.0, 1.0, size=32)
        rep = stein_report(exact_distribution(L), exact_distribution(M),
                           glauber_kernel(L, "plain"), f)
        assert rep.holds
        assert rep.lhs <= rep.rhs_main + 1e-10
        # lhs is the plain expectation gap
        direct = abs(exact_distribution(L).expectation(f)
                     - exact_distribution(M).expectation(f))
        assert rep.lhs == pytest.approx(direct, abs=1e-12)
        # expectation gaps never exceed the 1-Wasserstein distance of f-laws
        assert rep.lhs <= rep.wasserstein + 1e-12


def test_dobrushin_comparison_bound(rng):
    from stein_ising.graphs import abs_operator_norm

    for _ in range(5):
        L = random_interaction(6, 0.3, rng)
        L = L.scaled(0.9 * rng.uniform(0.3, 1.0) / abs_operator_norm(L))
        M = random_interaction(6, 0.3, rng)
        f = rng.uniform(-1.0, 1.0, size=64)
        rec = dobrushin_bound_check(L, M, f)
        assert rec.passed
        assert rec.lhs <= rec.rhs + 1e-10


def test_dobrushin_small_perturbation_case():
    L = curie_weiss(8, 0.5)
    rec = dobrushin_bound_check(L, L.scaled(1.1),
                                state_spins(8).mean(axis=1))
    assert rec.passed


def test_per_state_spectral_bound(rng):
    L = random_interaction(5, 0.4, rng)
    M = random_interaction(5, 0.4, rng)
    f_table = rng.uniform(-1.0, 1.0, size=(5, 32))
    rec = spectral_tv_bound_check(L, M, f_table)
    assert rec.passed
    assert rec.check_name == "spectral_tv_bound"


# -- divergences --------------------------------------------------------------------


def test_symmetric_kl_exact_identical_models_vanish():
    J = curie_weiss(6, 0.9)
    assert symmetric_kl_exact(J, J) == pytest.approx(0.0, abs=1e-12)


def test_symmetric_kl_exact_matches_direct_sum(rng):
    L = random_interaction(6, 0.4, rng)
    M = random_interaction(6, 0.4, rng)
    p = _gibbs_oracle(L)
    q = _gibbs_oracle(M)
    direct = float(np.sum((p - q) * (np.log(p) - np.log(q))))
    assert symmetric_kl_exact(L, M) == pytest.approx(direct, rel=1e-9)
    assert symmetric_kl_exact(M, L) == pytest.approx(direct, rel=1e-9)


def test_symmetric_kl_envelope_complete_vs_regular():
    beta = 0.9
    graph = random_regular(8, 3, seed=5)
    rec = symmetric_kl_report(curie_weiss(8, beta),
                              interaction_from_graph(graph, beta),
                              beta=beta)
    assert rec.passed
    assert rec.lhs <= rec.rhs


# -- symmetric solutions and derivative tables ---------------------------------------


def test_symmetric_solution_identity_even_observables(rng):
    n = 6
    J = curie_weiss(n, 1.2)
    mag2 = state_spins(n).mean(axis=1) ** 2
    assert symmetric_solution_gap(J, mag2) <= 1e-9
    # a random even observable: symmetrize under global flip
    f = rng.uniform(-1.0, 1.0, size=1 << n)
    mask = (1 << n) - 1
    f = 0.5 * (f + f[mask ^ np.arange(1 << n)])
    assert symmetric_solution_gap(J, f) <= 1e-9


def test_symmetric_solution_gap_rejects_odd_observables():
    n = 5
    mag = state_spins(n).mean(axis=1)
    with pytest.raises(ValueError):
        symmetric_solution_gap(curie_weiss(n, 1.2), mag)


def test_discrete_derivatives_hand_oracle(rng):
    n = 3
    g = rng.normal(size=8)
    table = discrete_derivatives(g, n)
    for idx in range(8):
        for i in range(n):
            up = idx | (1 << i)
            down = idx & ~(1 << i)
            assert table[idx, i] == pytest.approx(g[up] - g[down])


def test_discrete_derivatives_half_space_symmetric_extension(rng):
    n = 5
    states = restricted_states(n)
    mask = (1 << n) - 1
    half = rng.normal(size=len(states))
    # build the even full-space extension by hand, then compare rows
    full = np.empty(1 << n)
    full[states] = half
    full[mask ^ states] = half
    expected = discrete_derivatives(full, n)[states]
    assert np.allclose(discrete_derivatives(half, n, states=states), expected)


def test_derivative_bound_region_check_flags_and_fields():
    mag2 = state_spins(10).mean(axis=1) ** 2
    rec = derivative_bound_region_check(1.2, 10, mag2)
    assert rec.check_name == "derivative_bound_region"
    assert np.isfinite(rec.lhs) and rec.lhs >= 0.0
    assert rec.rhs > 0.0
    flat = derivative_bound_region_check(1.2, 10, np.ones(1 << 10))
    assert flat.lhs <= 1e-9


# -- scalar-law transport -------------------------------------------------------------


def test_wasserstein_pushforward_matches_scipy(rng):
    L = random_interaction(5, 0.5, rng)
    M = random_interaction(5, 0.5, rng)
    f = rng.normal(size=32)
    mu, nu = exact_distribution(L), exact_distribution(M)
    expected = scipy.stats.wasserstein_distance(
        f, f, u_weights=mu.probs, v_weights=nu.probs
    )
    assert wasserstein_pushforward(f, mu, nu) == pytest.approx(expected, rel=1e-9)


# -- bundled battery ----------------------------------------------------------------


def test_verify_battery_all_green_and_deterministic():
    records = verify_battery(6, 0.8, trials=5, seed=42)
    assert len(records) == 5 * 3 + 7
    assert all(rec.passed for rec in records)
    again = verify_battery(6, 0.8, trials=5, seed=42)
    assert [(r.check_name, r.lhs, r.rhs) for r in records] == [
        (r.check_name, r.lhs, r.rhs) for r in again
    ]


def test_verify_battery_covers_every_check_family():
    names = {rec.check_name for rec in verify_battery(5, 0.8, trials=2, seed=1)}
    assert names == {
        "stein_main", "dobrushin_comparison", "spectral_tv_bound",
        "stein_cw_vs_regular", "symmetric_kl_envelope",
        "kernel_plain_contract", "kernel_restricted_contract",
        "restricted_stationary_law", "symmetric_solution_identity",
        "poisson_contract",
    }
