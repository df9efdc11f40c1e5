"""Model layer: interaction matrices, spin validation, moment observables."""

import math

import numpy as np
import pytest

from stein_ising import ising
from stein_ising.ising import (
    InteractionMatrix,
    MomentFunction,
    as_spins,
    conditional_prob_plus,
    curie_weiss,
    hamiltonian,
    lattice_round,
    load_interaction,
    local_field,
    magnetization,
    random_interaction,
    save_interaction,
)


# -- spin validation ----------------------------------------------------------


def test_as_spins_accepts_plus_minus_one_lists():
    x = as_spins([1, -1, 1])
    assert x.dtype == np.int8
    assert x.tolist() == [1, -1, 1]


def test_as_spins_rejects_zero_and_other_values():
    with pytest.raises(ValueError):
        as_spins([1, 0, -1])
    with pytest.raises(ValueError):
        as_spins([2, 1, 1])


def test_as_spins_enforces_expected_length():
    with pytest.raises(ValueError):
        as_spins([1, -1], n=3)


def test_magnetization_is_mean_spin():
    assert magnetization(as_spins([1, 1, -1, 1])) == pytest.approx(0.5)


def test_lattice_round_floors_to_the_magnetization_lattice():
    # lattice values for n spins are (2k - n)/n; the round is a floor
    assert lattice_round(0.5, 6) == pytest.approx(1.0 / 3.0)
    assert lattice_round(0.33, 6) == pytest.approx(0.0)
    assert lattice_round(0.4, 5) == pytest.approx(0.2)
    assert lattice_round(1.0, 8) == pytest.approx(1.0)


# -- interaction matrices ------------------------------------------------------


def test_curie_weiss_entries():
    J = curie_weiss(5, 1.2)
    dense = J.dense()
    off = dense[~np.eye(5, dtype=bool)]
    assert np.allclose(off, 1.2 / 5)
    assert np.all(np.diag(dense) == 0.0)
    assert J.uniform_coupling == pytest.approx(1.2 / 5)


def test_random_interaction_is_symmetric_zero_diagonal_bounded(rng):
    J = random_interaction(7, 0.3, rng)
    dense = J.dense()
    assert np.array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0.0)
    assert np.abs(dense).max() <= 0.3 + 1e-12


def test_layouts_agree_on_matvec_quad_form_and_rows(rng):
    J = random_interaction(6, 0.5, rng)
    dense = J.dense()
    sparse = InteractionMatrix(6, csr=J.csr())
    x = as_spins(np.where(rng.random(6) < 0.5, 1, -1))
    xf = x.astype(float)
    assert np.allclose(J.matvec(x), dense @ xf)
    assert np.allclose(sparse.matvec(x), dense @ xf)
    assert J.quad_form(x) == pytest.approx(xf @ dense @ xf)
    for i in range(6):
        assert np.allclose(J.row(i), dense[i])
        assert np.allclose(sparse.row(i), dense[i])


def test_uniform_layout_matches_dense_construction():
    J = curie_weiss(8, 0.7)
    explicit = InteractionMatrix(8, dense=J.dense())
    x = as_spins([1, -1, 1, 1, -1, -1, 1, -1])
    assert J.quad_form(x) == pytest.approx(explicit.quad_form(x))
    assert np.allclose(J.matvec(x), explicit.matvec(x))


def test_scaled_multiplies_every_entry(rng):
    J = random_interaction(5, 0.4, rng)
    assert np.allclose(J.scaled(0.5).dense(), 0.5 * J.dense())


def test_hamiltonian_and_local_field_definitions(rng):
    J = random_interaction(6, 0.3, rng)
    x = as_spins(np.where(rng.random(6) < 0.5, 1, -1))
    dense = J.dense()
    xf = x.astype(float)
    assert hamiltonian(J, x) == pytest.approx(0.5 * xf @ dense @ xf)
    for i in range(6):
        assert local_field(J, x, i) == pytest.approx(dense[i] @ xf)


def test_conditional_prob_plus_is_heat_bath(rng):
    J = random_interaction(5, 0.6, rng)
    x = as_spins([1, -1, 1, -1, 1])
    for i in range(5):
        field = local_field(J, x, i)
        assert conditional_prob_plus(J, x, i) == pytest.approx(
            0.5 * (1.0 + math.tanh(field))
        )


def test_conditional_prob_matches_gibbs_ratio(rng):
    # heat-bath conditional equals the two-point Gibbs conditional
    J = random_interaction(4, 0.5, rng)
    x = as_spins([1, 1, -1, 1])
    for i in range(4):
        up = x.copy()
        up[i] = 1
        down = x.copy()
        down[i] = -1
        w_up = math.exp(hamiltonian(J, up))
        w_down = math.exp(hamiltonian(J, down))
        assert conditional_prob_plus(J, x, i) == pytest.approx(
            w_up / (w_up + w_down)
        )


def test_interaction_file_round_trip(tmp_path, rng):
    J = random_interaction(6, 0.3, rng)
    path = tmp_path / "coupling.txt"
    save_interaction(J, path)
    back = load_interaction(path)
    assert back.n == 6
    assert np.array_equal(back.dense(), J.dense())


def test_load_interaction_rejects_bad_indices(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3\n2 1 0.5\n")
    with pytest.raises(ValueError):
        load_interaction(path)


# -- moment observables --------------------------------------------------------


def test_moment_function_enumerates_all_pairs():
    mf = MomentFunction.create(6, 2)
    assert mf.exhaustive
    assert mf.num_subsets == 15
    assert len({tuple(s) for s in mf.subsets}) == 15


def test_moment_function_value_is_normalized_signed_product_sum(rng):
    mf = MomentFunction.create(6, 2)
    x = as_spins(np.where(rng.random(6) < 0.5, 1, -1))
    prods = np.prod(x[mf.subsets], axis=1)
    assert mf.normalization == pytest.approx(1.0 / (mf.k**2 * mf.num_subsets))
    assert mf.evaluate(x) == pytest.approx(mf.normalization * float(mf.signs @ prods))


def test_moment_function_batch_matches_single_evaluation(rng):
    mf = MomentFunction.create(8, 4, signs="random", rng=rng)
    X = np.where(rng.random((10, 8)) < 0.5, 1, -1).astype(np.int8)
    batch = mf.evaluate_batch(X)
    assert batch.shape == (10,)
    for row, expected in zip(X, batch):
        assert mf.evaluate(row) == pytest.approx(expected)


def test_moment_function_sampling_branch_draws_distinct_subsets():
    rng = np.random.default_rng(7)
    mf = MomentFunction.create(64, 2, exhaustive_cap=0, sample_size=50, rng=rng)
    assert not mf.exhaustive
    assert mf.num_subsets == 50
    assert len({tuple(s) for s in mf.subsets}) == 50
    assert np.all((0 <= mf.subsets) & (mf.subsets < 64))


def test_moment_function_sampling_caps_at_available_subsets():
    # Asking for more distinct subsets than C(n, k) must terminate and
    # return every subset rather than loop forever.
    rng = np.random.default_rng(11)
    mf = MomentFunction.create(6, 2, exhaustive_cap=0, sample_size=10_000, rng=rng)
    assert mf.num_subsets == 15
    assert len({tuple(s) for s in mf.subsets}) == 15


def test_moment_function_sampling_is_seed_deterministic():
    a = MomentFunction.create(64, 2, exhaustive_cap=0, sample_size=40,
                              rng=np.random.default_rng(3))
    b = MomentFunction.create(64, 2, exhaustive_cap=0, sample_size=40,
                              rng=np.random.default_rng(3))
    assert np.array_equal(a.subsets, b.subsets)


def test_moment_function_rejects_odd_subset_size():
    with pytest.raises(ValueError):
        MomentFunction.create(6, 3)


def test_moment_function_even_under_global_flip(rng):
    # even subset size makes the observable invariant under x -> -x
    mf = MomentFunction.create(8, 2, signs="random", rng=rng)
    x = as_spins(np.where(rng.random(8) < 0.5, 1, -1))
    assert mf.evaluate(x) == pytest.approx(mf.evaluate(-x))


def test_conditional_tv_between_two_models(rng):
    # TV between single-site conditionals equals half the tanh difference
    L = random_interaction(5, 0.4, rng)
    M = random_interaction(5, 0.4, rng)
    x = as_spins([1, -1, -1, 1, 1])
    for i in range(5):
        expected = abs(
            conditional_prob_plus(L, x, i) - conditional_prob_plus(M, x, i)
        )
        assert ising.conditional_tv(L, M, x, i) == pytest.approx(expected)
