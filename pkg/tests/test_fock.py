import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonic_qcbm.errors import InputError, ResourceError
from photonic_qcbm.fock import (
    DistributionTable,
    FockState,
    enumerate_fock,
    fock_dimension,
    fock_space,
    ideal_distribution,
    is_lex_sorted,
    output_probability,
    permanent,
    permanents,
    sample_categorical,
)

from oracles import dense_fock_evolution, fock_basis, permanent_by_permutations, random_unitary


def test_permanent_small_closed_forms():
    assert permanent(np.zeros((0, 0))) == 1
    assert permanent([[3.0]]) == 3
    assert permanent([[1, 2], [3, 4]]) == pytest.approx(10)
    # Per(J_n) = n!
    for n in range(1, 7):
        assert permanent(np.ones((n, n))).real == pytest.approx(math.factorial(n))


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_permanent_matches_permutation_sum(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ref = permanent_by_permutations(a)
    assert abs(permanent(a) - ref) <= 1e-10 * abs(ref)


def test_batched_permanents_agree_with_single(rng):
    batch = rng.normal(size=(7, 4, 4)) + 1j * rng.normal(size=(7, 4, 4))
    single = np.array([permanent(a) for a in batch])
    assert np.allclose(permanents(batch), single, atol=1e-12)


def test_permanent_rejects_bad_shapes():
    with pytest.raises(InputError):
        permanent(np.ones((2, 3)))
    with pytest.raises(ResourceError):
        permanent(np.ones((21, 21)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_permanent_invariant_under_row_permutation_and_transpose(n, seed):
    gen = np.random.default_rng(seed)
    a = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    p = permanent(a)
    perm = gen.permutation(n)
    assert abs(permanent(a[perm]) - p) <= 1e-9 * max(1, abs(p))
    assert abs(permanent(a.T) - p) <= 1e-9 * max(1, abs(p))


def test_fock_dimension_and_order():
    for m, n in [(1, 3), (3, 2), (4, 3), (6, 2)]:
        space = fock_space(m, n)
        assert len(space) == fock_dimension(m, n) == math.comb(n + m - 1, n)
        assert is_lex_sorted(space)
        assert [tuple(r) for r in space.tolist()] == fock_basis(m, n)
        assert np.all(space.sum(axis=1) == n)


def test_enumerate_fock_returns_states():
    states = enumerate_fock(3, 2)
    assert states[0] == FockState((0, 0, 2))
    assert states[-1] == FockState((2, 0, 0))


def test_fock_space_is_read_only():
    with pytest.raises(ValueError):
        fock_space(3, 2)[0, 0] = 5


def test_fock_state_validation():
    with pytest.raises(InputError):
        FockState((1, -1))
    s = FockState((1, 0, 2))
    assert s.photon_count() == 3 and s.m == 3 and not s.is_collision_free()


def test_ideal_distribution_matches_dense_oracle(rng):
    u = random_unitary(4, rng)
    state = (1, 0, 1, 1)
    table = ideal_distribution(u, FockState(state))
    oracle = dense_fock_evolution(u, state)
    for s, p in oracle.items():
        assert table.prob(s) == pytest.approx(p, abs=1e-12)


def test_hong_ou_mandel_dip():
    bs = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    table = ideal_distribution(bs, (1, 1))
    assert table.prob((1, 1)) == pytest.approx(0.0, abs=1e-15)
    assert table.prob((2, 0)) == pytest.approx(0.5)


def test_output_probability_agrees_with_table(rng):
    u = random_unitary(3, rng)
    table = ideal_distribution(u, (2, 1, 0))
    for row in table.space:
        assert output_probability(u, (2, 1, 0), row) == pytest.approx(table.prob(row), abs=1e-14)


def test_identity_interferometer_is_deterministic():
    table = ideal_distribution(np.eye(4), (0, 2, 1, 0))
    assert table.prob((0, 2, 1, 0)) == pytest.approx(1.0)


def test_non_unitary_and_mismatched_inputs_raise():
    with pytest.raises(InputError):
        ideal_distribution(2 * np.eye(3), (1, 0, 0))
    with pytest.raises(InputError):
        ideal_distribution(np.eye(3), (1, 0))
    with pytest.raises(InputError):
        output_probability(np.eye(2), (1, 0), (1, 1))


def test_distribution_table_validation():
    space = fock_space(2, 1)
    with pytest.raises(InputError):
        DistributionTable(space, [0.5, 0.6])
    with pytest.raises(InputError):
        DistributionTable(space[::-1], [0.5, 0.5])
    with pytest.raises(InputError):
        DistributionTable(space, [1.5, -0.5])
    t = DistributionTable(space, [0.25, 0.75])
    assert t.prob((1, 0)) == 0.75
    with pytest.raises(KeyError):
        t.index((2, 0))


def test_sample_categorical_reproducible_and_total(rng):
    table = ideal_distribution(random_unitary(3, rng), (1, 1, 0))
    a = sample_categorical(table, 10_000, 5)
    b = sample_categorical(table, 10_000, 5)
    assert np.array_equal(a, b)
    assert a.sum() == 10_000
    c = sample_categorical(table, 10_000, 5, chunks=4)
    assert c.sum() == 10_000
    assert np.array_equal(c, sample_categorical(table, 10_000, 5, chunks=4))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_ideal_distribution_normalised_and_nonnegative(m, n, seed):
    gen = np.random.default_rng(seed)
    occ = [0] * m
    for k in gen.integers(0, m, size=n):
        occ[k] += 1
    table = ideal_distribution(random_unitary(m, gen), occ)
    assert np.all(table.probs >= 0)
    assert abs(table.probs.sum() - 1) < 1e-12


def test_permanent_trivial_values():
    assert permanent(np.eye(3)) == pytest.approx(1.0)
    assert permanent(np.ones((2, 2))) == pytest.approx(2.0)


def test_enumeration_edge_cases():
    assert [s.occupations for s in enumerate_fock(2, 1)] == [(0, 1), (1, 0)]
    assert len(enumerate_fock(12, 4)) == 1365
    assert [s.occupations for s in enumerate_fock(3, 0)] == [(0, 0, 0)]


def test_single_photon_probability_is_squared_entry(rng):
    u = random_unitary(4, rng)
    for i in range(4):
        inp = [0] * 4
        inp[i] = 1
        for j in range(4):
            out = [0] * 4
            out[j] = 1
            assert output_probability(u, inp, out) == pytest.approx(abs(u[j, i]) ** 2, abs=1e-15)


def test_beamsplitter_element_hong_ou_mandel():
    from photonic_qcbm.mesh import mz_block

    table = ideal_distribution(mz_block(0.0, np.pi / 2), (1, 1))
    assert table.as_dict() == pytest.approx({(0, 2): 0.5, (1, 1): 0.0, (2, 0): 0.5}, abs=1e-15)


def test_point_mass_sampling():
    table = DistributionTable(fock_space(2, 1), [0.0, 1.0])
    assert list(sample_categorical(table, 100, 0)) == [0, 100]


def test_uniform_sampling_within_five_sigma():
    table = DistributionTable(fock_space(4, 1), np.full(4, 0.25))
    counts = sample_categorical(table, 1_000_000, 2024)
    sigma = np.sqrt(1_000_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 250_000) <= 5 * sigma)
