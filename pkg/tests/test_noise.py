import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonic_qcbm.errors import InputError, ResourceError
from photonic_qcbm.fock import ideal_distribution
from photonic_qcbm.noise import (
    ClickPattern,
    LossModel,
    LossyCounts,
    click_codes,
    click_space,
    decode,
    encode,
    exact_lossy_distribution,
    lossy_sample,
    stratify,
    threshold_map,
)

from oracles import random_unitary


def test_click_pattern_codes_follow_lex_order():
    space = click_space(4)
    codes = encode(space)
    assert np.array_equal(codes, np.arange(16))
    assert np.array_equal(decode(codes, 4), space)
    assert ClickPattern.from_bitstring("1000").code() == 8
    assert str(ClickPattern((0, 1, 1))) == "011"


def test_click_space_strata():
    for k in range(5):
        sub = click_space(4, k)
        assert len(sub) == math.comb(4, k)
        assert np.all(sub.sum(axis=1) == k)
        assert np.array_equal(click_codes(4, k), encode(sub))


def test_threshold_map():
    assert threshold_map((0, 3, 1)) == ClickPattern((0, 1, 1))


def test_loss_model_range():
    with pytest.raises(InputError):
        LossModel(1.5)
    assert LossModel(0.25).transmission == 0.75


def test_lossless_sampling_keeps_every_photon(rng):
    ideal = ideal_distribution(random_unitary(4, rng), (1, 1, 0, 0))
    counts = lossy_sample(ideal, LossModel(0.0), 2000, rng)
    totals = counts.stratum_totals()
    # collisions register one click, so only strata 1 and 2 occur
    assert totals[0] == 0 and totals[1] + totals[2] == 2000


def test_full_loss_gives_only_empty_shots(rng):
    ideal = ideal_distribution(random_unitary(3, rng), (1, 1, 0))
    counts = lossy_sample(ideal, LossModel(1.0), 500, rng)
    assert counts.stratum_total(0) == 500


def test_sampling_is_seed_deterministic(rng):
    ideal = ideal_distribution(random_unitary(4, rng), (1, 0, 1, 0))
    a = lossy_sample(ideal, LossModel(0.4), 3000, 11)
    b = lossy_sample(ideal, LossModel(0.4), 3000, 11)
    assert np.array_equal(a.codes, b.codes) and np.array_equal(a.counts, b.counts)
    assert a.seed == 11
    c = lossy_sample(ideal, LossModel(0.4), 3000, 11, chunks=3)
    assert c.counts.sum() == 3000


def test_exact_lossy_distribution_sums_to_one(rng):
    ideal = ideal_distribution(random_unitary(4, rng), (1, 1, 1, 0))
    for eta in (0.0, 0.3, 1.0):
        table = exact_lossy_distribution(ideal, LossModel(eta))
        assert table.probs.sum() == pytest.approx(1.0, abs=1e-12)
    full = exact_lossy_distribution(ideal, LossModel(1.0))
    assert full.prob((0, 0, 0, 0)) == pytest.approx(1.0)


def test_exact_pre_threshold_marginal_is_binomial(rng):
    n, eta = 3, 0.35
    ideal = ideal_distribution(random_unitary(4, rng), (1, 1, 1, 0))
    table = exact_lossy_distribution(ideal, LossModel(eta), threshold=False)
    marginal = np.bincount(table.space.sum(axis=1), weights=table.probs, minlength=n + 1)
    expected = [math.comb(n, k) * (1 - eta) ** k * eta ** (n - k) for k in range(n + 1)]
    assert np.allclose(marginal, expected, atol=1e-12)


def test_exact_oracle_size_gate():
    ideal = ideal_distribution(np.eye(11), (1,) * 5 + (0,) * 6)
    with pytest.raises(ResourceError):
        exact_lossy_distribution(ideal, LossModel(0.1))


def test_counts_container_views():
    counts = LossyCounts.from_mapping(3, {"110": 4, "011": 2, "100": 3, "000": 1})
    assert counts.total_shots == 10
    assert list(counts.stratum_totals()) == [1, 3, 6, 0]
    assert list(counts.stratum_vector(2)) == [2, 0, 4]
    sub, total = stratify(counts, 2)
    assert total == 6 and sub.total_shots == 6
    assert counts.as_dict()[ClickPattern((1, 1, 0))] == 4
    with pytest.raises(InputError):
        stratify(counts, 5)
    with pytest.raises(InputError):
        LossyCounts(3, 2, [1, 2], [3, 0])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
def test_clicks_never_exceed_photons(eta, seed):
    gen = np.random.default_rng(seed)
    ideal = ideal_distribution(random_unitary(4, gen), (1, 1, 0, 1))
    counts = lossy_sample(ideal, LossModel(eta), 300, gen)
    assert counts.counts.sum() == 300
    assert counts.click_counts().max(initial=0) <= 3


def test_threshold_map_examples():
    assert threshold_map((2, 0, 1, 1)) == ClickPattern((1, 0, 1, 1))
    assert threshold_map((0, 1, 1)) == ClickPattern((0, 1, 1))
    assert threshold_map((0, 0)) == ClickPattern((0, 0))


def test_lossless_exact_distribution_is_threshold_pushforward(rng):
    ideal = ideal_distribution(random_unitary(4, rng), (1, 1, 1, 0))
    table = exact_lossy_distribution(ideal, LossModel(0.0))
    expected = np.zeros(16)
    for occ, p in zip(ideal.space, ideal.probs):
        expected[threshold_map(occ).code()] += p
    assert np.allclose(table.probs, expected, atol=1e-15)


def test_sampled_lossless_shots_land_on_thresholded_outcomes(rng):
    ideal = ideal_distribution(random_unitary(4, rng), (1, 1, 0, 0))
    support = {threshold_map(occ).code() for occ, p in zip(ideal.space, ideal.probs) if p > 0}
    counts = lossy_sample(ideal, LossModel(0.0), 5000, rng)
    assert set(counts.codes.tolist()) <= support


def test_coincidence_rate_scales_as_transmission_power():
    # identity circuit: no collisions, so the n-click rate is exactly (1 - eta)**n
    m, n, eta, shots = 8, 4, 0.8, 200_000
    ideal = ideal_distribution(np.eye(m), (1, 0, 1, 0, 1, 0, 1, 0))
    counts = lossy_sample(ideal, LossModel(eta), shots, 31)
    p = (1 - eta) ** n
    assert shots * p == pytest.approx(320)
    assert abs(counts.stratum_total(n) - shots * p) <= 5 * np.sqrt(shots * p * (1 - p))


def test_strata_partition_and_ordering(rng):
    m, n = 8, 4
    ideal = ideal_distribution(random_unitary(m, rng), (1, 0, 1, 0, 1, 0, 1, 0))
    lossless = lossy_sample(ideal, LossModel(0.0), 20_000, rng)
    cf = sum(p for occ, p in zip(ideal.space, ideal.probs) if occ.max() <= 1)
    frac = lossless.stratum_total(n) / 20_000
    assert abs(frac - cf) <= 5 * np.sqrt(cf * (1 - cf) / 20_000)
    lossy = lossy_sample(ideal, LossModel(0.8), 200_000, rng)
    assert lossy.stratum_totals().sum() == 200_000
    assert lossy.stratum_total(n - 1) > lossy.stratum_total(n)
