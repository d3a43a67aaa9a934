import math

import numpy as np
import pytest

from photonic_qcbm.config import default_input_state
from photonic_qcbm.errors import InputError, InsufficientDataError
from photonic_qcbm.fock import FockState
from photonic_qcbm.mesh import MeshParams
from photonic_qcbm.training import (
    FlatParams,
    LossFunction,
    ParseError,
    Pipeline,
    SpsaConfig,
    TargetDistribution,
    build_bin_map,
    choose_metric,
    csv_returns_target,
    evaluate_loss,
    gaussian_mixture_target,
    model_bin_distribution,
    model_estimate,
    quadratic_test_loss,
    read_returns,
    spsa_train,
)


def test_bin_map_contiguous_blocks():
    bm = build_bin_map(8, 3, 30)
    assert bm.pattern_count == 56
    sizes = bm.block_sizes()
    assert sizes.sum() == 56 and set(sizes) <= {1, 2}
    assert np.all(np.diff(bm.assignment) >= 0)
    # bin b covers ranks [floor(b*S/B), floor((b+1)*S/B))
    for b in range(30):
        ranks = np.flatnonzero(bm.assignment == b)
        assert ranks[0] == b * 56 // 30 and ranks[-1] == (b + 1) * 56 // 30 - 1
    with pytest.raises(InputError):
        build_bin_map(4, 2, 7)


def test_model_bins_conserve_mass(rng):
    bm = build_bin_map(6, 2, 5)
    p = rng.dirichlet(np.ones(15))
    assert model_bin_distribution(p, bm).sum() == pytest.approx(1.0)


def test_gaussian_mixture_is_symmetric_and_bimodal():
    t = gaussian_mixture_target(bins=30)
    p = t.bin_probs
    assert p.sum() == pytest.approx(1.0)
    assert np.allclose(p, p[::-1], atol=1e-12)
    centre = len(p) // 2
    assert p[centre] < 1e-3 and p.max() > 0.1
    assert t.provenance["kind"] == "gaussian_mixture"


def test_target_validation():
    with pytest.raises(InputError):
        TargetDistribution([0.5, 0.6])
    with pytest.raises(InputError):
        gaussian_mixture_target(x_min=1, x_max=1)


def _write(path, text):
    path.write_text(text)
    return path


def test_read_returns_from_prices(tmp_path):
    path = _write(tmp_path / "p.csv", "date,price\n1,100\n2,110\n\n3,99\n")
    r = read_returns(path)
    assert np.allclose(r, [math.log(1.1), math.log(99 / 110)])


def test_read_returns_reports_line_numbers(tmp_path):
    path = _write(tmp_path / "bad.csv", "date,price\n1,100\n2,abc\n")
    with pytest.raises(ParseError) as err:
        read_returns(path)
    assert err.value.line == 3
    with pytest.raises(ParseError):
        read_returns(_write(tmp_path / "neg.csv", "price\n1\n-2\n"))
    with pytest.raises(ParseError):
        read_returns(_write(tmp_path / "hdr.csv", "close\n1\n"))


def test_csv_target_and_metric_choice(tmp_path, rng):
    returns = rng.standard_t(3, size=800) * 0.01
    lines = ["log_return"] + [repr(float(v)) for v in returns]
    path = _write(tmp_path / "r.csv", "\n".join(lines) + "\n")
    t = csv_returns_target(path, bins=30)
    assert t.bin_probs.sum() == pytest.approx(1.0)
    assert t.provenance["rows"] == 800
    assert choose_metric(t) in ("kl", "tvd")
    assert choose_metric(gaussian_mixture_target()) == "kl"


def test_degenerate_returns_fill_central_bin(tmp_path):
    path = _write(tmp_path / "flat.csv", "log_return\n0.0\n0.0\n0.0\n")
    t = csv_returns_target(path, bins=5)
    assert t.bin_probs[2] == 1.0
    assert choose_metric(t) == "tvd"


def test_lossless_pipeline_is_exact_and_deterministic(rng):
    params = MeshParams.random(5, rng=rng)
    pipe = Pipeline(default_input_state(5, 2))
    a = model_estimate(params, pipe, 1)
    b = model_estimate(params, pipe, 2)
    assert np.array_equal(a.probs, b.probs) and a.shots_used == 0


def test_pipeline_validation():
    with pytest.raises(InputError):
        Pipeline(FockState((1, 1, 0)), method="bogus")
    with pytest.raises(InputError):
        Pipeline(FockState((1, 1, 0)), eta=0.5, method="postselect", shots=0)


def test_evaluate_loss_checks_shapes(rng):
    params = MeshParams.random(5, rng=rng)
    target = gaussian_mixture_target(bins=5)
    pipe = Pipeline(default_input_state(5, 2))
    value = evaluate_loss(params, pipe, target, build_bin_map(5, 2, 5))
    assert value >= 0
    with pytest.raises(InputError):
        evaluate_loss(params, pipe, target, build_bin_map(5, 2, 4))
    with pytest.raises(InputError):
        evaluate_loss(params, pipe, target, build_bin_map(6, 2, 5))


def test_spsa_minimises_quadratic():
    centre = np.linspace(-1, 1, 6)
    loss = quadratic_test_loss(centre)
    cfg = SpsaConfig(a=0.2, c=0.05, max_iters=400, seed=3, record_every=50)
    hist = spsa_train(FlatParams(np.zeros(6)), cfg, loss)
    assert hist.records[0].loss_value == pytest.approx(np.sum(centre**2))
    assert hist.final.loss_value < 1e-2
    assert list(hist.iterations()) == [0, 50, 100, 150, 200, 250, 300, 350, 400]


def test_spsa_is_reproducible_and_respects_mask(rng):
    params = MeshParams.random(4, rng=rng, single_phase_mode=True)
    target = gaussian_mixture_target(bins=6)
    loss = LossFunction(Pipeline(default_input_state(4, 2)), target, build_bin_map(4, 2, 6))
    cfg = SpsaConfig(max_iters=20, seed=9, record_every=5)
    h1 = spsa_train(params, cfg, loss, monitor=loss.exact())
    h2 = spsa_train(params, cfg, loss, monitor=loss.exact())
    assert np.array_equal(h1.losses(), h2.losses())
    final = h1.final_params(params)
    assert np.all(final.phases[0::2] == 0)
    assert h1.records[0].exact_loss == h1.records[0].loss_value


def test_spsa_shot_accounting(rng):
    params = MeshParams.random(4, rng=rng)
    pipe = Pipeline(default_input_state(4, 2), eta=0.3, shots=1000, method="postselect")
    loss = LossFunction(pipe, gaussian_mixture_target(bins=6), build_bin_map(4, 2, 6))
    cfg = SpsaConfig(a=0.1, max_iters=4, seed=0, record_every=2)
    hist = spsa_train(params, cfg, loss)
    # one evaluation at k=0, two per step, one per later record
    assert [r.shots_spent for r in hist.records] == [1000, 6000, 11000]


def test_spsa_surfaces_insufficient_data(rng):
    params = MeshParams.random(4, rng=rng)
    pipe = Pipeline(default_input_state(4, 2), eta=0.99, shots=5, method="postselect")
    loss = LossFunction(pipe, gaussian_mixture_target(bins=6), build_bin_map(4, 2, 6))
    with pytest.raises(InsufficientDataError) as err:
        spsa_train(params, SpsaConfig(a=0.1, max_iters=50, seed=0), loss)
    assert err.value.iteration is not None


def test_spsa_aborts_on_non_finite_loss():
    def loss(params, rng=None):
        return float("nan") if params.phases[0] != 0 else 1.0

    hist = spsa_train(FlatParams(np.zeros(3)), SpsaConfig(a=0.1, max_iters=10), loss)
    assert hist.status.startswith("aborted")
    assert math.isnan(hist.final.loss_value)


def test_bin_map_limits():
    full = build_bin_map(5, 2, 10)
    assert list(full.assignment) == list(range(10))
    assert set(build_bin_map(5, 2, 1).assignment) == {0}
    big = build_bin_map(12, 4, 50)
    assert big.pattern_count == 495 and set(big.block_sizes()) == {9, 10}


def test_bin_distribution_special_inputs():
    bm = build_bin_map(5, 2, 5)
    point = np.zeros(10)
    point[3] = 1.0
    assert list(model_bin_distribution(point, bm)) == [0, 1, 0, 0, 0]
    assert np.allclose(model_bin_distribution(np.full(10, 0.1), bm), 0.2)


def test_single_gaussian_when_weight_is_one():
    t = gaussian_mixture_target(weight=1.0, bins=40)
    assert np.argmax(t.bin_probs) in (9, 10)
    assert t.bin_probs[20:].sum() < 1e-3


def test_default_mixture_has_two_equal_peaks():
    p = gaussian_mixture_target().bin_probs
    left, right = p[:25], p[25:]
    assert left.max() == pytest.approx(right.max(), rel=1e-12)
    assert p[24] < 0.01 * p.max()


def test_constant_and_two_point_price_series(tmp_path):
    flat = csv_returns_target(_write(tmp_path / "c.csv", "price\n5\n5\n5\n5\n"), bins=7)
    assert flat.bin_probs[3] == 1.0
    single = read_returns(_write(tmp_path / "e.csv", f"price\n1\n{math.e!r}\n"))
    assert single == pytest.approx([1.0])
    one = csv_returns_target(tmp_path / "e.csv", bins=7)
    assert one.bin_probs.max() == 1.0


def test_returns_histogram_matches_generating_normal(tmp_path, rng):
    from scipy.stats import norm

    returns = rng.normal(0.0, 0.01, size=5000)
    path = _write(tmp_path / "n.csv", "log_return\n" + "".join(f"{float(v)!r}\n" for v in returns))
    t = csv_returns_target(path, bins=20)
    lo, hi = t.provenance["range"]
    edges = np.linspace(lo, hi, 21)
    expected = np.diff(norm.cdf(edges, scale=0.01))
    assert 0.5 * np.abs(t.bin_probs - expected / expected.sum()).sum() < 0.05


def test_loss_is_zero_on_own_distribution(rng):
    params = MeshParams.random(5, rng=rng)
    pipe = Pipeline(default_input_state(5, 2))
    bm = build_bin_map(5, 2, 5)
    own = model_bin_distribution(model_estimate(params, pipe), bm)
    assert evaluate_loss(params, pipe, TargetDistribution(own / own.sum()), bm) == pytest.approx(0, abs=1e-9)


def test_sampled_loss_is_seed_deterministic(rng):
    params = MeshParams.random(5, rng=rng)
    pipe = Pipeline(default_input_state(5, 2), eta=0.5, shots=2000, method="recycled_mitigated")
    target, bm = gaussian_mixture_target(bins=5), build_bin_map(5, 2, 5)
    assert evaluate_loss(params, pipe, target, bm, rng=4) == evaluate_loss(params, pipe, target, bm, rng=4)


def test_heavy_loss_postselection_is_starved(rng):
    m, n = 8, 4
    pipe = Pipeline((1, 0, 1, 0, 1, 0, 1, 0), eta=0.8, shots=300, method="postselect")
    target, bm = gaussian_mixture_target(bins=10), build_bin_map(m, n, 10)
    values, starved = [], 0
    for seed in range(20):
        try:
            values.append(evaluate_loss(MeshParams.random(m, rng=seed), pipe, target, bm, rng=seed))
        except InsufficientDataError:
            starved += 1
    assert starved > 0 or np.std(values) > 1.0


def test_spsa_quadratic_two_parameters_median_of_ten():
    centre = np.array([0.7, -1.2])
    finals = []
    for seed in range(10):
        hist = spsa_train(FlatParams(np.zeros(2)), SpsaConfig(max_iters=500, seed=seed, record_every=500),
                          quadratic_test_loss(centre))
        finals.append(np.max(np.abs(hist.snapshots[-1] - centre)))
    assert np.median(finals) < 1e-2


def test_spsa_zero_gain_keeps_parameters(rng):
    params = MeshParams.random(4, rng=rng)
    loss = LossFunction(Pipeline(default_input_state(4, 2)), gaussian_mixture_target(bins=6), build_bin_map(4, 2, 6))
    hist = spsa_train(params, SpsaConfig(a=0.0, max_iters=10), loss)
    assert np.array_equal(hist.snapshots[-1], params.phases)
