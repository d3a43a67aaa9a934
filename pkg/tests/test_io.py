import numpy as np

from photonic_qcbm.config import default_input_state
from photonic_qcbm.fock import ideal_distribution
from photonic_qcbm.io import (
    read_counts,
    read_curve,
    read_estimator,
    read_history,
    write_counts,
    write_curve,
    write_estimator,
    write_history,
    write_json,
)
from photonic_qcbm.mesh import MeshParams
from photonic_qcbm.mitigation import estimate
from photonic_qcbm.noise import LossModel, lossy_sample
from photonic_qcbm.training import FlatParams, SpsaConfig, quadratic_test_loss, spsa_train

from oracles import random_unitary


def test_counts_round_trip(tmp_path, rng):
    ideal = ideal_distribution(random_unitary(5, rng), default_input_state(5, 2))
    counts = lossy_sample(ideal, LossModel(0.4), 5000, 7)
    write_counts(tmp_path / "c.csv", counts)
    back = read_counts(tmp_path / "c.csv")
    assert np.array_equal(back.codes, counts.codes)
    assert np.array_equal(back.counts, counts.counts)
    assert (back.total_shots, back.eta, back.seed, back.m) == (5000, 0.4, 7, 5)
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "pattern,count"


def test_estimator_round_trip_is_exact(tmp_path, rng):
    ideal = ideal_distribution(random_unitary(5, rng), default_input_state(5, 2))
    est = estimate(lossy_sample(ideal, LossModel(0.4), 5000, rng), 2, "recycled_mitigated")
    write_estimator(tmp_path / "e.csv", est)
    back = read_estimator(tmp_path / "e.csv")
    assert np.array_equal(back.probs, est.probs)
    assert (back.method, back.shots_used, back.converged, back.iterations) == (
        est.method, est.shots_used, est.converged, est.iterations,
    )


def test_history_and_curve_round_trip(tmp_path):
    hist = spsa_train(FlatParams(np.zeros(3)), SpsaConfig(a=0.1, max_iters=6, record_every=2),
                      quadratic_test_loss([1, 2, 3]), monitor=quadratic_test_loss([0, 0, 0]))
    write_history(tmp_path / "h.jsonl", hist)
    back = read_history(tmp_path / "h.jsonl")
    assert np.array_equal(back.losses(), hist.losses())
    assert np.array_equal(back.exact_losses(), hist.exact_losses())
    for a, b in zip(back.snapshots, hist.snapshots):
        assert np.array_equal(a, b)
    write_curve(tmp_path / "c.csv", hist)
    curve = read_curve(tmp_path / "c.csv")
    assert [c[0] for c in curve] == [0, 2, 4, 6]
    assert curve[-1][1] == hist.final.loss_value


def test_write_json_handles_numpy(tmp_path):
    write_json(tmp_path / "s.json", {"a": np.float64(1.5), "b": np.arange(3), "c": 1 + 2j})
    text = (tmp_path / "s.json").read_text()
    assert '"a": 1.5' in text and '"re": 1.0' in text


def test_params_json_via_mesh(rng):
    p = MeshParams.random(3, rng=rng)
    assert np.array_equal(MeshParams.from_json(p.to_json()).phases, p.phases)
