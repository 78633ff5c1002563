import itertools

import numpy as np
import pytest

from _models import gaussian_hmm, random_hmm
from _oracles import brute_posteriors, brute_viterbi, random_hmm_problem
from adu.features import FeatureSequence
from adu.synth import sample_hmm_corpus
from adu.transducer import (
    EPS_FLOOR,
    Posteriorgram,
    UnitSequence,
    decode,
    decoding_hmm,
    floor_rows,
    forward_backward,
    path_score,
    posteriorgram,
    read_posteriorgram,
    read_units,
    train_transducer,
    viterbi,
    write_posteriorgram,
    write_units,
)

D = 39


def test_viterbi_matches_enumeration(rng):
    for i in range(150):
        K, T = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        args = random_hmm_problem(rng, K, T, quantized=i % 2 == 0)
        path, score = viterbi(*args)
        want, want_score = brute_viterbi(*args)
        assert path.tolist() == want.tolist()
        assert score == want_score


def test_forward_backward_matches_enumeration(rng):
    for _ in range(60):
        K, T = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        args = random_hmm_problem(rng, K, T)
        post, log_z = forward_backward(*args)
        np.testing.assert_allclose(post, brute_posteriors(*args), atol=1e-10)
        total = sum(np.exp(path_score(*args, p))
                    for p in itertools.product(range(K), repeat=T))
        assert log_z == pytest.approx(np.log(total), abs=1e-10)


def test_model_posteriorgram_matches_enumeration(rng):
    for _ in range(20):
        K, T = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        model = random_hmm(rng, K)
        seq = FeatureSequence("u", rng.normal(0, 0.5, (T, D)))
        states, log_init, log_trans = decoding_hmm(model)
        ll = model.state_loglik(seq.frames.astype(float), states=states)
        want = floor_rows(brute_posteriors(log_init, log_trans, ll))
        pg = posteriorgram(model, seq)
        np.testing.assert_allclose(pg.P, want, atol=1e-8)
        np.testing.assert_allclose(pg.P.sum(axis=1), 1.0, atol=1e-6)


def test_model_decode_matches_enumeration(rng):
    for _ in range(20):
        model = random_hmm(rng, 4)
        seq = FeatureSequence("u", rng.normal(0, 0.5, (6, D)))
        states, log_init, log_trans = decoding_hmm(model)
        ll = model.state_loglik(seq.frames.astype(float), states=states)
        want, _ = brute_viterbi(log_init, log_trans, ll)
        assert decode(model, seq).labels().tolist() == states[want].tolist()


def test_floor_keeps_rows_normalized_and_bounded(rng):
    P = rng.dirichlet(np.ones(5) * 0.05, size=50)
    P[0] = [1, 0, 0, 0, 0]
    F = floor_rows(P)
    assert F.min() >= EPS_FLOOR
    np.testing.assert_allclose(F.sum(axis=1), 1.0, atol=1e-12)


def two_state_model():
    means = np.zeros((2, D))
    means[0, 0], means[1, 0] = -20.0, 20.0
    return gaussian_hmm(means, [[0.9, 0.1], [0.1, 0.9]])


def test_dominant_emissions_give_two_runs():
    x = np.zeros((10, D))
    x[:4, 0], x[4:, 0] = -20.0, 20.0
    units = decode(two_state_model(), FeatureSequence("u", x))
    assert units.runs == [(0, 0, 4), (1, 4, 10)]


def test_one_state_model():
    model = gaussian_hmm(np.zeros((1, D)), [[1.0]])
    seq = FeatureSequence("u", np.random.default_rng(0).standard_normal((7, D)))
    assert decode(model, seq).runs == [(0, 0, 7)]
    pg = posteriorgram(model, seq)
    assert pg.P.tolist() == [[1.0]] * 7


def test_equidistant_frame_is_split_evenly():
    means = np.zeros((2, D))
    means[0, 0], means[1, 0] = -1.0, 1.0
    model = gaussian_hmm(means, [[0.5, 0.5], [0.5, 0.5]])
    pg = posteriorgram(model, FeatureSequence("u", np.zeros((1, D))))
    np.testing.assert_allclose(pg.P, [[0.5, 0.5]], atol=1e-15)


def test_decode_beats_random_paths(rng):
    model = random_hmm(rng, 5)
    seq = FeatureSequence("u", rng.normal(0, 0.5, (30, D)))
    states, log_init, log_trans = decoding_hmm(model)
    ll = model.state_loglik(seq.frames.astype(float), states=states)
    path, best = viterbi(log_init, log_trans, ll)
    for _ in range(1000):
        assert path_score(log_init, log_trans, ll, rng.integers(5, size=30)) <= best


def test_posterior_argmax_agrees_with_viterbi_when_confident():
    rng = np.random.default_rng(8)
    means = rng.normal(0, 6, (3, D))
    model = gaussian_hmm(means, [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    z = np.repeat([0, 2, 1, 0], 5)
    seq = FeatureSequence("u", means[z] + 0.3 * rng.standard_normal((20, D)))
    pg = posteriorgram(model, seq)
    assert pg.P.max(axis=1).min() >= 0.9
    assert np.array_equal(pg.P.argmax(axis=1), decode(model, seq).labels())


def test_decode_and_posteriorgram_are_pure(rng):
    model = random_hmm(rng, 4)
    seq = FeatureSequence("u", rng.normal(0, 0.5, (25, D)))
    assert decode(model, seq).runs == decode(model, seq).runs
    assert posteriorgram(model, seq).P.tobytes() == posteriorgram(model, seq).P.tobytes()


def test_viterbi_mode_is_floored_one_hot():
    x = np.zeros((6, D))
    x[3:, 0] = 20.0
    x[:3, 0] = -20.0
    pg = posteriorgram(two_state_model(), FeatureSequence("u", x), mode="viterbi")
    assert np.array_equal(pg.P.argmax(axis=1), [0, 0, 0, 1, 1, 1])
    assert pg.P.min() == pytest.approx(EPS_FLOOR)


def test_unit_sequence_tiles_frames():
    labels = np.array([3, 3, 1, 1, 1, 3, 0])
    us = UnitSequence.from_labels("u", labels)
    assert us.runs == [(3, 0, 2), (1, 2, 5), (3, 5, 6), (0, 6, 7)]
    assert np.array_equal(us.labels(), labels)


def test_posteriorgram_file_roundtrip(tmp_path, rng):
    pg = Posteriorgram("u1", rng.dirichlet(np.ones(4), size=6), [7, 2, 9, 11], 10.0, 25.0)
    write_posteriorgram(pg, tmp_path / "u1.pgram")
    back = read_posteriorgram(tmp_path / "u1.pgram")
    assert back.utterance_id == "u1"
    assert back.P.tobytes() == pg.P.tobytes()
    assert back.unit_ids.tolist() == [7, 2, 9, 11]


def test_units_file_roundtrip(tmp_path):
    us = UnitSequence("u", [(3, 0, 2), (1, 2, 5)])
    write_units(us, tmp_path / "u.units")
    assert read_units(tmp_path / "u.units").runs == us.runs


def test_five_unit_corpus_recovery():
    data = sample_hmm_corpus(np.random.default_rng(11), n_states=5, n_utts=30, n_frames=100)
    model = train_transducer(data.sequences, sweeps=100, truncation=20, seed=0)
    n_active = model.active_states(0.01 * 3000).size
    assert abs(n_active - 5) <= 1
    assert len(model.trace) == 100


def test_constant_utterance_one_unit():
    seq = FeatureSequence("c", np.tile(np.linspace(-1, 1, D), (60, 1)))
    model = train_transducer([seq], sweeps=30, truncation=10, seed=0)
    assert model.active_states().size == 1
    assert decode(model, seq).runs == [(int(model.active_states()[0]), 0, 60)]


def test_training_rejects_wrong_dim():
    from adu.errors import DataError

    class Fake:
        utterance_id = "x"
        frames = np.zeros((4, 13))

    with pytest.raises(DataError):
        train_transducer([Fake()], sweeps=1)
    with pytest.raises(DataError):
        train_transducer([], sweeps=1)
