import numpy as np
import pytest
from scipy.special import expit

from conftest import fixed_structure
from seqdistill import _rng
from seqdistill.errors import DimensionError, FormatError, ValidationError
from seqdistill.rnn_dbn import (RnnDbnModel, dumps_model, forward, layer_input, load_model,
                                loads_model, save_model, stack_train)
from seqdistill.rnn_rbm import PARAM_NAMES, TrainHyper, init_params, predict_next, train, unroll
from seqdistill.sequence_data import synth_markov


def two_layer_toy():
    rng = np.random.default_rng(0)
    return RnnDbnModel([init_params(3, 2, rng=rng), init_params(2, 2, rng=rng)])


def bump(model, scale=0.8, seed=1):
    rng = np.random.default_rng(seed)
    for p in model.layers:
        for name in PARAM_NAMES:
            arr = getattr(p, name)
            arr += rng.normal(0, scale, size=arr.shape)
    return model


def next_frame_accuracy(model, seqs):
    hits = []
    for seq in seqs:
        for t in range(1, len(seq)):
            _, probs = forward(model, seq[:t])
            hits.append(np.mean((probs > 0.5) == seq[t]))
    return float(np.mean(hits))


def test_layer_input_base_is_identity():
    seq = synth_markov(0, 3, 2, 5, 1, 0).train[0]
    np.testing.assert_array_equal(layer_input(two_layer_toy(), 1, seq), seq)


def test_zero_weight_layer_maps_to_half():
    model = two_layer_toy()
    for name in PARAM_NAMES:
        getattr(model.layers[0], name)[...] = 0
    out = layer_input(model, 2, synth_markov(0, 3, 2, 5, 1, 0).train[0])
    assert np.all(out == 0.5)


def test_layer_input_matches_hand_chain():
    model = bump(two_layer_toy())
    seq = synth_markov(1, 3, 2, 4, 1, 0).train[0].astype(float)
    p = model.layers[0]
    c_t = unroll(p, seq).c_t
    hand = np.array([expit(c_t[t] + seq[t] @ p.W) for t in range(4)])
    np.testing.assert_allclose(layer_input(model, 2, seq), hand, rtol=1e-14)
    with pytest.raises(ValidationError):
        layer_input(model, 3, seq)


def test_forward_shapes_and_determinism():
    model = bump(two_layer_toy())
    prefix = synth_markov(2, 3, 2, 6, 1, 0).train[0]
    acts, probs = forward(model, prefix)
    assert [a.shape for a in acts] == [(6, 2), (6, 2)]
    acts2, probs2 = forward(model, prefix)
    assert np.array_equal(probs, probs2) and all(np.array_equal(a, b) for a, b in zip(acts, acts2))
    assert np.all((probs > 0) & (probs < 1))


def test_forward_activations_are_prefix_stable():
    model = bump(two_layer_toy())
    seq = synth_markov(2, 3, 2, 7, 1, 0).train[0]
    full, _ = forward(model, seq)
    short, _ = forward(model, seq[:4])
    for a, b in zip(full, short):
        np.testing.assert_array_equal(a[:4], b)


def test_single_layer_forward_is_predict_next():
    model = bump(RnnDbnModel([init_params(4, 3, rng=np.random.default_rng(5))]))
    prefix = synth_markov(3, 4, 3, 6, 1, 0).train[0]
    np.testing.assert_allclose(forward(model, prefix)[1], predict_next(model.layers[0], prefix),
                               rtol=1e-13)


def test_forward_checks_dimension():
    with pytest.raises(DimensionError):
        forward(two_layer_toy(), np.zeros((3, 5)))
    with pytest.raises(ValidationError):
        forward(two_layer_toy(), np.zeros((0, 3)))


def test_dimension_chaining_is_checked():
    model = RnnDbnModel([init_params(3, 2), init_params(4, 2)])
    with pytest.raises(DimensionError):
        model.check()
    with pytest.raises(DimensionError):
        dumps_model(model)


def test_infinite_layer_threshold_gives_one_layer(cycle_data):
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=3)
    model = stack_train(cycle_data, hyper, fixed_structure(max_layers=4))
    assert model.n_layers == 1


def test_layer_cap(cycle_data):
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=3)
    model = stack_train(cycle_data, hyper, fixed_structure(max_layers=3, layer_threshold=1e-12))
    assert model.n_layers == 3
    assert [r["kind"] for r in model.structure_log] == ["new_layer", "new_layer"]
    assert len(model.metadata["error_traces"]) == 3


def test_one_layer_stack_equals_plain_training(cycle_data):
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=10, seed=4)
    model = stack_train(cycle_data, hyper, fixed_structure())
    plain, trace = train(init_params(8, 8, rng=_rng.stream(4, "init", 0)), cycle_data, hyper)
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(getattr(model.layers[0], name), getattr(plain, name))
    assert model.metadata["error_traces"][0] == trace


def test_two_layer_model_predicts_two_cycle(cycle_model, cycle_data):
    assert cycle_model.n_layers == 2
    assert next_frame_accuracy(cycle_model, cycle_data.test) >= 0.95


def test_stack_not_worse_than_single_layer(cycle_model, cycle_data):
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=150, seed=3)
    single = stack_train(cycle_data, hyper, fixed_structure())
    assert next_frame_accuracy(cycle_model, cycle_data.test) >= \
        next_frame_accuracy(single, cycle_data.test)


def test_model_round_trip(cycle_model, tmp_path):
    path = tmp_path / "m.json"
    save_model(cycle_model, path)
    back = load_model(path)
    assert dumps_model(back) == path.read_text()
    for a, b in zip(back.layers, cycle_model.layers):
        assert all(np.array_equal(getattr(a, n), getattr(b, n)) for n in PARAM_NAMES)


def test_same_seed_same_model_bytes(cycle_data):
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=4, seed=9)
    cfg = fixed_structure(max_layers=2, layer_threshold=1e-12)
    assert dumps_model(stack_train(cycle_data, hyper, cfg)) == \
        dumps_model(stack_train(cycle_data, hyper, cfg))


@pytest.mark.parametrize("text", ["not json", '{"kind": "rulesets"}',
                                  '{"kind": "rnn_dbn", "format_version": 7, "layers": []}'])
def test_model_loader_rejects_bad_files(text):
    with pytest.raises(FormatError):
        loads_model(text)
