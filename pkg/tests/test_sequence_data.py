import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqdistill.errors import FormatError, ValidationError
from seqdistill.sequence_data import (Dataset, dumps_pianoroll, expand_frame, load_pianoroll,
                                      parse_pianoroll, save_pianoroll, sparsify_frame,
                                      synth_markov, validate)


def test_expand_frame_sets_listed_notes():
    frame = expand_frame([10, 77], 88)
    assert frame.shape == (88,)
    assert frame.sum() == 2 and frame[10] == 1 and frame[77] == 1


def test_empty_frame_is_all_zero():
    assert not expand_frame([], 88).any()


def test_duplicate_indices_are_merged():
    assert sparsify_frame(expand_frame([3, 3, 1], 5)) == [1, 3]


@given(st.integers(1, 96).flatmap(
    lambda d: st.tuples(st.just(d), st.lists(st.integers(0, d - 1), max_size=2 * d))))
def test_sparse_round_trip(case):
    d, idx = case
    assert sparsify_frame(expand_frame(idx, d)) == sorted(set(idx))


def test_parse_88_dimension_dataset():
    ds = parse_pianoroll('{"dimension": 88, "train": [[[0, 87], [40]]], "test": []}')
    assert ds.dimension == 88
    assert ds.train[0].shape == (2, 88) and ds.train[0].dtype == np.uint8


def test_malformed_json_reports_line_and_column():
    text = '{"dimension": 4,\n "train": [[[1], [2]],]\n}'
    with pytest.raises(FormatError, match=r"f\.json:2:\d+"):
        parse_pianoroll(text, source="f.json")


def test_out_of_range_index_names_the_frame():
    with pytest.raises(ValidationError, match=r"train\[0\] frame 1: index 9"):
        parse_pianoroll('{"dimension": 4, "train": [[[1], [9]]]}')


def test_short_sequence_rejected_on_load():
    with pytest.raises(ValidationError, match="T=1"):
        parse_pianoroll('{"dimension": 4, "train": [[[1]]]}')


def test_empty_train_rejected():
    with pytest.raises(ValidationError, match="train split is empty"):
        parse_pianoroll('{"dimension": 4, "train": [], "test": [[[1], [2]]]}')


def test_file_round_trip(tmp_path):
    ds = synth_markov(2, 12, 3, 7, 4, 2)
    path = tmp_path / "ds.json"
    save_pianoroll(ds, path)
    back = load_pianoroll(path)
    assert dumps_pianoroll(back) == dumps_pianoroll(ds)
    assert all(np.array_equal(a, b) for a, b in zip(back.train + back.test, ds.train + ds.test))


def test_synth_two_states_alternate():
    ds = synth_markov(1, 4, 2, 6, 3, 1)
    for seq in ds.train + ds.test:
        a, b = seq[0], seq[1]
        assert not np.array_equal(a, b)
        assert all(np.array_equal(seq[t], a if t % 2 == 0 else b) for t in range(6))


def test_synth_is_deterministic():
    assert dumps_pianoroll(synth_markov(5, 16, 3, 9, 4, 4)) == \
        dumps_pianoroll(synth_markov(5, 16, 3, 9, 4, 4))
    assert dumps_pianoroll(synth_markov(5, 16, 3, 9, 4, 4)) != \
        dumps_pianoroll(synth_markov(6, 16, 3, 9, 4, 4))


def test_synth_period_three():
    ds = synth_markov(0, 10, 3, 7, 5, 0)
    for seq in ds.train:
        for t in range(3, 7):
            assert np.array_equal(seq[t], seq[t - 3])
        assert len({seq[t].tobytes() for t in range(3)}) == 3


def test_synth_noise_flips_some_bits():
    clean = synth_markov(4, 32, 2, 20, 2, 0)
    noisy = synth_markov(4, 32, 2, 20, 2, 0, noise=0.1)
    diff = np.mean([np.mean(a != b) for a, b in zip(clean.train, noisy.train)])
    assert 0.03 < diff < 0.2


@pytest.mark.parametrize("kw", [dict(n_states=1), dict(n_states=17), dict(T=1), dict(D=0)])
def test_synth_argument_checks(kw):
    args = dict(seed=0, D=4, n_states=2, T=4, n_train=1, n_test=1)
    args.update(kw)
    with pytest.raises(ValidationError):
        synth_markov(**args)


def test_validate_good_dataset():
    assert validate(synth_markov(0, 6, 2, 4, 2, 2)) == []


def test_validate_flags_bad_value_and_short_sequence():
    bad = np.zeros((3, 4), dtype=np.uint8)
    bad[1, 2] = 2
    problems = validate(Dataset(4, [bad]))
    assert problems == ["train[0] frame 1: values outside {0,1}"]
    problems = validate(Dataset(4, [np.zeros((1, 4), dtype=np.uint8)]))
    assert len(problems) == 1 and "T < 2" in problems[0]


def test_saved_file_is_sparse_json(tmp_path):
    ds = Dataset(5, [expand_frame([0, 4], 5)[None].repeat(2, 0)], [], "tiny")
    doc = json.loads(dumps_pianoroll(ds))
    assert doc == {"name": "tiny", "dimension": 5, "train": [[[0, 4], [0, 4]]], "test": []}
