import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqdistill.errors import FormatError, ValidationError
from seqdistill.path_extraction import (PathDataset, build_path_dataset, fired_paths, format_data,
                                        format_names, most_fired, path_table, read_c45_files,
                                        write_c45_files)
from seqdistill.rnn_dbn import forward
from seqdistill.sequence_data import Dataset


def fig6_dataset():
    return PathDataset(np.array([[10, 77, 34, 54, 54]]), np.array([0]), target_dimension=0)


def test_most_fired_argmax_and_ties():
    assert most_fired([[0.1, 0.9, 0.3]]) == (1,)
    assert most_fired([[0.5, 0.5]]) == (0,)


def test_most_fired_builds_fig6_path():
    acts = []
    for winner in (10, 77, 34, 54, 54):
        a = np.full(80, 0.2)
        a[winner] = 0.9
        acts.append(a)
    assert most_fired(acts) == (10, 77, 34, 54, 54)


def test_fig6_line_is_byte_exact(tmp_path):
    names, data = write_c45_files(fig6_dataset(), tmp_path / "dim000")
    assert data.read_bytes() == b"10,77,34,54,54,0\n"
    assert names.read_bytes() == (b"0,1.\nlayer1: 10.\nlayer2: 77.\nlayer3: 34.\n"
                                  b"layer4: 54.\nlayer5: 54.\n| target_dimension=0\n")


def test_fired_paths_agree_with_forward_on_each_prefix(cycle_model, cycle_data):
    seq = cycle_data.test[0]
    paths = fired_paths(cycle_model, seq)
    for t in range(len(seq)):
        acts, _ = forward(cycle_model, seq[:t + 1])
        assert tuple(paths[t]) == most_fired([a[-1] for a in acts])


def test_two_frame_sequence_gives_one_row(cycle_model):
    seq = np.array([[1, 0, 1, 0, 1, 0, 1, 0], [0, 1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8)
    pd = build_path_dataset(cycle_model, Dataset(8, [seq]), 3)
    assert len(pd) == 1 and pd.labels[0] == seq[1, 3]


def test_rows_and_labels_follow_the_data(cycle_model, cycle_data):
    paths, nxt = path_table(cycle_model, cycle_data.train)
    assert len(paths) == sum(len(s) - 1 for s in cycle_data.train)
    np.testing.assert_array_equal(nxt, np.concatenate([s[1:] for s in cycle_data.train]))
    pd = build_path_dataset(cycle_model, cycle_data, 5, (paths, nxt))
    np.testing.assert_array_equal(pd.labels, nxt[:, 5])
    for a, values in enumerate(pd.attribute_values):
        assert set(values) == set(paths[:, a].tolist())


def test_two_cycle_paths_are_contradiction_free(cycle_model, cycle_data):
    paths, nxt = path_table(cycle_model, cycle_data.train)
    for d in range(cycle_data.dimension):
        seen = {}
        for p, y in zip(map(tuple, paths), nxt[:, d]):
            assert seen.setdefault(p, y) == y


def test_path_table_is_deterministic(cycle_model, cycle_data):
    a = build_path_dataset(cycle_model, cycle_data, 2)
    assert a == build_path_dataset(cycle_model, cycle_data, 2)


def test_target_dimension_range(cycle_model, cycle_data):
    with pytest.raises(ValidationError):
        build_path_dataset(cycle_model, cycle_data, 8)


@settings(max_examples=30)
@given(st.integers(1, 5).flatmap(lambda L: st.lists(
    st.tuples(st.lists(st.integers(0, 120), min_size=L, max_size=L), st.integers(0, 1)),
    min_size=1, max_size=25)), st.integers(0, 87))
def test_c45_file_round_trip(rows, d):
    import tempfile
    from pathlib import Path
    pd = PathDataset(np.array([r for r, _ in rows]), np.array([y for _, y in rows]), d)
    with tempfile.TemporaryDirectory() as tmp:
        stem = Path(tmp) / "t"
        write_c45_files(pd, stem)
        assert read_c45_files(stem) == pd


def test_reader_names_bad_line(tmp_path):
    write_c45_files(PathDataset(np.array([[1, 2], [3, 4]]), np.array([0, 1]), 0), tmp_path / "x")
    (tmp_path / "x.data").write_text("1,2,0\n3,1\n")
    with pytest.raises(FormatError, match=r"x\.data:2"):
        read_c45_files(tmp_path / "x")


def test_reader_rejects_undeclared_value(tmp_path):
    write_c45_files(PathDataset(np.array([[1], [3]]), np.array([0, 1]), 0), tmp_path / "x")
    (tmp_path / "x.data").write_text("1,0\n2,1\n")
    with pytest.raises(FormatError, match="not declared"):
        read_c45_files(tmp_path / "x")


def test_reader_rejects_empty_data(tmp_path):
    write_c45_files(fig6_dataset(), tmp_path / "x")
    (tmp_path / "x.data").write_text("")
    with pytest.raises(ValidationError):
        read_c45_files(tmp_path / "x")


def test_writer_refuses_empty(tmp_path):
    empty = PathDataset(np.zeros((0, 2)), np.zeros(0), 0)
    with pytest.raises(ValidationError):
        write_c45_files(empty, tmp_path / "e")


def test_names_file_lists_observed_values_only():
    pd = PathDataset(np.array([[4, 1], [2, 1], [4, 9]]), np.array([0, 1, 1]), 7)
    assert format_names(pd) == "0,1.\nlayer1: 2,4.\nlayer2: 1,9.\n| target_dimension=7\n"
    assert format_data(pd) == "4,1,0\n2,1,1\n4,9,1\n"
