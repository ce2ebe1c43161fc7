"""Fired-path tables: the bridge from a trained stack to C4.5.

For each time step ``t`` the attributes are the index of the most active
hidden neuron in every layer, and the class is bit ``d`` of frame ``t + 1``.
One table per output dimension.

C4.5 file pair written for a table with stem ``out/dim03``::

    out/dim03.names     0,1.
                        layer1: 10,34,77.
                        ...
                        | target_dimension=3
    out/dim03.data      10,77,34,54,54,0
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ValidationError
from .rnn_dbn import compile_model, forward


@dataclass
class PathDataset:
    paths: np.ndarray          # (N, L) int64 neuron indices
    labels: np.ndarray         # (N,) int64 in {0, 1}
    target_dimension: int
    attribute_values: list = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        paths = np.asarray(self.paths, dtype=np.int64)
        if paths.ndim != 2 or len(paths) != len(self.labels):
            raise DimensionError(
                f"paths must be (N, L) with N = {len(self.labels)} labels; got {paths.shape}")
        self.paths = paths
        if self.attribute_values is None:
            self.attribute_values = [tuple(int(v) for v in np.unique(self.paths[:, a]))
                                     for a in range(self.paths.shape[1])]

    @property
    def n_layers(self):
        return self.paths.shape[1]

    @property
    def attribute_names(self):
        return [f"layer{a + 1}" for a in range(self.n_layers)]

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return (isinstance(other, PathDataset)
                and self.target_dimension == other.target_dimension
                and np.array_equal(self.paths, other.paths)
                and np.array_equal(self.labels, other.labels)
                and list(self.attribute_values) == list(other.attribute_values))


def most_fired(activations):
    """Index of the largest activation in each layer (lowest index on ties)."""
    path = []
    for l, act in enumerate(activations):
        act = np.asarray(act)
        if act.size == 0:
            raise ValidationError(f"layer {l + 1} has no activations")
        path.append(int(np.argmax(act)))
    return tuple(path)


def fired_paths(model, seq, kernels=None):
    """(T, L) fired paths for every step of one sequence, from a single forward pass.

    Activations at step ``t`` depend only on frames ``1..t``, so this equals
    running :func:`forward` on each prefix.
    """
    acts, _ = forward(model, seq, kernels)
    return np.stack([np.argmax(a, axis=1) for a in acts], axis=1)


def path_table(model, sequences):
    """Fired paths and next frames for all steps ``1..T-1`` of every sequence, in order."""
    kernels = compile_model(model)
    paths, nxt = [], []
    for seq in sequences:
        seq = np.asarray(seq)
        paths.append(fired_paths(model, seq, kernels)[:-1])
        nxt.append(seq[1:])
    return np.concatenate(paths), np.concatenate(nxt).astype(np.int64)


def build_path_dataset(model, dataset, target_dimension, table=None):
    """C4.5 training table for output bit ``target_dimension``.

    ``table`` may carry a precomputed :func:`path_table` result so that all
    dimensions share one pass over the data.
    """
    if not 0 <= target_dimension < dataset.dimension:
        raise ValidationError(
            f"target dimension {target_dimension} outside [0, {dataset.dimension})")
    paths, nxt = table if table is not None else path_table(model, dataset.train)
    return PathDataset(paths, nxt[:, target_dimension], target_dimension)


def _stem_paths(stem):
    stem = Path(stem)
    return stem.with_name(stem.name + ".names"), stem.with_name(stem.name + ".data")


def format_names(pd):
    lines = ["0,1."]
    for name, values in zip(pd.attribute_names, pd.attribute_values):
        lines.append(f"{name}: {','.join(str(v) for v in values)}.")
    lines.append(f"| target_dimension={pd.target_dimension}")
    return "\n".join(lines) + "\n"


def format_data(pd):
    rows = np.column_stack([pd.paths, pd.labels])
    return "".join(",".join(str(int(x)) for x in row) + "\n" for row in rows)


def write_c45_files(pd, stem):
    """Write ``<stem>.names`` and ``<stem>.data``; returns both paths."""
    if len(pd) == 0:
        raise ValidationError("refusing to write an empty path dataset")
    names_path, data_path = _stem_paths(stem)
    try:
        names_path.write_bytes(format_names(pd).encode("ascii"))
        data_path.write_bytes(format_data(pd).encode("ascii"))
    except OSError as exc:
        raise OSError(f"cannot write C4.5 files for stem {stem}: {exc}") from exc
    return names_path, data_path


def _parse_names(text, where):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "0,1.":
        raise FormatError(f"{where}:1: expected class line '0,1.'")
    values, target = [], None
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if line.startswith("|"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "target_dimension":
                target = int(val)
            continue
        name, sep, rest = line.partition(":")
        if not sep or not rest.strip().endswith(".") or name.strip() != f"layer{len(values) + 1}":
            raise FormatError(f"{where}:{n}: malformed attribute line {line!r}")
        body = rest.strip()[:-1]
        try:
            values.append(tuple(int(v) for v in body.split(",")) if body else ())
        except ValueError as exc:
            raise FormatError(f"{where}:{n}: non-integer attribute value") from exc
    if target is None:
        raise FormatError(f"{where}: missing '| target_dimension=' line")
    return values, target


def read_c45_files(stem):
    """Inverse of :func:`write_c45_files`."""
    names_path, data_path = _stem_paths(stem)
    values, target = _parse_names(names_path.read_text(encoding="ascii"), names_path)
    n_cols = len(values) + 1
    rows = []
    for n, line in enumerate(data_path.read_text(encoding="ascii").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise FormatError(f"{data_path}:{n}: expected {n_cols} columns, got {len(parts)}")
        try:
            row = [int(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{data_path}:{n}: non-integer value") from exc
        for a, v in enumerate(row[:-1]):
            if v not in values[a]:
                raise FormatError(f"{data_path}:{n}: value {v} not declared for layer{a + 1}")
        if row[-1] not in (0, 1):
            raise FormatError(f"{data_path}:{n}: class {row[-1]} is not 0 or 1")
        rows.append(row)
    if not rows:
        raise ValidationError(f"{data_path}: no data rows")
    arr = np.asarray(rows, dtype=np.int64)
    return PathDataset(arr[:, :-1], arr[:, -1], target, [tuple(v) for v in values])
