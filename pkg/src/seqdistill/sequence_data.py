"""Binary sequence datasets (piano-roll style).

A frame is a length-``D`` vector of 0/1 values, a sequence is a ``(T, D)``
uint8 array with ``T >= 2``, and a :class:`Dataset` bundles train/test lists
of sequences that share one dimension.

On disk a dataset is JSON with sparse frames::

    {"name": "toy", "dimension": 88,
     "train": [[[10, 77], [], [3]], ...],
     "test":  [...]}

Each frame lists the indices of its active units.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _rng
from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class Dataset:
    dimension: int
    train: list
    test: list = field(default_factory=list)
    name: str = "dataset"

    @property
    def n_frames_train(self):
        return sum(len(s) for s in self.train)


def expand_frame(indices, dimension):
    """Dense 0/1 frame from a sparse list of active indices (duplicates allowed)."""
    frame = np.zeros(dimension, dtype=np.uint8)
    if len(indices):
        frame[np.asarray(indices, dtype=np.int64)] = 1
    return frame


def sparsify_frame(frame):
    """Sorted list of the active indices of a dense frame."""
    return [int(i) for i in np.flatnonzero(np.asarray(frame))]


def _parse_split(raw, split, dimension, source):
    if not isinstance(raw, list):
        raise ValidationError(f"{source}: '{split}' must be an array of sequences")
    sequences = []
    for s, seq in enumerate(raw):
        if not isinstance(seq, list):
            raise ValidationError(f"{source}: {split}[{s}] is not an array of frames")
        frames = np.zeros((len(seq), dimension), dtype=np.uint8)
        for t, sparse in enumerate(seq):
            if not isinstance(sparse, list):
                raise ValidationError(f"{source}: {split}[{s}] frame {t} is not an index array")
            for idx in sparse:
                if isinstance(idx, bool) or not isinstance(idx, int):
                    raise ValidationError(
                        f"{source}: {split}[{s}] frame {t}: index {idx!r} is not an integer")
                if idx < 0 or idx >= dimension:
                    raise ValidationError(
                        f"{source}: {split}[{s}] frame {t}: index {idx} outside [0, {dimension})")
                frames[t, idx] = 1
        if len(seq) < 2:
            raise ValidationError(f"{source}: {split}[{s}] has T={len(seq)} < 2")
        sequences.append(frames)
    return sequences


def parse_pianoroll(text, source="<string>"):
    """Parse the sparse JSON encoding; see :func:`load_pianoroll`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise FormatError(
            f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line.strip()}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{source}: top level must be a JSON object")
    dimension = doc.get("dimension")
    if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
        raise ValidationError(f"{source}: 'dimension' must be a positive integer")
    train = _parse_split(doc.get("train", []), "train", dimension, source)
    test = _parse_split(doc.get("test", []), "test", dimension, source)
    if not train:
        raise ValidationError(f"{source}: train split is empty")
    return Dataset(dimension, train, test, str(doc.get("name", Path(source).stem)))


def load_pianoroll(path):
    """Load a sparse-index JSON dataset from ``path``.

    Raises
    ------
    FormatError
        Malformed JSON (message carries line/column context).
    ValidationError
        Out-of-range index, sequence shorter than two frames, or empty train split.
    """
    path = Path(path)
    return parse_pianoroll(path.read_text(encoding="utf-8"), source=str(path))


def dumps_pianoroll(dataset):
    doc = {
        "name": dataset.name,
        "dimension": int(dataset.dimension),
        "train": [[sparsify_frame(f) for f in seq] for seq in dataset.train],
        "test": [[sparsify_frame(f) for f in seq] for seq in dataset.test],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def save_pianoroll(dataset, path):
    Path(path).write_text(dumps_pianoroll(dataset), encoding="utf-8")


def _distinct_frames(rng, dimension, n_states):
    seen = set()
    frames = []
    while len(frames) < n_states:
        frame = rng.integers(0, 2, size=dimension, dtype=np.uint8)
        key = frame.tobytes()
        if key not in seen:
            seen.add(key)
            frames.append(frame)
    return np.stack(frames)


def synth_markov(seed, D, n_states, T, n_train, n_test, noise=0.0):
    """Sequences that cycle deterministically through ``n_states`` distinct frames.

    Each sequence starts at a seed-chosen phase of the cycle. With
    ``noise > 0`` every bit is flipped independently with that probability.
    The result is a pure function of the arguments.
    """
    if D < 1:
        raise ValidationError("D must be >= 1")
    if n_states < 2 or n_states > 2 ** D:
        raise ValidationError(f"n_states must lie in [2, 2**D]; got {n_states} for D={D}")
    if T < 2:
        raise ValidationError("T must be >= 2")
    if n_train < 1 or n_test < 0:
        raise ValidationError("n_train must be >= 1 and n_test >= 0")
    if not 0.0 <= noise <= 1.0:
        raise ValidationError("noise must lie in [0, 1]")
    rng = _rng.stream(seed, "data")
    states = _distinct_frames(rng, D, n_states)
    noise_rng = _rng.stream(seed, "noise")

    def make(count):
        out = []
        for _ in range(count):
            phase = int(rng.integers(n_states))
            seq = states[(phase + np.arange(T)) % n_states].copy()
            if noise > 0:
                seq ^= (noise_rng.random(seq.shape) < noise).astype(np.uint8)
            out.append(seq)
        return out

    train = make(n_train)
    test = make(n_test)
    return Dataset(D, train, test, f"markov-s{seed}-d{D}-k{n_states}")


def validate(dataset):
    """List of human-readable invariant violations; empty when the dataset is well formed."""
    problems = []
    D = dataset.dimension
    if isinstance(D, bool) or not isinstance(D, (int, np.integer)) or D < 1:
        problems.append(f"dimension {D!r} is not a positive integer")
        return problems
    if not dataset.train:
        problems.append("train split is empty")
    for split in ("train", "test"):
        for s, seq in enumerate(getattr(dataset, split)):
            arr = np.asarray(seq)
            where = f"{split}[{s}]"
            if arr.ndim != 2 or arr.shape[1] != D:
                problems.append(f"{where}: shape {arr.shape} does not match dimension {D}")
                continue
            if arr.shape[0] < 2:
                problems.append(f"{where}: T < 2 (T={arr.shape[0]})")
            bad = np.flatnonzero(~np.isin(arr, (0, 1)).all(axis=1))
            for t in bad:
                problems.append(f"{where} frame {int(t)}: values outside {{0,1}}")
    return problems
