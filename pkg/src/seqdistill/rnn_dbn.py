"""Greedy stacks of RNN-RBM layers.

Layer ``l`` sees the per-step hidden probabilities of layer ``l - 1`` as its
visible frames. Probabilities, not samples, travel upward so inference is
deterministic.

Next-frame prediction runs the top layer's step-ahead readout and maps the
result down through every lower layer's ``visible_prob`` using that layer's
own step-ahead visible bias.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _rng
from .adaptive_structure import StructureConfig, StructureLog, layer_generation_check, train_layer
from .errors import DimensionError, FormatError, ValidationError
from .rnn_rbm import TrainHyper, init_params, params_from_dict, params_to_dict, unroll

FORMAT_VERSION = 1


@dataclass
class RnnDbnModel:
    layers: list
    structure_log: list = field(default_factory=list)
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def n_visible(self):
        return self.layers[0].n_visible

    def check(self):
        if not self.layers:
            raise DimensionError("model has no layers")
        for l, layer in enumerate(self.layers):
            layer.check()
            if l and layer.n_visible != self.layers[l - 1].n_hidden:
                raise DimensionError(
                    f"layer {l + 1} expects {layer.n_visible} inputs but layer {l} "
                    f"has {self.layers[l - 1].n_hidden} hidden units")
        return self


def _hidden_sequence(params, X):
    states = unroll(params, X)
    return expit(states.c_t + np.asarray(X, dtype=np.float64) @ params.W)


def layer_input(model, l, seq):
    """Frames seen by layer ``l`` (1-based): ``seq`` pushed through layers ``1..l-1``."""
    if not 1 <= l <= model.n_layers:
        raise ValidationError(f"layer index {l} outside [1, {model.n_layers}]")
    X = np.asarray(seq)
    for params in model.layers[:l - 1]:
        X = _hidden_sequence(params, X)
    return X


class LayerKernel:
    """Fused single-step evaluation of one trained layer.

    The state after each step holds ``c_{t+1}``, ``u_t @ W_uu + u0`` and,
    when ``readout`` is set, ``b_{t+1}``, all from one matrix product.
    """

    def __init__(self, params, readout=True):
        H = params.n_hidden
        self.H = H
        self.W = params.W
        self.WT = np.ascontiguousarray(params.W.T)
        self.M_in = np.ascontiguousarray(np.concatenate([params.W, params.W_vu], axis=1))
        blocks = [params.W_uh, params.W_uu] + ([params.W_uv] if readout else [])
        bias = [params.c, params.u0] + ([params.b] if readout else [])
        self.M_rec = np.ascontiguousarray(np.concatenate(blocks, axis=1))
        self.bias_rec = np.concatenate(bias)
        self.n_in = self.M_rec.shape[1] - (params.n_visible if readout else 0)
        self.initial_rec = expit(params.u0) @ self.M_rec + self.bias_rec

    def step(self, x, rec):
        """Hidden probabilities for input ``x`` and the state for the next step."""
        s = expit(x @ self.M_in + rec[:self.n_in])
        return s[:self.H], s[self.H:] @ self.M_rec + self.bias_rec

    def b_next(self, rec):
        return rec[self.n_in:]

    def c_next(self, rec):
        return rec[:self.H]


def compile_model(model, readout=True):
    return [LayerKernel(p, readout) for p in model.layers]


def readout(kernels, recs, last_top_input):
    """Next-frame probabilities from the per-layer states after the last step."""
    top = kernels[-1]
    h = expit(top.c_next(recs[-1]) + last_top_input @ top.W)
    p = expit(top.b_next(recs[-1]) + h @ top.WT)
    for k in range(len(kernels) - 2, -1, -1):
        p = expit(kernels[k].b_next(recs[k]) + p @ kernels[k].WT)
    return p


def forward(model, prefix, kernels=None):
    """Per-layer hidden activations at every step, and the next-frame probability vector.

    Returns ``(activations, probs)`` where ``activations[l]`` has shape
    ``(T, H_l)``.
    """
    X = np.asarray(prefix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValidationError("prefix must be a non-empty (T, D) array")
    if X.shape[1] != model.n_visible:
        raise DimensionError(f"prefix dimension {X.shape[1]} != model D={model.n_visible}")
    kernels = kernels or compile_model(model)
    T = X.shape[0]
    acts = [np.empty((T, k.H)) for k in kernels]
    recs = [k.initial_rec for k in kernels]
    for t in range(T):
        x = X[t]
        for l, k in enumerate(kernels):
            h, recs[l] = k.step(x, recs[l])
            acts[l][t] = h
            x = h
    top_input = acts[-2][-1] if len(kernels) > 1 else X[-1]
    return acts, readout(kernels, recs, top_input)


def stack_train(dataset, hyper=None, config=None, log_path=None):
    """Greedy layer-wise training with adaptive neurons and adaptive depth.

    Returns an :class:`RnnDbnModel` whose ``metadata`` carries every layer's
    error trace.
    """
    hyper = hyper or TrainHyper()
    config = config or StructureConfig()
    log = StructureLog(log_path)
    inputs = [np.asarray(s, dtype=np.float64) for s in dataset.train]
    if not inputs:
        raise ValidationError("training set is empty")
    layers, traces = [], []
    n_visible = dataset.dimension
    while True:
        l = len(layers)
        params = init_params(n_visible, config.initial_hidden, config.n_recurrent,
                             rng=_rng.stream(hyper.seed, "init", l))
        if l:
            log.append(0, l + 1, "new_layer", l + 1, params.n_hidden)
        params, trace = train_layer(params, inputs, hyper, config, layer=l, log=log)
        layers.append(params)
        traces.append(trace)
        if not layer_generation_check(trace, config, len(layers)):
            break
        inputs = [_hidden_sequence(params, X) for X in inputs]
        n_visible = params.n_hidden
    meta = {"error_traces": traces, "hyper": vars(hyper).copy(), "structure": vars(config).copy()}
    return RnnDbnModel(layers, log.records, FORMAT_VERSION, meta).check()


def dumps_model(model):
    model.check()
    doc = {
        "format_version": model.format_version,
        "kind": "rnn_dbn",
        "layers": [params_to_dict(p) for p in model.layers],
        "structure_log": model.structure_log,
        "metadata": model.metadata,
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "rnn_dbn":
        raise FormatError("not an rnn_dbn model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    layers = [params_from_dict(d) for d in doc["layers"]]
    return RnnDbnModel(layers, doc.get("structure_log", []), doc["format_version"],
                       doc.get("metadata", {})).check()


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
