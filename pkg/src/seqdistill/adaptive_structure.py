"""Neuron generation / annihilation and layer generation for RNN-RBM stacks.

A :class:`NeuronMonitor` keeps a sliding window of per-batch CD gradients and
hidden activations. Between epochs the layer trainer asks two questions:

* generation: is some neuron's bias gradient *and* weight gradient still
  fluctuating strongly? The product of the two windowed variances above
  ``gen_threshold`` means the neuron is overloaded, so it is split in two.
* annihilation: is some neuron stuck off or on (windowed mean activation
  below ``ann_threshold`` or above ``1 - ann_threshold``)? Then it carries no
  information and is removed.

At most one edit happens per check. A freshly generated neuron cannot be
annihilated until it has been observed for a full window.
"""
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _rng
from .errors import CapacityError, DimensionError, ValidationError
from .rnn_rbm import train_sequences


@dataclass
class StructureConfig:
    gen_threshold: float = 0.05
    ann_threshold: float = 0.01
    layer_threshold: float = 1.0
    max_hidden: int = 128
    max_layers: int = 5
    check_interval: int = 5
    window_len: int = 10
    initial_hidden: int = 16
    n_recurrent: int = None

    def __post_init__(self):
        if not self.gen_threshold > 0:
            raise ValidationError("gen_threshold must be > 0")
        if not 0 < self.ann_threshold < 1:
            raise ValidationError("ann_threshold must lie in (0, 1)")
        if not self.layer_threshold > 0:
            raise ValidationError("layer_threshold must be > 0")
        if self.max_layers < 1:
            raise ValidationError("max_layers must be >= 1")
        if self.initial_hidden < 1 or self.max_hidden < self.initial_hidden:
            raise ValidationError("need 1 <= initial_hidden <= max_hidden")
        if self.window_len < 2:
            raise ValidationError("window_len must be >= 2")
        if self.check_interval < 1:
            raise ValidationError("check_interval must be >= 1")


@dataclass
class NeuronMonitor:
    """Sliding-window statistics per hidden neuron."""
    n_hidden: int
    window_len: int = 10
    dc_hist: deque = field(default=None, repr=False)
    dW_hist: deque = field(default=None, repr=False)
    act_hist: deque = field(default=None, repr=False)
    age: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.window_len < 2:
            raise ValidationError("window_len must be >= 2")
        self.dc_hist = deque(maxlen=self.window_len)
        self.dW_hist = deque(maxlen=self.window_len)
        self.act_hist = deque(maxlen=self.window_len)
        self.age = np.zeros(self.n_hidden, dtype=np.int64)

    @property
    def full(self):
        return len(self.dc_hist) >= self.window_len

    @property
    def gradient_variance_c(self):
        if not self.dc_hist:
            return np.zeros(self.n_hidden)
        return np.var(np.stack(self.dc_hist), axis=0)

    @property
    def gradient_variance_W(self):
        """Per-entry windowed variance of ``dW[:, j]``, averaged over the column."""
        if not self.dW_hist:
            return np.zeros(self.n_hidden)
        return np.var(np.stack(self.dW_hist), axis=0).mean(axis=0)

    @property
    def mean_activation(self):
        if not self.act_hist:
            return np.zeros(self.n_hidden)
        return np.mean(np.stack(self.act_hist), axis=0)

    def _edit(self, fn):
        for hist in (self.dc_hist, self.dW_hist, self.act_hist):
            items = [fn(a) for a in hist]
            hist.clear()
            hist.extend(items)


def update_monitor(monitor, grad, activations):
    """Push one batch of statistics; ``grad`` needs ``W`` (D, H) and ``c`` (H,) attributes."""
    dW = np.asarray(grad.W)
    dc = np.asarray(grad.c)
    act = np.asarray(activations, dtype=np.float64)
    H = monitor.n_hidden
    if dc.shape != (H,) or dW.ndim != 2 or dW.shape[1] != H or act.shape != (H,):
        raise DimensionError(
            f"monitor tracks H={H}; got dc {dc.shape}, dW {dW.shape}, activations {act.shape}")
    monitor.dc_hist.append(dc.copy())
    monitor.dW_hist.append(dW.copy())
    monitor.act_hist.append(act.copy())
    monitor.age += 1
    return monitor


def generation_check(monitor, config):
    """Index of the single neuron to split (as a list), or ``[]``.

    Ties on the variance product go to the lower index.
    """
    if not monitor.full or monitor.n_hidden >= config.max_hidden:
        return []
    score = monitor.gradient_variance_c * monitor.gradient_variance_W
    if not np.any(score > config.gen_threshold):
        return []
    return [int(np.argmax(score))]


def annihilation_check(monitor, config):
    """Stuck neurons old enough to have a full window of history, in index order."""
    if not monitor.full:
        return []
    m = monitor.mean_activation
    stuck = (m < config.ann_threshold) | (m > 1.0 - config.ann_threshold)
    stuck &= monitor.age >= monitor.window_len
    return [int(j) for j in np.flatnonzero(stuck)]


def insert_neuron(params, parent, rng, max_hidden=None, monitor=None):
    """Split ``parent``: append a noisy copy of its ``W`` column, ``c`` entry and ``W_uh`` column.

    Noise is Gaussian with std ``0.01 * |value| + 1e-4`` per copied entry.
    The parent and every other parameter are left untouched.
    """
    H = params.n_hidden
    if max_hidden is not None and H >= max_hidden:
        raise CapacityError(f"layer already has max_hidden={max_hidden} neurons")
    if not 0 <= parent < H:
        raise DimensionError(f"parent index {parent} outside [0, {H})")

    def jitter(x):
        x = np.asarray(x, dtype=np.float64)
        return x + rng.normal(0.0, 1.0, size=x.shape) * (0.01 * np.abs(x) + 1e-4)

    new = params.copy()
    new.W = np.concatenate([params.W, jitter(params.W[:, parent])[:, None]], axis=1)
    new.c = np.append(params.c, jitter(params.c[parent]))
    new.W_uh = np.concatenate([params.W_uh, jitter(params.W_uh[:, parent])[:, None]], axis=1)
    new.check()
    if monitor is not None:
        monitor._edit(lambda a: np.concatenate([a, np.zeros(a.shape[:-1] + (1,))], axis=-1))
        monitor.age = np.append(monitor.age, 0)
        monitor.n_hidden += 1
    return new


def remove_neuron(params, j, monitor=None):
    """Delete hidden neuron ``j``; higher indices shift down by one."""
    H = params.n_hidden
    if H <= 1:
        raise CapacityError("cannot remove the last hidden neuron of a layer")
    if not 0 <= j < H:
        raise DimensionError(f"neuron index {j} outside [0, {H})")
    new = params.copy()
    new.W = np.delete(params.W, j, axis=1)
    new.c = np.delete(params.c, j)
    new.W_uh = np.delete(params.W_uh, j, axis=1)
    new.check()
    if monitor is not None:
        monitor._edit(lambda a: np.delete(a, j, axis=-1))
        monitor.age = np.delete(monitor.age, j)
        monitor.n_hidden -= 1
    return new


def layer_generation_check(trace, config, n_layers):
    """True when the newest layer still underfits and another layer fits under the cap."""
    if not trace or n_layers >= config.max_layers:
        return False
    return trace[-1] > config.layer_threshold


def probe_outputs(params, probe):
    """Step-ahead reconstruction probabilities for every step of every probe sequence.

    Used to measure how much a structural edit changes the network function.
    """
    from .rnn_rbm import _as_batch, _recurrence, _mean_field

    V, _ = _as_batch(params, probe)
    bt, ct, _ = _recurrence(params, V)
    _, a = _mean_field(params, V, bt, ct)
    return expit(a)


class StructureLog:
    """Append-only list of edit records, optionally mirrored to a JSON-lines file."""

    def __init__(self, path=None):
        self.records = []
        self.path = path
        if path is not None:
            open(path, "w").close()

    def append(self, epoch, layer, kind, index, H_after):
        rec = {"epoch": int(epoch), "layer": int(layer), "kind": kind,
               "index": int(index), "H_after": int(H_after)}
        self.records.append(rec)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return rec


def train_layer(params, sequences, hyper, config, layer=0, log=None):
    """Train one layer with neuron generation/annihilation between epochs.

    ``layer`` is the 0-based position in the stack (used for RNG sub-streams
    and log records). Returns ``(params, error_trace)``.
    """
    log = log if log is not None else StructureLog()
    monitor = NeuronMonitor(params.n_hidden, config.window_len)
    struct_rng = _rng.stream(hyper.seed, "structure", layer)

    def on_batch(_params, res):
        update_monitor(monitor, res.grad, res.hidden_mean)

    def on_epoch(epoch, current, _trace):
        if epoch % config.check_interval:
            return None
        grow = generation_check(monitor, config)
        if grow:
            new = insert_neuron(current, grow[0], struct_rng, config.max_hidden, monitor)
            log.append(epoch, layer + 1, "generate", new.n_hidden - 1, new.n_hidden)
            return new
        stuck = annihilation_check(monitor, config)
        if stuck and current.n_hidden > 1:
            new = remove_neuron(current, stuck[0], monitor)
            log.append(epoch, layer + 1, "annihilate", stuck[0], new.n_hidden)
            return new
        return None

    return train_sequences(params, sequences, hyper, layer=layer,
                           batch_hook=on_batch, epoch_hook=on_epoch)
