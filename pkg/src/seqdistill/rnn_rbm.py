"""One recurrent RBM layer (RNN-RBM).

The recurrent state ``u`` modulates the RBM biases at each step::

    b_t = b + u_{t-1} @ W_uv
    c_t = c + u_{t-1} @ W_uh
    u_t = sigmoid(u0 + u_{t-1} @ W_uu + v_t @ W_vu)

with ``u_0 = sigmoid(u0)``. Row-vector convention throughout, so ``W_uv`` is
``(K, D)``, ``W_uh`` is ``(K, H)``, ``W_vu`` is ``(D, K)`` and ``W_uu`` is
``(K, K)``.

The differentiable training cost is a one-step-ahead mean-field
reconstruction: frame ``v_t`` is reconstructed from the previous frame under
the biases of step ``t``::

    p_t = sigmoid(b_t + W @ sigmoid(c_t + v_{t-1} @ W))

which is the same readout :func:`predict_next` uses. The cost is the mean
over ``t = 2..T`` of the cross-entropy between ``v_t`` and ``p_t``.

Training combines two gradient sources by default (``gradient="hybrid"``).
The RBM energy terms (``W``, ``b``, ``c`` and, through the biases,
``W_uv``/``W_uh``) get CD-1 estimates at every step. The recurrent weights
(``W_uu``, ``W_vu``, ``u0``) get the exact cost gradient, backpropagated
through the ``u`` chain from the last step to the first.
``gradient="exact"`` uses the cost gradient for every parameter.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _rng
from .errors import DimensionError, FormatError, TrainingDiverged, ValidationError
from .rbm_core import RbmParams, cd1_gradient

FORMAT_VERSION = 1
PARAM_NAMES = ("W", "b", "c", "u0", "W_uv", "W_uh", "W_vu", "W_uu")
RECURRENT_NAMES = ("u0", "W_uu", "W_vu")


@dataclass
class RnnRbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    u0: np.ndarray
    W_uv: np.ndarray
    W_uh: np.ndarray
    W_vu: np.ndarray
    W_uu: np.ndarray

    @property
    def n_visible(self):
        return self.W.shape[0]

    @property
    def n_hidden(self):
        return self.W.shape[1]

    @property
    def n_recurrent(self):
        return self.u0.shape[0]

    @property
    def rbm(self):
        return RbmParams(self.W, self.b, self.c)

    def arrays(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return RnnRbmParams(**{k: v.copy() for k, v in self.arrays().items()})

    def expected_shapes(self):
        D, H = self.W.shape
        K = self.u0.shape[0]
        return {"W": (D, H), "b": (D,), "c": (H,), "u0": (K,), "W_uv": (K, D),
                "W_uh": (K, H), "W_vu": (D, K), "W_uu": (K, K)}

    def check(self):
        if self.W.ndim != 2 or self.u0.ndim != 1:
            raise DimensionError("W must be 2-D and u0 1-D")
        if self.u0.shape[0] < 1:
            raise DimensionError("recurrent size K must be >= 1")
        for name, shape in self.expected_shapes().items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
        return self

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())


@dataclass
class UnrolledStates:
    """Per-step biases and recurrent states; ``u[0]`` is the initial state."""
    b_t: np.ndarray
    c_t: np.ndarray
    u: np.ndarray


@dataclass
class TrainHyper:
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 10
    seed: int = 0
    clip_norm: float = 5.0
    gradient: str = "hybrid"

    def __post_init__(self):
        if self.gradient not in ("hybrid", "exact"):
            raise ValidationError(f"gradient must be 'hybrid' or 'exact', not {self.gradient!r}")
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")


def init_params(n_visible, n_hidden, n_recurrent=None, rng=None, seed=0):
    """Small Gaussian weights (std 0.01), zero biases, ``u0 ~ U(-0.1, 0.1)``."""
    K = n_hidden if n_recurrent is None else n_recurrent
    if rng is None:
        rng = _rng.stream(seed, "init")
    D, H = n_visible, n_hidden

    def gauss(*shape):
        return rng.normal(0.0, 0.01, size=shape)

    return RnnRbmParams(
        W=gauss(D, H), b=np.zeros(D), c=np.zeros(H), u0=rng.uniform(-0.1, 0.1, size=K),
        W_uv=gauss(K, D), W_uh=gauss(K, H), W_vu=gauss(D, K), W_uu=gauss(K, K),
    ).check()


def zeros_like(params):
    return RnnRbmParams(**{k: np.zeros_like(v) for k, v in params.arrays().items()})


def _as_batch(params, seq):
    V = np.asarray(seq, dtype=np.float64)
    single = V.ndim == 2
    if single:
        V = V[None]
    if V.ndim != 3:
        raise DimensionError(f"sequence must be (T, D) or (B, T, D); got shape {V.shape}")
    if V.shape[2] != params.n_visible:
        raise DimensionError(
            f"sequence dimension {V.shape[2]} does not match W (D={params.n_visible})")
    if params.W_vu.shape[0] != V.shape[2]:
        raise DimensionError(f"W_vu has {params.W_vu.shape[0]} rows, sequence has D={V.shape[2]}")
    return V, single


def _recurrence(params, V):
    """u chain and time-dependent biases for a (B, T, D) batch."""
    B, T, _ = V.shape
    K = params.n_recurrent
    u = np.empty((B, T + 1, K))
    u[:, 0] = expit(params.u0)
    drive = V @ params.W_vu + params.u0
    for t in range(T):
        u[:, t + 1] = expit(drive[:, t] + u[:, t] @ params.W_uu)
    prev = u[:, :T]
    return prev @ params.W_uv + params.b, prev @ params.W_uh + params.c, u


def unroll(params, seq):
    """Biases ``b_t``, ``c_t`` for t = 1..T and states ``u_0..u_T``."""
    V, single = _as_batch(params, seq)
    bt, ct, u = _recurrence(params, V)
    if single:
        bt, ct, u = bt[0], ct[0], u[0]
    return UnrolledStates(bt, ct, u)


def _mean_field(params, V, bt, ct):
    """Hidden and visible pre-activations of the step-ahead reconstruction of ``V[:, 1:]``."""
    ph = expit(ct[:, 1:] + V[:, :-1] @ params.W)
    a = bt[:, 1:] + ph @ params.W.T
    return ph, a


def _step_costs(V, a):
    # cross-entropy of Bernoulli(sigmoid(a)) against targets V, summed over units
    return (np.logaddexp(0.0, a) - V * a).sum(axis=-1)


def sequence_cost(params, seq):
    """Mean over steps 2..T of the step-ahead reconstruction cross-entropy (nats).

    Returns a float for one ``(T, D)`` sequence, or an array of per-sequence
    costs for a ``(B, T, D)`` batch.
    """
    V, single = _as_batch(params, seq)
    if V.shape[1] < 2:
        raise ValidationError("sequences need T >= 2")
    bt, ct, _ = _recurrence(params, V)
    _, a = _mean_field(params, V, bt, ct)
    cost = _step_costs(V[:, 1:], a).mean(axis=1)
    return float(cost[0]) if single else cost


def _cost_backward(params, V, bt, ct, u):
    """Exact gradient of the batch-mean sequence_cost, plus the per-sequence costs."""
    B, T, D = V.shape
    H = params.n_hidden
    K = params.n_recurrent
    ph, a = _mean_field(params, V, bt, ct)
    target = V[:, 1:]
    costs = _step_costs(target, a).mean(axis=1)
    g = zeros_like(params)

    d_a = (expit(a) - target) / ((T - 1) * B)
    d_zh = (d_a @ params.W) * ph * (1.0 - ph)
    g.b = d_a.sum(axis=(0, 1))
    g.c = d_zh.sum(axis=(0, 1))
    g.W = (d_a.reshape(-1, D).T @ ph.reshape(-1, H)
           + V[:, :-1].reshape(-1, D).T @ d_zh.reshape(-1, H))
    prev = u[:, 1:T].reshape(-1, K)
    g.W_uv = prev.T @ d_a.reshape(-1, D)
    g.W_uh = prev.T @ d_zh.reshape(-1, H)
    d_prev = np.zeros((B, T, K))
    d_prev[:, 1:] = d_a @ params.W_uv.T + d_zh @ params.W_uh.T
    _recurrent_backward(params, V, u, d_prev, g)
    return g, costs


def _recurrent_backward(params, V, u, d_prev, g):
    """Backpropagate ``d_prev`` (gradient w.r.t. u_{t-1} at each step t) through the u chain.

    Fills ``g.u0``, ``g.W_uu`` and ``g.W_vu`` in place.
    """
    T = V.shape[1]
    du = np.zeros((V.shape[0], params.n_recurrent))
    g.u0 = np.zeros_like(params.u0)
    g.W_uu = np.zeros_like(params.W_uu)
    g.W_vu = np.zeros_like(params.W_vu)
    for t in range(T - 1, -1, -1):
        ut = u[:, t + 1]
        dz = du * ut * (1.0 - ut)
        g.u0 += dz.sum(axis=0)
        g.W_uu += u[:, t].T @ dz
        g.W_vu += V[:, t].T @ dz
        du = dz @ params.W_uu.T + d_prev[:, t]
    u_init = u[0, 0]
    g.u0 += du.sum(axis=0) * u_init * (1.0 - u_init)


def cost_gradients(params, seq):
    """(cost, gradient of the cost) with respect to every parameter.

    For a batch the cost is the batch mean and so is the gradient.
    """
    V, _ = _as_batch(params, seq)
    if V.shape[1] < 2:
        raise ValidationError("sequences need T >= 2")
    bt, ct, u = _recurrence(params, V)
    g, costs = _cost_backward(params, V, bt, ct, u)
    return float(costs.mean()), g


@dataclass
class BatchResult:
    grad: RnnRbmParams
    costs: np.ndarray
    hidden_mean: np.ndarray = field(repr=False)


def _hybrid(params, V, rng, mode="hybrid"):
    B, T, D = V.shape
    H = params.n_hidden
    K = params.n_recurrent
    bt, ct, u = _recurrence(params, V)
    cost_grad, costs = _cost_backward(params, V, bt, ct, u)
    hidden_mean = expit(ct + V @ params.W).mean(axis=(0, 1))
    if mode == "exact":
        g = zeros_like(params)
        for name in PARAM_NAMES:
            setattr(g, name, -getattr(cost_grad, name))
        return BatchResult(g, costs, hidden_mean)
    cd = cd1_gradient(V, params.rbm, bt, ct, rng)
    n = B * T
    prev = u[:, :T].reshape(-1, K)
    g = zeros_like(params)
    g.W = cd.dW / n
    g.b = cd.db.sum(axis=(0, 1)) / n
    g.c = cd.dc.sum(axis=(0, 1)) / n
    g.W_uv = prev.T @ cd.db.reshape(-1, D) / n
    g.W_uh = prev.T @ cd.dc.reshape(-1, H) / n
    for name in RECURRENT_NAMES:
        setattr(g, name, -getattr(cost_grad, name))
    return BatchResult(g, costs, hidden_mean)


def bptt_gradients(params, seq, rng):
    """Ascent direction for one sequence (or the mean over a same-length batch).

    ``W``, ``b``, ``c``, ``W_uv`` and ``W_uh`` come from per-step CD-1 (the
    bias gradients are routed to ``W_uv``/``W_uh`` with ``u_{t-1}`` as the
    coefficient). ``u0``, ``W_uu`` and ``W_vu`` are the negated exact
    gradients of :func:`sequence_cost` through the recurrent chain.
    """
    V, _ = _as_batch(params, seq)
    if V.shape[1] < 2:
        raise ValidationError("sequences need T >= 2")
    return _hybrid(params, V, rng).grad


def clip_by_norm(grad, max_norm):
    """Rescale each parameter group whose L2 norm exceeds ``max_norm``."""
    for name in PARAM_NAMES:
        arr = getattr(grad, name)
        norm = float(np.sqrt(np.sum(arr * arr)))
        if norm > max_norm:
            setattr(grad, name, arr * (max_norm / norm))
    return grad


def batch_gradient(params, sequences, rng, mode="hybrid"):
    """Mean hybrid gradient over sequences of possibly different lengths.

    Same-length sequences are stacked; groups are reduced in order of first
    appearance so the result does not depend on how work is split.
    """
    groups = {}
    for i, seq in enumerate(sequences):
        groups.setdefault(len(seq), []).append(i)
    total = zeros_like(params)
    costs = np.empty(len(sequences))
    hidden = np.zeros(params.n_hidden)
    n = len(sequences)
    for idx in groups.values():
        V = np.stack([np.asarray(sequences[i], dtype=np.float64) for i in idx])
        res = _hybrid(params, V, rng, mode)
        w = len(idx) / n
        for name in PARAM_NAMES:
            setattr(total, name, getattr(total, name) + w * getattr(res.grad, name))
        costs[idx] = res.costs
        hidden += w * res.hidden_mean
    return BatchResult(total, costs, hidden)


def apply_update(params, grad, learning_rate):
    for name in PARAM_NAMES:
        setattr(params, name, getattr(params, name) + learning_rate * getattr(grad, name))


def run_epoch(params, sequences, hyper, shuffle_rng, sample_rng, batch_hook=None):
    """One SGD pass; mutates ``params`` in place and returns the mean sequence cost.

    ``batch_hook(params, BatchResult)`` is called after every update.
    """
    order = shuffle_rng.permutation(len(sequences))
    costs = np.empty(len(sequences))
    for start in range(0, len(order), hyper.batch_size):
        idx = order[start:start + hyper.batch_size]
        res = batch_gradient(params, [sequences[i] for i in idx], sample_rng, hyper.gradient)
        if hyper.clip_norm:
            clip_by_norm(res.grad, hyper.clip_norm)
        apply_update(params, res.grad, hyper.learning_rate)
        costs[idx] = res.costs
        if batch_hook is not None:
            batch_hook(params, res)
    return float(costs.mean())


def train_sequences(params, sequences, hyper, layer=0, batch_hook=None, epoch_hook=None):
    """Train on a list of ``(T, D)`` arrays; returns ``(params, error_trace)``.

    ``epoch_hook(epoch, params, trace)`` may return replacement params (used
    for structural edits between epochs).
    """
    if not sequences:
        raise ValidationError("training set is empty")
    params = params.copy()
    shuffle_rng = _rng.stream(hyper.seed, "shuffle", layer)
    sample_rng = _rng.stream(hyper.seed, "sampling", layer)
    trace = []
    for epoch in range(1, hyper.epochs + 1):
        err = run_epoch(params, sequences, hyper, shuffle_rng, sample_rng, batch_hook)
        if not (np.isfinite(err) and params.is_finite()):
            raise TrainingDiverged(
                f"non-finite parameters or error in layer {layer + 1} at epoch {epoch}",
                last_good_epoch=epoch - 1)
        trace.append(err)
        if epoch_hook is not None:
            replaced = epoch_hook(epoch, params, trace)
            if replaced is not None:
                params = replaced
    return params, trace


def train(params, dataset, hyper):
    """Minibatch SGD on ``dataset.train``; returns ``(params', per-epoch error trace)``."""
    if dataset.dimension != params.n_visible:
        raise DimensionError(
            f"dataset dimension {dataset.dimension} != layer visible size {params.n_visible}")
    return train_sequences(params, dataset.train, hyper)


def step_ahead_biases(params, u_last):
    return params.b + u_last @ params.W_uv, params.c + u_last @ params.W_uh


def predict_next(params, prefix):
    """Probability vector for the frame after ``prefix``.

    Mean-field reconstruction of the last frame under the step-ahead biases
    derived from ``u_T``.
    """
    V, _ = _as_batch(params, prefix)
    if V.shape[1] < 1:
        raise ValidationError("prefix must contain at least one frame")
    V = V[0]
    states = unroll(params, V)
    b_next, c_next = step_ahead_biases(params, states.u[-1])
    h = expit(c_next + V[-1] @ params.W)
    return expit(b_next + h @ params.W.T)


def params_to_dict(params):
    out = {"D": params.n_visible, "H": params.n_hidden, "K": params.n_recurrent}
    out["arrays"] = {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        for name, arr in params.arrays().items()
    }
    return out


def params_from_dict(doc):
    try:
        arrays = {
            name: np.asarray(doc["arrays"][name]["data"], dtype=np.float64).reshape(
                doc["arrays"][name]["shape"])
            for name in PARAM_NAMES
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed layer record: {exc}") from exc
    params = RnnRbmParams(**arrays).check()
    if (params.n_visible, params.n_hidden, params.n_recurrent) != (doc["D"], doc["H"], doc["K"]):
        raise FormatError("declared D/H/K disagree with array shapes")
    return params


def dumps_params(params, metadata=None):
    doc = {"format_version": FORMAT_VERSION, **params_to_dict(params),
           "metadata": metadata or {}}
    return json.dumps(doc, sort_keys=True) + "\n"


def loads_params(text):
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    return params_from_dict(doc), doc.get("metadata", {})
