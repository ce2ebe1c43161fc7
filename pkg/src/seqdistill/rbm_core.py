"""Bernoulli-Bernoulli RBM primitives with externally supplied biases.

Conventions: ``W`` has shape ``(D, H)``; visible vectors are rows, so
``v @ W`` is the hidden pre-activation. All functions broadcast over leading
batch axes. The biases are passed explicitly because the recurrent layer
computes time-dependent ``b_t`` / ``c_t`` before calling in here.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, ValidationError


@dataclass
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def n_visible(self):
        return self.W.shape[0]

    @property
    def n_hidden(self):
        return self.W.shape[1]

    def check(self):
        if self.W.ndim != 2:
            raise DimensionError(f"W must be 2-D, got shape {self.W.shape}")
        D, H = self.W.shape
        if self.b.shape != (D,):
            raise DimensionError(f"b has shape {self.b.shape}, expected ({D},)")
        if self.c.shape != (H,):
            raise DimensionError(f"c has shape {self.c.shape}, expected ({H},)")
        for name in ("W", "b", "c"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite entries")
        return self


@dataclass
class RbmGradient:
    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray


def sigmoid(x):
    """Logistic function, overflow-free for any finite input (scalars and arrays)."""
    out = expit(np.asarray(x, dtype=np.float64))
    return out if out.ndim else float(out)


def _check_pair(vec, W, bias, axis):
    vec = np.asarray(vec, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    inner = W.shape[axis]
    outer = W.shape[1 - axis]
    if vec.shape[-1] != inner:
        raise DimensionError(f"input has length {vec.shape[-1]}, W expects {inner}")
    if bias.shape[-1] != outer:
        raise DimensionError(f"bias has length {bias.shape[-1]}, W expects {outer}")
    return vec, bias


def hidden_prob(v, W, c_t):
    """p(h_j = 1 | v) = sigmoid(c_t[j] + sum_i v[i] W[i, j])."""
    v, c_t = _check_pair(v, W, c_t, 0)
    return expit(c_t + v @ W)


def visible_prob(h, W, b_t):
    """p(v_i = 1 | h) = sigmoid(b_t[i] + sum_j W[i, j] h[j])."""
    h, b_t = _check_pair(h, W, b_t, 1)
    return expit(b_t + h @ W.T)


def sample_bernoulli(probs, rng):
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(~((probs >= 0.0) & (probs <= 1.0))):
        raise ValidationError("probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def cd1_gradient(v0, params, b_t, c_t, rng):
    """One-step contrastive divergence estimate of the log-likelihood ascent direction.

    Chain ``v0 -> h0 -> v1 -> h1``: the hidden state and the reconstruction
    are Bernoulli samples, while the statistics use hidden probabilities.
    Accepts frames with leading batch axes and matching bias batches. ``dW``
    is summed over the batch; ``db`` and ``dc`` keep the batch shape so the
    caller can route them through time-dependent biases.
    """
    W = params.W
    v0 = np.asarray(v0, dtype=np.float64)
    ph0 = hidden_prob(v0, W, c_t)
    h0 = sample_bernoulli(ph0, rng)
    v1 = sample_bernoulli(visible_prob(h0, W, b_t), rng)
    ph1 = hidden_prob(v1, W, c_t)
    v0f = v0.reshape(-1, W.shape[0])
    v1f = v1.reshape(-1, W.shape[0])
    dW = v0f.T @ ph0.reshape(-1, W.shape[1]) - v1f.T @ ph1.reshape(-1, W.shape[1])
    return RbmGradient(dW, v0 - v1, ph0 - ph1)


def free_energy(v, params, b_t, c_t):
    """F(v) = -b_t.v - sum_j softplus(c_t[j] + (v W)[j]), so p(v) is proportional to exp(-F(v))."""
    v = np.asarray(v, dtype=np.float64)
    pre = np.asarray(c_t) + v @ params.W
    return -(v @ np.asarray(b_t)) - np.logaddexp(0.0, pre).sum(axis=-1)
