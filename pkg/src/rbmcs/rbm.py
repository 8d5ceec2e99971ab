"""Bernoulli-Bernoulli restricted Boltzmann machine over support patterns.

The marginal over visible units is ``p(v) = exp(-E(v)) / Z`` with free energy

    E(v) = -sum_j softplus(W[:, j] . v + b_h[j]) - b_v . v
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

log = logging.getLogger(__name__)

MAX_EXACT_VISIBLE = 20


def softplus(z):
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


@dataclass(frozen=True)
class RbmModel:
    weights: np.ndarray = field(repr=False)
    visible_bias: np.ndarray = field(repr=False)
    hidden_bias: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("weights", "visible_bias", "hidden_bias"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        j, p = self.weights.shape
        if self.visible_bias.shape != (j,) or self.hidden_bias.shape != (p,):
            raise ValueError("bias shapes do not match the weight matrix")
        for arr in (self.weights, self.visible_bias, self.hidden_bias):
            if not np.all(np.isfinite(arr)):
                raise ValueError("RBM parameters must be finite")
            arr.setflags(write=False)

    @property
    def n_visible(self):
        return self.weights.shape[0]

    @property
    def n_hidden(self):
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))


@dataclass(frozen=True)
class CDHyperparameters:
    learning_rate: float = 0.05
    batch_size: int = 100
    epochs: int = 50
    initial_momentum: float = 0.5
    final_momentum: float = 0.9
    momentum_switch_epoch: int = 5
    weight_decay: float = 1e-4
    init_weight_std: float = 0.01
    gibbs_steps: int = 1


def free_energy(rbm, v):
    """Free energy of one pattern (1-D) or a batch of patterns (rows of 2-D)."""
    v = np.asarray(v, dtype=float)
    pre = v @ rbm.weights + rbm.hidden_bias
    return -softplus(pre).sum(axis=-1) - v @ rbm.visible_bias


def prior_log_score(rbm, pattern):
    """``log p(v) + log Z``; differences between patterns are exact log-odds."""
    return -free_energy(rbm, pattern)


def log_score_gradients(rbm, v):
    """Gradients of ``-E(v)`` with respect to ``(W, b_v, b_h)``."""
    v = np.asarray(v, dtype=float)
    ph = hidden_probs(rbm, v)
    return np.outer(v, ph), v.copy(), ph


def hidden_probs(rbm, v):
    v = np.asarray(v, dtype=float)
    return expit(v @ rbm.weights + rbm.hidden_bias)


def visible_probs(rbm, h):
    h = np.asarray(h, dtype=float)
    return expit(h @ rbm.weights.T + rbm.visible_bias)


def all_binary_states(n):
    """All ``2**n`` binary vectors as rows, in counting order."""
    codes = np.arange(2 ** n, dtype=np.int64)[:, None]
    return ((codes >> np.arange(n)[None, :]) & 1).astype(float)


def exact_log_partition(rbm, chunk=1 << 14):
    """Brute-force ``log Z`` summing over every visible state (small ``J`` only)."""
    j = rbm.n_visible
    if j > MAX_EXACT_VISIBLE:
        raise ValueError(f"exact partition refused for {j} > {MAX_EXACT_VISIBLE} visible units")
    parts = []
    total = 2 ** j
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)[:, None]
        states = ((codes >> np.arange(j)[None, :]) & 1).astype(float)
        parts.append(logsumexp(-free_energy(rbm, states)))
    return float(logsumexp(parts))


def average_log_likelihood(rbm, patterns):
    """Exact mean log-likelihood of the columns of a ``J x B`` pattern matrix."""
    patterns = np.asarray(patterns, dtype=float)
    return float(np.mean(-free_energy(rbm, patterns.T)) - exact_log_partition(rbm))


def _default_init(data, n_hidden, hyper, rng):
    n_obs, n_vis = data.shape
    if n_obs == 1:
        freq = np.full(n_vis, 0.5)
    else:
        freq = np.clip(data.mean(axis=0), 1.0 / n_obs, 1.0 - 1.0 / n_obs)
    W = hyper.init_weight_std * rng.standard_normal((n_vis, n_hidden))
    return RbmModel(W, np.log(freq / (1.0 - freq)), np.zeros(n_hidden))


def initial_model(patterns, n_hidden, hyper=None, seed=None):
    """The starting point :func:`cd_train` uses for the same ``seed``."""
    data = np.asarray(patterns, dtype=float).T
    rng = np.random.default_rng(seed)
    return _default_init(data, n_hidden, hyper or CDHyperparameters(), rng)


def cd_train(patterns, n_hidden, hyper=None, seed=None, init=None):
    """Fit an RBM to the columns of a ``J x B`` binary matrix with CD-k.

    ``init`` overrides the default initialization (small Gaussian weights,
    zero hidden biases, visible biases at the clamped log-odds of each
    unit's activation frequency).
    """
    hyper = hyper or CDHyperparameters()
    data = np.asarray(patterns)
    if data.ndim != 2:
        raise ValueError("patterns must be a J x B matrix")
    if not np.all((data == 0) | (data == 1)):
        raise ValueError("patterns must be binary")
    if n_hidden < 1:
        raise ValueError("n_hidden must be >= 1")
    n_vis, n_obs = data.shape
    if n_obs < 1:
        raise ValueError("need at least one training pattern")
    data = data.T.astype(float)

    rng = np.random.default_rng(seed)
    if init is None:
        init = _default_init(data, n_hidden, hyper, rng)
    W = np.array(init.weights)
    b_v = np.array(init.visible_bias)
    b_h = np.array(init.hidden_bias)

    dW = np.zeros_like(W)
    dbv = np.zeros_like(b_v)
    dbh = np.zeros_like(b_h)
    lr = hyper.learning_rate
    batch = max(1, int(hyper.batch_size))

    for epoch in range(hyper.epochs):
        momentum = (hyper.initial_momentum if epoch < hyper.momentum_switch_epoch
                    else hyper.final_momentum)
        order = rng.permutation(n_obs)
        for start in range(0, n_obs, batch):
            v0 = data[order[start:start + batch]]
            ph0 = expit(v0 @ W + b_h)
            vk, phk = v0, ph0
            hk = (rng.random(ph0.shape) < ph0).astype(float)
            for _ in range(hyper.gibbs_steps):
                pvk = expit(hk @ W.T + b_v)
                vk = (rng.random(pvk.shape) < pvk).astype(float)
                phk = expit(vk @ W + b_h)
                hk = (rng.random(phk.shape) < phk).astype(float)
            size = v0.shape[0]
            grad_W = (v0.T @ ph0 - vk.T @ phk) / size - hyper.weight_decay * W
            grad_bv = (v0 - vk).mean(axis=0)
            grad_bh = (ph0 - phk).mean(axis=0)
            dW = momentum * dW + lr * grad_W
            dbv = momentum * dbv + lr * grad_bv
            dbh = momentum * dbh + lr * grad_bh
            W = W + dW
            b_v = b_v + dbv
            b_h = b_h + dbh
        log.debug("cd epoch %d done", epoch + 1)

    return RbmModel(W, b_v, b_h)


def sample_visible(rbm, n_samples, n_steps=100, seed=None):
    """Draw approximate samples from ``p(v)`` by block Gibbs sampling."""
    rng = np.random.default_rng(seed)
    v = (rng.random((n_samples, rbm.n_visible)) < 0.5).astype(float)
    for _ in range(n_steps):
        ph = hidden_probs(rbm, v)
        h = (rng.random(ph.shape) < ph).astype(float)
        pv = visible_probs(rbm, h)
        v = (rng.random(pv.shape) < pv).astype(float)
    return v

