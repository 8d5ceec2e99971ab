"""MAP support search with an RBM prior, posterior-mean coefficients, OMP baseline.

With ``Xi = Phi D``, ``y = Xi s + eta`` and ``s_theta | theta ~ N(0, Sigma_theta)``,
the support score maximised by :func:`rbm_omp_like` is

    1/2 b^T P^{-1} b - 1/2 log det(P Sigma_theta) + sum_j softplus(W_j . S + b_h_j) + b_v . S

where ``b = Xi_theta^T Sigma_eta^{-1} y`` and
``P = Xi_theta^T Sigma_eta^{-1} Xi_theta + Sigma_theta^{-1}``.  Terms that do
not depend on ``theta`` are dropped.  Everything is computed in the whitened
domain ``L^{-1} Xi``, ``L^{-1} y`` where ``L L^T = Sigma_eta``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .dictlearn import omp_code
from .rbm import RbmModel, softplus
from .sensing import FactorizationError, NoiseModel, SensingOperator
from .transforms import SparseCode, SparsifyingModel

log = logging.getLogger(__name__)

_PIVOT_TOL = 1e-12


class CandidateRejected(FactorizationError):
    """The posterior precision for a candidate support is not positive definite."""


class RecoveryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RecoveryModel:
    sensing: SensingOperator
    sparsifier: SparsifyingModel
    noise: NoiseModel
    rbm: RbmModel
    coeff_variances: np.ndarray = field(repr=False)
    sparsity_k: int
    xi: np.ndarray = field(repr=False)
    whitened_xi: np.ndarray = field(repr=False)
    eligible: np.ndarray = field(repr=False)

    @property
    def n_atoms(self):
        return self.xi.shape[1]


class RecoveryResult(NamedTuple):
    support: np.ndarray  # selection order
    code: SparseCode
    x_hat: np.ndarray
    status: str


def build_recovery_model(sensing, sparsifier, noise, rbm, coeff_variances, sparsity_k,
                         never_active=()):
    """Precompute ``Xi`` and its whitened form for repeated recoveries."""
    coeff_variances = np.array(coeff_variances, dtype=float)
    n_atoms = sparsifier.n_atoms
    if sensing.n_cols != sparsifier.n_samples:
        raise ValueError("sensing matrix and sparsifier disagree on N")
    if coeff_variances.shape != (n_atoms,):
        raise ValueError("need one coefficient variance per atom")
    if rbm.n_visible != n_atoms:
        raise ValueError(f"RBM has {rbm.n_visible} visible units, sparsifier has {n_atoms} atoms")
    if sparsity_k < 1:
        raise ValueError("sparsity_k must be >= 1")
    xi = sensing.phi @ sparsifier.synthesis
    eligible = coeff_variances > 0
    eligible[list(never_active)] = False
    for arr in (coeff_variances, eligible):
        arr.setflags(write=False)
    whitened = noise.whiten(xi)
    whitened.setflags(write=False)
    xi.setflags(write=False)
    return RecoveryModel(sensing=sensing, sparsifier=sparsifier, noise=noise, rbm=rbm,
                         coeff_variances=coeff_variances, sparsity_k=int(sparsity_k),
                         xi=xi, whitened_xi=whitened, eligible=eligible)


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=int).ravel()
    if theta.size == 0:
        raise ValueError("support must be non-empty")
    if theta.min() < 0 or theta.max() >= model.n_atoms:
        raise IndexError("support index out of range")
    if np.unique(theta).size != theta.size:
        raise ValueError("support has repeated indices")
    if not np.all(model.eligible[theta]):
        raise ValueError("support contains atoms without a coefficient variance")
    return theta


def _pattern(n_atoms, theta):
    s = np.zeros(n_atoms)
    s[theta] = 1.0
    return s


def support_log_likelihood(model, y, theta):
    """Measurement part of the support score (``log p(y|theta) - log C``)."""
    theta = _check_theta(model, theta)
    yw = model.noise.whiten(np.asarray(y, dtype=float))
    X = model.whitened_xi[:, theta]
    var = model.coeff_variances[theta]
    precision = X.T @ X + np.diag(1.0 / var)
    try:
        chol = linalg.cholesky(precision, lower=True)
    except np.linalg.LinAlgError as exc:
        raise CandidateRejected(f"posterior precision not PD for support {theta.tolist()}") from exc
    z = linalg.solve_triangular(chol, X.T @ yw, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol))) + np.sum(np.log(var))
    return 0.5 * (z @ z) - 0.5 * logdet


def support_log_prior(model, theta):
    """RBM term ``-E(S^theta)``; equals ``log p(theta) + log Z``."""
    s = _pattern(model.n_atoms, np.asarray(theta, dtype=int))
    rbm = model.rbm
    return float(softplus(s @ rbm.weights + rbm.hidden_bias).sum() + rbm.visible_bias @ s)


def support_log_posterior(model, y, theta):
    return support_log_likelihood(model, y, theta) + support_log_prior(model, theta)


def _greedy_naive(model, y, k, use_prior):
    theta = []
    status = "ok"
    for _ in range(k):
        best, best_score = -1, -np.inf
        for c in np.flatnonzero(model.eligible):
            if c in theta:
                continue
            cand = theta + [int(c)]
            try:
                score = support_log_likelihood(model, y, cand)
            except CandidateRejected:
                continue
            if use_prior:
                score += support_log_prior(model, cand)
            if score > best_score:
                best, best_score = int(c), score
        if best < 0:
            status = "no-candidate"
            break
        theta.append(best)
    return theta, status


def _greedy_fast(model, y, k, use_prior):
    """Same selections as the naive search, using one Cholesky row append per pick.

    For every candidate ``c`` we keep ``w_c = L_P^{-1} X_theta^T X_c`` so the
    new pivot ``delta_c^2 = ||X_c||^2 + 1/sigma_c^2 - ||w_c||^2`` and the
    quadratic-form increment are available in O(t) per candidate.
    """
    X = model.whitened_xi
    var = model.coeff_variances
    n_atoms = model.n_atoms
    yw = model.noise.whiten(np.asarray(y, dtype=float))
    b_all = X.T @ yw
    col_sq = np.einsum("ij,ij->j", X, X)
    with np.errstate(divide="ignore"):
        diag_all = col_sq + np.where(model.eligible, 1.0 / np.where(var > 0, var, 1.0), np.inf)
        log_var = np.where(model.eligible, np.log(np.where(var > 0, var, 1.0)), 0.0)

    rbm = model.rbm
    hidden_pre = rbm.hidden_bias.copy()
    base_prior = 0.0
    w_rows = np.zeros((0, n_atoms))
    z = np.zeros(0)
    quad = 0.0
    logdet = 0.0
    available = model.eligible.copy()
    theta = []
    status = "ok"

    for _ in range(k):
        proj = w_rows.T @ z if z.size else np.zeros(n_atoms)
        delta_sq = diag_all - np.einsum("ij,ij->j", w_rows, w_rows)
        ok = available & (delta_sq > _PIVOT_TOL * diag_all) & np.isfinite(delta_sq)
        if not ok.any():
            status = "no-candidate"
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (b_all - proj) / np.sqrt(delta_sq)
            score = 0.5 * (quad + step ** 2) - 0.5 * (logdet + np.log(delta_sq) + log_var)
        if use_prior:
            score = score + base_prior + rbm.visible_bias + softplus(
                hidden_pre[None, :] + rbm.weights).sum(axis=1)
        score = np.where(ok, score, -np.inf)
        c = int(np.argmax(score))
        if not np.isfinite(score[c]):
            status = "no-candidate"
            break

        delta = np.sqrt(delta_sq[c])
        new_row = (X[:, c] @ X - w_rows[:, c] @ w_rows) / delta
        w_rows = np.vstack([w_rows, new_row])
        z = np.append(z, step[c])
        quad += step[c] ** 2
        logdet += np.log(delta_sq[c]) + log_var[c]
        hidden_pre += rbm.weights[c]
        base_prior += rbm.visible_bias[c]
        available[c] = False
        theta.append(c)
    return theta, status


def rbm_omp_like(model, y, k=None, use_prior=True, fast=True):
    """Greedy MAP support search followed by posterior-mean coefficients.

    Starts from the empty support and adds, ``k`` times, the eligible atom
    whose inclusion maximises the support score (lowest index on ties).
    ``use_prior=False`` drops the RBM term, leaving likelihood-only greedy
    selection.  ``fast=False`` rescores every candidate from scratch.
    """
    k = model.sparsity_k if k is None else int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    y = np.asarray(y, dtype=float)
    if y.shape != (model.sensing.m_rows,):
        raise ValueError(f"measurement has shape {y.shape}, expected ({model.sensing.m_rows},)")
    search = _greedy_fast if fast else _greedy_naive
    theta, status = search(model, y, k, use_prior)
    if status != "ok":
        warnings.warn(f"support search stopped after {len(theta)} of {k} atoms",
                      RecoveryWarning, stacklevel=2)
    if theta:
        coefs = map_coefficients(model, y, theta)
    else:
        coefs = np.zeros(0)
    code = SparseCode.from_support(model.n_atoms, theta, coefs)
    x_hat = reconstruct_signal(model.sparsifier, code)
    return RecoveryResult(np.array(theta, dtype=int), code, x_hat, status)


def map_coefficients(model, y, theta, method="precision"):
    """Posterior mean of ``s_theta`` given ``y`` and the support.

    ``method="precision"`` solves ``P s = Xi_t^T Sigma_eta^{-1} y`` in the
    whitened domain.  ``method="covariance"`` solves the ``M x M`` system
    ``(Xi_t Sigma_t Xi_t^T + Sigma_eta) z = y`` then returns ``Sigma_t Xi_t^T z``;
    it is the same estimate but loses accuracy once ``Sigma_t`` dwarfs
    ``Sigma_eta`` (the system matrix becomes nearly rank-deficient).
    """
    theta = _check_theta(model, theta)
    y = np.asarray(y, dtype=float)
    var = model.coeff_variances[theta]
    try:
        if method == "covariance":
            xt = model.xi[:, theta]
            cov = (xt * var) @ xt.T + model.noise.sigma_eta
            z = linalg.cho_solve(linalg.cho_factor(cov, lower=True), y)
            return var * (xt.T @ z)
        if method == "precision":
            X = model.whitened_xi[:, theta]
            precision = X.T @ X + np.diag(1.0 / var)
            rhs = X.T @ model.noise.whiten(y)
            return linalg.cho_solve(linalg.cho_factor(precision, lower=True), rhs)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"MAP solve failed: {exc}") from exc
    raise ValueError(f"unknown method {method!r}")


def omp_recover(model, y, k=None):
    """Plain OMP on ``(Xi, y)`` as a prior-free baseline."""
    k = model.sparsity_k if k is None else int(k)
    code = omp_code(model.xi, np.asarray(y, dtype=float), k)
    x_hat = reconstruct_signal(model.sparsifier, code)
    return RecoveryResult(code.support, code, x_hat, "ok")


def reconstruct_signal(sparsifier, code):
    values = code.values if isinstance(code, SparseCode) else np.asarray(code, dtype=float)
    return sparsifier.synthesis @ values
