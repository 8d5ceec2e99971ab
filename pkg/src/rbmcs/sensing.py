"""Sensing matrices, noisy measurements and the effective noise covariance.

The measurement model is ``y = Phi x + n``.  Writing ``x = D s + r`` gives
``y = Xi s + eta`` with ``eta = Phi r + n``, whose covariance
``Sigma_eta = Phi diag(sigma_r^2) Phi^T + sigma_n^2 I`` is assembled here.

All randomness goes through :func:`numpy.random.default_rng` (PCG64) seeded
explicitly, so any matrix can be regenerated from ``(m, n, seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

#: Added to every representation-error variance before Sigma_eta is formed.
VARIANCE_FLOOR = 1e-8


class DimensionError(ValueError):
    """Raised for inconsistent or invalid array dimensions."""


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a covariance that must be positive definite is not."""


@dataclass(frozen=True)
class SensingOperator:
    phi: np.ndarray = field(repr=False)
    m_rows: int
    n_cols: int
    seed: int | None

    def __post_init__(self):
        self.phi.setflags(write=False)


@dataclass(frozen=True)
class NoiseModel:
    sigma_n_sq: float
    sigma_r_sq: np.ndarray = field(repr=False)
    sigma_eta: np.ndarray = field(repr=False)
    sigma_eta_factor: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.sigma_r_sq, self.sigma_eta, self.sigma_eta_factor):
            arr.setflags(write=False)

    def whiten(self, a):
        """Return ``L^{-1} a`` where ``L L^T = Sigma_eta``."""
        return linalg.solve_triangular(self.sigma_eta_factor, a, lower=True)


def gen_bernoulli_matrix(m, n, seed):
    """Draw an ``m x n`` matrix with i.i.d. entries ``+-1/sqrt(m)``."""
    m, n = int(m), int(n)
    if m < 1 or m > n:
        raise DimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(m, n), dtype=np.int8)
    phi = (2.0 * signs - 1.0) / np.sqrt(m)
    return SensingOperator(phi=phi, m_rows=m, n_cols=n, seed=seed)


def measure(op, x, sigma_n_sq, seed=None):
    """Simulate ``y = Phi x + n`` with Gaussian ``n`` of variance ``sigma_n_sq``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (op.n_cols,):
        raise DimensionError(f"signal has shape {x.shape}, expected ({op.n_cols},)")
    if sigma_n_sq < 0:
        raise ValueError("sigma_n_sq must be non-negative")
    y = op.phi @ x
    if sigma_n_sq > 0:
        rng = np.random.default_rng(seed)
        y = y + np.sqrt(sigma_n_sq) * rng.standard_normal(op.m_rows)
    return y


def build_noise_model(op, sigma_r_sq, sigma_n_sq, floor=VARIANCE_FLOOR):
    sigma_r_sq = np.array(sigma_r_sq, dtype=float)
    if sigma_r_sq.shape != (op.n_cols,):
        raise DimensionError(
            f"sigma_r_sq has shape {sigma_r_sq.shape}, expected ({op.n_cols},)")
    if np.any(sigma_r_sq < 0) or sigma_n_sq < 0:
        raise ValueError("variances must be non-negative")
    if not np.any(sigma_r_sq > 0) and sigma_n_sq == 0:
        raise ValueError("sigma_r_sq and sigma_n_sq cannot both be zero")

    floored = sigma_r_sq + floor
    phi = op.phi
    sigma_eta = (phi * floored) @ phi.T
    sigma_eta[np.diag_indices_from(sigma_eta)] += sigma_n_sq
    sigma_eta = 0.5 * (sigma_eta + sigma_eta.T)
    try:
        factor = linalg.cholesky(sigma_eta, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"Sigma_eta is not positive definite: {exc}") from exc
    return NoiseModel(sigma_n_sq=float(sigma_n_sq), sigma_r_sq=floored,
                      sigma_eta=sigma_eta, sigma_eta_factor=factor)


def quantization_noise_variance(delta_f, m_bits):
    """Variance of a uniform quantizer with range ``delta_f`` and ``m_bits`` bits."""
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    return float(delta_f) ** 2 / (12.0 * 2.0 ** (2 * int(m_bits)))
