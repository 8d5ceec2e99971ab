"""Sparsifying transforms: periodic db4 wavelets and learned dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# 8-tap Daubechies wavelet with 4 vanishing moments (scaling/low-pass filter).
DB4_LOWPASS = np.array([
    -0.010597401785069032,
    0.032883011666885200,
    0.030841381835560764,
    -0.18703481171909308,
    -0.027983769416859854,
    0.63088076792985891,
    0.71484657055291565,
    0.23037781330889650,
])
DB4_HIGHPASS = ((-1.0) ** np.arange(8)) * DB4_LOWPASS[::-1]


@dataclass(frozen=True)
class SparsifyingModel:
    """Synthesis operator ``D`` (``N x J``) with ``x ~= D s``.

    For ``kind == "wavelet"`` the columns of ``D`` are the periodic db4
    basis functions and ``levels`` is the decomposition depth.
    """

    kind: str
    synthesis: np.ndarray = field(repr=False)
    levels: int = 0

    def __post_init__(self):
        if self.kind not in ("wavelet", "dictionary"):
            raise ValueError(f"unknown sparsifier kind {self.kind!r}")
        self.synthesis.setflags(write=False)

    @property
    def n_samples(self):
        return self.synthesis.shape[0]

    @property
    def n_atoms(self):
        return self.synthesis.shape[1]

    @property
    def atom_norms(self):
        return np.linalg.norm(self.synthesis, axis=0)


@dataclass(frozen=True)
class SparseCode:
    values: np.ndarray
    support: np.ndarray
    pattern: np.ndarray

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float)
        support = np.flatnonzero(values)
        pattern = (values != 0).astype(np.int8)
        return cls(values=values, support=support, pattern=pattern)

    @classmethod
    def from_support(cls, n_atoms, support, coefs):
        values = np.zeros(n_atoms)
        support = np.asarray(support, dtype=int)
        values[support] = coefs
        order = np.argsort(support)
        support = support[order]
        pattern = np.zeros(n_atoms, dtype=np.int8)
        pattern[support] = 1
        return cls(values=values, support=support, pattern=pattern)


def _check_length(n, levels):
    if levels < 0:
        raise ValueError("levels must be non-negative")
    if n % (2 ** levels) != 0 or n == 0:
        raise ValueError(f"length {n} is not divisible by 2**{levels}")


def _analysis_step(x):
    n = x.shape[0]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(8)[None, :]) % n
    windows = x[idx]
    return windows @ DB4_LOWPASS, windows @ DB4_HIGHPASS


def _synthesis_step(approx, detail):
    half = approx.shape[0]
    n = 2 * half
    idx = (2 * np.arange(half)[:, None] + np.arange(8)[None, :]) % n
    contrib = np.outer(approx, DB4_LOWPASS) + np.outer(detail, DB4_HIGHPASS)
    out = np.zeros(n)
    np.add.at(out, idx.ravel(), contrib.ravel())
    return out


def dwt_forward(x, levels=4):
    """Orthonormal periodic db4 analysis.

    Output ordering is ``[approx_L | detail_L | ... | detail_1]``.
    """
    x = np.asarray(x, dtype=float)
    _check_length(x.shape[0], levels)
    details = []
    approx = x
    for _ in range(levels):
        approx, detail = _analysis_step(approx)
        details.append(detail)
    return np.concatenate([approx] + details[::-1])


def dwt_inverse(coeffs, levels=4):
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    _check_length(n, levels)
    size = n // 2 ** levels
    approx = coeffs[:size]
    pos = size
    for _ in range(levels):
        detail = coeffs[pos:pos + size]
        approx = _synthesis_step(approx, detail)
        pos += size
        size *= 2
    return approx


def wavelet_model(n, levels=4):
    """Build the ``N x N`` db4 synthesis matrix by inverting unit vectors."""
    _check_length(n, levels)
    eye = np.eye(n)
    synthesis = np.column_stack([dwt_inverse(eye[:, i], levels) for i in range(n)])
    return SparsifyingModel(kind="wavelet", synthesis=synthesis, levels=levels)


def dictionary_model(atoms):
    atoms = np.array(atoms, dtype=float)
    norms = np.linalg.norm(atoms, axis=0)
    if np.any(norms == 0):
        raise ValueError("dictionary contains a zero atom")
    return SparsifyingModel(kind="dictionary", synthesis=atoms / norms)


def top_k_sparsify(coeffs, k):
    """Keep the ``k`` largest-magnitude coefficients; ties go to the lower index.

    Zero entries are never placed in the support, so fewer than ``k``
    indices come back when ``coeffs`` has fewer than ``k`` nonzeros.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if not 1 <= k <= coeffs.shape[0]:
        raise ValueError(f"k must lie in [1, {coeffs.shape[0]}], got {k}")
    order = np.argsort(-np.abs(coeffs), kind="stable")[:k]
    order = order[coeffs[order] != 0]
    values = np.zeros_like(coeffs)
    values[order] = coeffs[order]
    return SparseCode.from_values(values)
