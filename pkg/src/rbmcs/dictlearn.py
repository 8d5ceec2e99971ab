"""K-SVD dictionary learning and the training statistics behind the prior."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .transforms import SparseCode, SparsifyingModel, dictionary_model, dwt_forward, top_k_sparsify

log = logging.getLogger(__name__)

# Squared Schur complement below this makes the enlarged Gram singular.
_SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class TrainingSet:
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ValueError("training samples must be an N x B matrix")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("training samples contain non-finite values")

    @property
    def count(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class TrainingStatistics:
    codes: np.ndarray = field(repr=False)
    patterns: np.ndarray = field(repr=False)
    coeff_variances: np.ndarray
    repr_error_variances: np.ndarray
    never_active: frozenset


class KsvdResult(NamedTuple):
    model: SparsifyingModel
    codes: np.ndarray
    objective: np.ndarray


def _atoms(D):
    return D.synthesis if isinstance(D, SparsifyingModel) else np.asarray(D, dtype=float)


def omp_code(D, g, k):
    """Orthogonal matching pursuit with a least-squares refit after every pick.

    Atoms are ranked by normalized correlation ``|d^T r| / ||d||``, which is
    plain correlation for a unit-norm dictionary.  Stops early once the
    residual vanishes, so the support may be shorter than ``k``.  A candidate whose addition would make the selected Gram
    matrix singular is skipped in favour of the next best correlation.
    """
    atoms = _atoms(D)
    g = np.asarray(g, dtype=float)
    n_atoms = atoms.shape[1]
    if k < 1:
        raise ValueError("k must be >= 1")
    gnorm = np.linalg.norm(g)
    support = []
    chol = np.zeros((0, 0))
    coefs = np.zeros(0)
    residual = g.copy()
    norms = np.linalg.norm(atoms, axis=0)
    blocked = norms == 0
    scale = np.where(blocked, 1.0, norms)

    while len(support) < min(k, n_atoms):
        corr = np.abs(atoms.T @ residual) / scale
        corr[blocked] = -1.0
        corr[support] = -1.0
        if gnorm == 0 or corr.max() <= 1e-12 * gnorm:
            break
        picked = False
        for i in np.argsort(-corr, kind="stable"):
            if corr[i] < 0:
                break
            d = atoms[:, i]
            if support:
                b = atoms[:, support].T @ d
                w = linalg.solve_triangular(chol, b, lower=True)
                delta_sq = d @ d - w @ w
            else:
                w = np.zeros(0)
                delta_sq = d @ d
            if delta_sq <= _SINGULAR_TOL * (d @ d):
                blocked[i] = True
                continue
            new = np.zeros((len(support) + 1, len(support) + 1))
            new[:-1, :-1] = chol
            new[-1, :-1] = w
            new[-1, -1] = np.sqrt(delta_sq)
            chol = new
            support.append(int(i))
            picked = True
            break
        if not picked:
            break
        sub = atoms[:, support]
        coefs = linalg.cho_solve((chol, True), sub.T @ g)
        residual = g - sub @ coefs

    values = np.zeros(n_atoms)
    values[support] = coefs
    return SparseCode.from_values(values)


def omp_codes(D, G, k):
    """Column-wise :func:`omp_code` on an ``N x B`` matrix, vectorized over columns.

    Columns that hit an early stop or a singular candidate are recomputed
    with the scalar routine, so every column equals ``omp_code(D, G[:, b], k)``.
    """
    atoms = _atoms(D)
    G = np.asarray(G, dtype=float)
    n_atoms = atoms.shape[1]
    n_cols = G.shape[1]
    k = min(k, n_atoms)
    gram = atoms.T @ atoms
    dtg = atoms.T @ G
    gnorm = np.linalg.norm(G, axis=0)
    support = np.zeros((n_cols, k), dtype=int)
    coefs = np.zeros((n_cols, 0))
    residual = G.copy()
    irregular = gnorm == 0
    cols = np.arange(n_cols)
    norms = np.linalg.norm(atoms, axis=0)
    scale = np.where(norms == 0, np.inf, norms)

    for t in range(k):
        corr = np.abs(atoms.T @ residual) / scale[:, None]
        if t:
            corr[support[:, :t].T, cols[None, :]] = -1.0
        best = np.argmax(corr, axis=0)
        top = corr[best, cols]
        irregular |= top <= 1e-12 * gnorm
        support[:, t] = best
        sel = support[:, :t + 1]
        sub_gram = gram[sel[:, :, None], sel[:, None, :]]
        if t:
            prev = gram[sel[:, :t, None], sel[:, None, :t]]
            b = gram[sel[:, :t], best[:, None]]
            diag = gram[best, best]
            w = np.linalg.solve(prev[~irregular], b[~irregular][..., None])[..., 0]
            delta_sq = diag.copy()
            delta_sq[~irregular] -= np.einsum("ij,ij->i", b[~irregular], w)
            irregular |= delta_sq <= _SINGULAR_TOL * diag
        ok = ~irregular
        rhs = dtg[sel, cols[:, None]]
        coefs = np.zeros((n_cols, t + 1))
        if ok.any():
            coefs[ok] = np.linalg.solve(sub_gram[ok], rhs[ok][..., None])[..., 0]
        residual = G - np.einsum("nbt,bt->nb", atoms[:, sel], coefs)

    A = np.zeros((n_atoms, n_cols))
    regular = np.flatnonzero(~irregular)
    for t in range(k):
        A[support[regular, t], regular] = coefs[regular, t]
    for b in np.flatnonzero(irregular):
        A[:, b] = omp_code(atoms, G[:, b], k).values
    return A


def _objective(G, atoms, A):
    return float(np.linalg.norm(G - atoms @ A))


def _replace_atoms(G, atoms, A, residual, coherence):
    """Swap unused and near-duplicate atoms for poorly represented samples."""
    used = np.any(A != 0, axis=1)
    worst = iter(np.argsort(-np.linalg.norm(residual, axis=0), kind="stable"))
    gnorm = np.linalg.norm(G, axis=0)

    def fresh_atom():
        for b in worst:
            if gnorm[b] > 0:
                return G[:, b] / gnorm[b]
        return None

    for j in np.flatnonzero(~used):
        new = fresh_atom()
        if new is None:
            break
        atoms[:, j] = new

    # Near-duplicates: fold the later atom's codes into its twin, then
    # recycle it, but only when the objective does not grow.
    current = _objective(G, atoms, A)
    gram = atoms.T @ atoms
    np.fill_diagonal(gram, 0.0)
    for i, j in zip(*np.nonzero(np.triu(np.abs(gram) > coherence))):
        if not np.any(A[j]):
            continue
        trial_atoms = atoms.copy()
        trial_codes = A.copy()
        trial_codes[i] += (atoms[:, i] @ atoms[:, j]) * A[j]
        trial_codes[j] = 0.0
        new = fresh_atom()
        if new is None:
            break
        trial_atoms[:, j] = new
        trial = _objective(G, trial_atoms, trial_codes)
        if trial <= current:
            atoms[:] = trial_atoms
            A[:] = trial_codes
            current = trial
    return atoms, A


def ksvd_train(G, j_atoms, k, iters=30, seed=None, init=None, coherence=0.99):
    """Learn a unit-norm ``N x J`` dictionary with K-SVD.

    Returns ``(model, codes, objective)`` where ``objective[0]`` is the
    Frobenius error of the initial coding and ``objective[t]`` the error
    after iteration ``t``.  A column keeps its previous code whenever the
    fresh OMP code fits worse, which keeps the sequence non-increasing.
    """
    if isinstance(G, TrainingSet):
        G = G.samples
    G = np.asarray(G, dtype=float)
    n, b = G.shape
    if j_atoms <= n:
        raise ValueError(f"dictionary must be overcomplete: j_atoms={j_atoms} <= N={n}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not np.any(G):
        raise ValueError("degenerate training set: all samples are zero")

    rng = np.random.default_rng(seed)
    if init is not None:
        atoms = np.array(_atoms(init), dtype=float)
        if atoms.shape != (n, j_atoms):
            raise ValueError(f"init has shape {atoms.shape}, expected {(n, j_atoms)}")
    else:
        nonzero = np.flatnonzero(np.linalg.norm(G, axis=0) > 0)
        if nonzero.size >= j_atoms:
            pick = rng.choice(nonzero, size=j_atoms, replace=False)
            atoms = G[:, pick].copy()
        else:
            atoms = rng.standard_normal((n, j_atoms))
            atoms[:, :nonzero.size] = G[:, nonzero]
    norms = np.linalg.norm(atoms, axis=0)
    dead = norms == 0
    if dead.any():
        atoms[:, dead] = rng.standard_normal((n, int(dead.sum())))
        norms = np.linalg.norm(atoms, axis=0)
    atoms /= norms

    A = omp_codes(atoms, G, k)
    objective = [_objective(G, atoms, A)]

    for it in range(iters):
        if it:
            fresh = omp_codes(atoms, G, k)
            old_err = np.linalg.norm(G - atoms @ A, axis=0)
            new_err = np.linalg.norm(G - atoms @ fresh, axis=0)
            better = new_err <= old_err
            A[:, better] = fresh[:, better]

        residual = G - atoms @ A
        for j in range(j_atoms):
            users = np.flatnonzero(A[j])
            if users.size == 0:
                continue
            err_j = residual[:, users] + np.outer(atoms[:, j], A[j, users])
            u, s, vt = np.linalg.svd(err_j, full_matrices=False)
            atoms[:, j] = u[:, 0]
            A[j, users] = s[0] * vt[0]
            residual[:, users] = err_j - np.outer(atoms[:, j], A[j, users])

        atoms, A = _replace_atoms(G, atoms, A, residual, coherence)
        objective.append(_objective(G, atoms, A))
        log.debug("ksvd iteration %d: objective %.6g", it + 1, objective[-1])

    # exact normalization for the returned model (SVD vectors are unit up to rounding)
    atoms /= np.linalg.norm(atoms, axis=0)
    return KsvdResult(dictionary_model(atoms), A, np.array(objective))


def extract_support_patterns(codes):
    return (np.asarray(codes) != 0).astype(np.int8)


def estimate_coeff_variances(codes):
    """Mean squared coefficient over the samples where each atom is active.

    Atoms that never activate get variance 0 and are reported separately.
    """
    codes = np.asarray(codes, dtype=float)
    counts = np.count_nonzero(codes, axis=1)
    sums = np.sum(codes ** 2, axis=1)
    variances = np.zeros(codes.shape[0])
    active = counts > 0
    variances[active] = sums[active] / counts[active]
    return variances, frozenset(np.flatnonzero(~active).tolist())


def estimate_repr_error_variances(G, D, codes):
    if isinstance(G, TrainingSet):
        G = G.samples
    err = np.asarray(G, dtype=float) - _atoms(D) @ np.asarray(codes, dtype=float)
    return np.mean(err ** 2, axis=1)


def top_k_codes(G, levels, k):
    """Best-``k`` wavelet codes for each training column (orthonormal case)."""
    if isinstance(G, TrainingSet):
        G = G.samples
    return np.column_stack([top_k_sparsify(dwt_forward(g, levels), k).values for g in G.T])


def training_statistics(G, D, codes):
    variances, never = estimate_coeff_variances(codes)
    return TrainingStatistics(
        codes=np.asarray(codes, dtype=float),
        patterns=extract_support_patterns(codes),
        coeff_variances=variances,
        repr_error_variances=estimate_repr_error_variances(G, D, codes),
        never_active=never,
    )
