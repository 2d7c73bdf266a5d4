"""Sliced-inverse-regression machinery for estimating the partial central
subspace and its structural dimension.

The candidate matrix is built by averaging slice-mean covariance matrices
over every binary discretization of the response (no plain covariates) or
of the plain covariates W, with response slicing nested inside the W-cells.
The number of directions is chosen by a ridge-regularized ratio of squared
eigenvalues, which avoids hand-tuned thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, standardize
from .errors import DataError

#: Target occupancy per response slice inside a W-cell.
SLICE_OCCUPANCY = 5
#: Upper bound on response slices inside a W-cell.
MAX_SLICES = 5
#: Cells smaller than this contribute nothing (weights renormalize).
MIN_CELL = 4


@dataclass(frozen=True)
class CandidateMatrix:
    """Symmetric PSD candidate matrix with its sorted eigendecomposition.

    Eigenvalues are sorted descending and clamped to be nonnegative;
    eigenvector columns are aligned with them and sign-fixed so that each
    column's largest-magnitude entry is positive.  All quantities live in
    the whitened covariate scale.
    """

    m: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class BasisEstimate:
    """Estimated direction matrix in original covariate scale.

    Attributes:
        q_hat: estimated structural dimension, in ``[1, p1]``.
        b: ``(p1, q_hat)`` matrix; unit-norm, sign-fixed columns.
        b_first: first column of ``b`` (the one used by the resampling
            process downstream).
        eigenvalues: spectrum of the candidate matrix, descending.
        ridge: ridge constant used for the dimension decision.
    """

    q_hat: int
    b: np.ndarray
    b_first: np.ndarray
    eigenvalues: np.ndarray
    ridge: float


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        lead = int(np.argmax(np.abs(out[:, j])))
        if out[lead, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _decompose(m: np.ndarray) -> CandidateMatrix:
    m = np.asarray(m, dtype=float)
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > 1e-10:
        raise ValueError(f"candidate matrix asymmetric by {asym:.3e}")
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < -1e-10:
        raise ValueError(f"candidate matrix has eigenvalue {vals[0]:.3e} < -1e-10")
    vals = np.clip(vals[::-1], 0.0, None)
    vecs = _fix_signs(vecs[:, ::-1])
    return CandidateMatrix(m=m, eigenvalues=vals, eigenvectors=vecs)


def sir_candidate(z: np.ndarray, slice_label: np.ndarray) -> np.ndarray:
    """Slice-mean covariance `sum_h p_h zbar_h zbar_h'` for centered ``z``.

    ``slice_label`` must be integers ``0..H-1`` with every value occupied.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    labels = np.asarray(slice_label, dtype=int).reshape(-1)
    n = z.shape[0]
    if n == 0:
        raise DataError("empty input")
    if labels.shape[0] != n:
        raise DataError(f"{labels.shape[0]} labels for {n} rows")
    if labels.min() < 0:
        raise DataError("negative slice label")
    counts = np.bincount(labels)
    if np.any(counts == 0):
        empty = int(np.argmax(counts == 0))
        raise DataError(f"slice {empty} has no members; compact the labels first")
    sums = np.zeros((counts.size, z.shape[1]))
    np.add.at(sums, labels, z)
    means = sums / counts[:, None]
    weighted = means * (counts / n)[:, None]
    return weighted.T @ means


def dee_matrix(z: np.ndarray, y: np.ndarray) -> CandidateMatrix:
    """Average the binary-slicing candidate over all response thresholds.

    For each threshold ``t = y_i`` the sample splits into ``{y <= t}`` and
    ``{y > t}``; thresholds leaving one side empty contribute zero.  For
    centered ``z`` the per-threshold candidate collapses to a rank-one
    term, so the average is a single cumulative-sum product.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n = z.shape[0]
    if n < 3:
        raise DataError(f"need at least 3 rows, got {n}")
    if np.all(y == y[0]):
        raise DataError("response has no variation")
    # the rank-one collapse below needs column sums of exactly zero
    if np.max(np.abs(z.mean(axis=0))) > 1e-6:
        raise DataError("z must be column-centered (whiten the covariates first)")

    order = np.argsort(y, kind="stable")
    ys = y[order]
    sums = np.cumsum(z[order], axis=0)
    # last index of each tied run: counts k_i = #{y_j <= y_i} are well defined
    run_end = np.r_[ys[1:] != ys[:-1], True]
    k = np.flatnonzero(run_end) + 1
    mult = np.diff(np.r_[0, k])
    usable = k < n  # k == n leaves the upper class empty
    k, mult = k[usable], mult[usable]
    s = sums[k - 1]
    weights = mult / (n * k * (n - k))
    return _decompose((s * weights[:, None]).T @ s)


def _cell_slice_matrix(z_cell: np.ndarray) -> np.ndarray | None:
    """Within-cell slice-mean covariance, rows already ordered by response.

    Returns None when the cell is too small to slice.
    """
    s = z_cell.shape[0]
    if s < MIN_CELL:
        return None
    if s >= 2 * SLICE_OCCUPANCY:
        h = min(MAX_SLICES, s // SLICE_OCCUPANCY)
    else:
        h = 2
    bounds = (np.arange(h) * s) // h
    counts = np.diff(np.r_[bounds, s])
    means = np.add.reduceat(z_cell, bounds, axis=0) / counts[:, None]
    centered = means - z_cell.mean(axis=0)
    return (centered * (counts / s)[:, None]).T @ centered


def pdee_matrix(z: np.ndarray, y: np.ndarray, w: np.ndarray) -> CandidateMatrix:
    """Average partial-slicing candidates over all thresholds of W.

    Each observed ``w_i`` defines a binary discretization of the W columns;
    rows fall into up to ``2^p2`` cells.  Within every sufficiently large
    cell the response is sliced into equal-frequency groups and the
    cell-centered slice-mean covariance is formed; cells combine weighted
    by size, renormalized over the usable ones.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1)
    n, p1 = z.shape
    p2 = w.shape[1]
    if p2 < 1:
        raise DataError("pdee_matrix needs at least one W column")

    yorder = np.argsort(y, kind="stable")
    z_y = z[yorder]
    w_y = w[yorder]
    thresholds, t_counts = np.unique(w, axis=0, return_counts=True)
    powers = 1 << np.arange(p2)

    total = np.zeros((p1, p1))
    any_usable = False
    for t, t_count in zip(thresholds, t_counts):
        cell_ids = (w_y <= t) @ powers
        by_cell = np.argsort(cell_ids, kind="stable")  # y-order kept within cell
        sorted_ids = cell_ids[by_cell]
        starts = np.r_[0, np.flatnonzero(sorted_ids[1:] != sorted_ids[:-1]) + 1]
        sizes = np.diff(np.r_[starts, n])

        m_t = np.zeros((p1, p1))
        used = 0
        for start, size in zip(starts, sizes):
            m_cell = _cell_slice_matrix(z_y[by_cell[start : start + size]])
            if m_cell is None:
                continue
            m_t += size * m_cell
            used += size
        if used > 0:
            any_usable = True
            total += (t_count / used) * m_t
    if not any_usable:
        raise DataError("W discretization produced no usable cells")
    return _decompose(total / n)


def ridge_eigenvalue_ratio(eigenvalues: np.ndarray, c_n: float) -> int:
    """Estimated rank: the minimizer of ridge-regularized ratios of
    consecutive squared eigenvalues, ties toward the smaller index.
    """
    lam = np.asarray(eigenvalues, dtype=float).reshape(-1)
    if lam.size == 0:
        raise ValueError("empty spectrum")
    if c_n <= 0:
        raise ValueError(f"ridge must be positive, got {c_n}")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be nonnegative")
    if np.any(np.diff(lam) > 1e-12):
        raise ValueError("eigenvalues must be sorted descending")
    if lam.size == 1:
        return 1
    sq = lam**2
    ratios = (sq[1:] + c_n) / (sq[:-1] + c_n)
    return int(np.argmin(ratios)) + 1


def default_ridge(n: int) -> float:
    """Ridge constant used when none is supplied."""
    return math.log(n) / n


def estimate_basis(ds: Dataset, c_n: float | None = None) -> BasisEstimate:
    """Whiten X, build the candidate matrix (response-sliced when W is
    absent, W-partialled otherwise), pick the dimension, and back-transform
    the leading eigenvectors to original scale.
    """
    z, std = standardize(ds.x)
    if ds.p2 == 0:
        cand = dee_matrix(z, ds.y)
    else:
        cand = pdee_matrix(z, ds.y, ds.w)
    ridge = default_ridge(ds.n) if c_n is None else float(c_n)
    q_hat = ridge_eigenvalue_ratio(cand.eigenvalues, ridge)
    b = std.whitener @ cand.eigenvectors[:, :q_hat]
    b = _fix_signs(b / np.linalg.norm(b, axis=0))
    return BasisEstimate(
        q_hat=q_hat,
        b=b,
        b_first=b[:, 0].copy(),
        eigenvalues=cand.eigenvalues,
        ridge=ridge,
    )
