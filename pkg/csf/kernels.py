"""Mercer kernels: the Gaussian KNN kernel, Gamma operator and PSD checks.

Every filter in the package is carried around as a dense `Kernel`. Kernels
built here are PSD-checked; kernels coming from graph topology are only
guaranteed symmetric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from csf.errors import KernelError, NotPSDError, NumericError, ParameterError
from utils.helpers import read_matrix_tsv, write_matrix_tsv

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8
CLIP_TOL = 1e-6
PSD_POLICIES = ('strict', 'project')


@dataclass(frozen=True, eq=False)
class Kernel:
    """Dense symmetric N x N matrix; `psd_checked` once its spectrum was verified."""

    matrix: np.ndarray
    psd_checked: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise KernelError(f'kernel must be square, got shape {m.shape}')
        if not np.all(np.isfinite(m)):
            raise NumericError('kernel has non-finite entries')
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0):
            raise KernelError(f'kernel is not symmetric (max asymmetry {asym:.3g})')
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def identity(cls, n: int) -> 'Kernel':
        return cls(np.eye(n), psd_checked=True)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvectors in the columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues[None, :]) @ u.T

    def apply(self, fn) -> np.ndarray:
        """U diag(fn(lambda)) U^T for a scalar spectral function fn."""
        u = self.eigenvectors
        return (u * np.asarray(fn(self.eigenvalues), dtype=np.float64)[None, :]) @ u.T


def _check_finite(m: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NumericError(f'{what} has non-finite entries')


def eigendecompose(k) -> EigenSystem:
    """Symmetric eigendecomposition (LAPACK syevd through scipy)."""
    m = k.matrix if isinstance(k, Kernel) else np.asarray(k, dtype=np.float64)
    _check_finite(m, 'matrix')
    try:
        w, u = scipy.linalg.eigh(m)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        try:
            cond = float(np.linalg.cond(m))
        except np.linalg.LinAlgError:
            cond = float('nan')
        raise NumericError(f'eigendecomposition failed ({e}); condition number {cond:.3g}, '
                           f'Frobenius norm {np.linalg.norm(m):.3g}') from None
    return EigenSystem(w, u)


def assert_psd(m, tol: float = PSD_TOL) -> Kernel:
    """Return a PSD-checked Kernel or raise NotPSDError."""
    m = np.asarray(m.matrix if isinstance(m, Kernel) else m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise KernelError(f'expected a square matrix, got shape {m.shape}')
    _check_finite(m, 'matrix')
    if m.size and np.max(np.abs(m - m.T)) > max(tol, SYMMETRY_TOL):
        raise KernelError('matrix is not symmetric')
    m = 0.5 * (m + m.T)
    if m.size:
        lo = float(scipy.linalg.eigvalsh(m)[0])
        if lo < -tol:
            raise NotPSDError(lo, tol)
    return Kernel(m, psd_checked=True)


def project_psd(m: np.ndarray, policy: str = 'strict', clip_tol: float = CLIP_TOL) -> Kernel:
    """Clip negative eigenvalues to zero (spectral projection).

    `strict` only repairs round-off (|min eig| <= clip_tol) and raises
    otherwise; `project` clips any negative part and logs how much.
    """
    if policy not in PSD_POLICIES:
        raise ParameterError(f'unknown psd policy {policy!r}; choose from {PSD_POLICIES}')
    m = 0.5 * (np.asarray(m, dtype=np.float64) + np.asarray(m, dtype=np.float64).T)
    es = eigendecompose(m)
    lo = float(es.eigenvalues[0])
    if lo >= 0.0:
        return Kernel(m, psd_checked=True)
    if policy == 'strict' and lo < -clip_tol:
        raise NotPSDError(lo, clip_tol)
    neg = es.eigenvalues[es.eigenvalues < 0]
    if lo < -clip_tol:
        logger.info('projected kernel onto the PSD cone: %d negative eigenvalues, min %.4g, clipped mass %.4g',
                    neg.size, lo, float(-neg.sum()))
    clipped = es.apply(lambda lam: np.maximum(lam, 0.0))
    return Kernel(0.5 * (clipped + clipped.T), psd_checked=True)


def gaussian_similarity(x) -> Tuple[np.ndarray, float]:
    """Full Gaussian similarity exp(-|xi - xj|^2 / h) and its bandwidth.

    h is the square of the mean pairwise distance over all i < j.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError('need at least 2 points')
    _check_finite(x, 'attribute matrix')
    dist = pdist(x)
    h = float(dist.mean()) ** 2
    if h <= 0.0:
        raise KernelError('degenerate bandwidth: all points identical')
    d = squareform(dist)
    return np.exp(-(d * d) / h), h


def knn_sparsify(s: np.ndarray, top_k: Optional[int]) -> np.ndarray:
    """Keep the top_k largest off-diagonal entries per row, symmetrize by max.

    top_k=None keeps every entry (fully connected graph). The diagonal of
    the result is zero.
    """
    n = s.shape[0]
    off = s.copy()
    np.fill_diagonal(off, -np.inf)
    if top_k is None:
        w = s.copy()
    else:
        order = np.argsort(-off, axis=1, kind='stable')[:, :top_k]
        keep = np.zeros_like(s, dtype=bool)
        keep[np.arange(n)[:, None], order] = True
        w = np.where(keep, s, 0.0)
    np.fill_diagonal(w, 0.0)
    return np.maximum(w, w.T)


def renormalize(w: np.ndarray) -> np.ndarray:
    """Self-loop and re-normalization tricks: D^{-1/2} (W + I) D^{-1/2}."""
    w = w.copy()
    np.fill_diagonal(w, 1.0)
    d = w.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    k = inv_sqrt[:, None] * w * inv_sqrt[None, :]
    return 0.5 * (k + k.T)


def gaussian_knn_kernel(x, top_k: Optional[int] = 20, psd_policy: str = 'project') -> Kernel:
    """Gaussian kernel over node attributes, sparsified to a KNN graph.

    Pipeline: full Gaussian similarity, per-row top_k selection, max
    symmetrization, unit diagonal, symmetric renormalization, then the
    PSD projection chosen by `psd_policy`.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0] if x.ndim == 2 else 0
    if top_k is not None and not (1 <= int(top_k) < n):
        raise ParameterError(f'top_k must satisfy 1 <= top_k < N (N={n}), got {top_k}')
    s, h = gaussian_similarity(x)
    w = knn_sparsify(s, None if top_k is None else int(top_k))
    k = renormalize(w)
    logger.debug('gaussian knn kernel: N=%d top_k=%s bandwidth=%.6g', n, top_k, h)
    return project_psd(k, policy=psd_policy)


def gamma_operator(k: Kernel, a3: float) -> np.ndarray:
    """Gamma(K, a3) = K (K + a3 I)^{-1}, the KRR hat matrix."""
    if not a3 > 0:
        raise ParameterError(f'a3 must be > 0, got {a3}')
    m = k.matrix if isinstance(k, Kernel) else np.asarray(k, dtype=np.float64)
    _check_finite(m, 'kernel')
    shifted = m + a3 * np.eye(m.shape[0])
    try:
        # K and (K + a3 I)^{-1} commute, so solving from the left is the same product.
        g = scipy.linalg.solve(shifted, m, assume_a='sym')
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericError(f'K + a3 I is singular ({e})') from None
    _check_finite(g, 'Gamma(K, a3)')
    return 0.5 * (g + g.T)


def save_kernel(path, k: Kernel) -> Path:
    return write_matrix_tsv(Path(path), k.matrix)


def load_kernel(path, check_psd: bool = False) -> Kernel:
    m = read_matrix_tsv(Path(path))
    return assert_psd(m) if check_psd else Kernel(m)
