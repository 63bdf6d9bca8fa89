"""Nystrom approximation of a kernel and of its inverse.

m columns of K are sampled uniformly without replacement:

    C = K[:, S]      (N x m)
    Q = K[S, S]      (m x m), Q_k its best rank-k approximation

    K      ~ C Q_k^+ C^T
    K^{-1} ~ C^+^T Q_k C^+

Pseudo-inverses treat eigen/singular values below 1e-10 (relative) as 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from csf.errors import ParameterError
from csf.kernels import Kernel

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-10
MODES = ('final', 'gamma')


@dataclass(frozen=True)
class NystromOptions:
    """m sampled columns, rank_k truncation (None -> m), sampling seed, mode.

    mode 'final' approximates the inverse that defines K_attr directly;
    'gamma' approximates (K + a3 I)^{-1} inside Gamma and inverts exactly.
    """

    m: int
    rank_k: Optional[int] = None
    seed: int = 0
    mode: str = 'final'

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError('Nystrom sample size m must be >= 1')
        if self.rank_k is not None and not 1 <= self.rank_k <= self.m:
            raise ParameterError('rank_k must satisfy 1 <= rank_k <= m')
        if self.mode not in MODES:
            raise ParameterError(f'unknown Nystrom mode {self.mode!r}; choose from {MODES}')

    @classmethod
    def fraction(cls, n: int, frac: float = 0.001, **kw) -> 'NystromOptions':
        """Preset with m = rank_k = max(1, round(frac * N))."""
        m = max(1, int(round(frac * n)))
        return cls(m=m, rank_k=m, **kw)


@dataclass(frozen=True, eq=False)
class NystromSketch:
    sampled_cols: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    rank_k: int


def sketch(k: Kernel, m: int, rank_k: Optional[int] = None, seed: int = 0) -> NystromSketch:
    n = k.n
    if not 1 <= m <= n:
        raise ParameterError(f'need 1 <= m <= N (N={n}), got m={m}')
    rank_k = m if rank_k is None else int(rank_k)
    if not 1 <= rank_k <= m:
        raise ParameterError(f'need 1 <= rank_k <= m, got rank_k={rank_k}')
    rng = np.random.default_rng(seed)
    cols = rng.choice(n, size=m, replace=False)
    c = np.array(k.matrix[:, cols])
    q = c[cols, :]
    return NystromSketch(cols, c, 0.5 * (q + q.T), rank_k)


def _rank_k(q: np.ndarray, rank_k: int):
    w, u = scipy.linalg.eigh(q)
    order = np.argsort(-np.abs(w), kind='stable')[:rank_k]
    return w[order], u[:, order]


def _pinv_eig(w: np.ndarray) -> np.ndarray:
    cutoff = PINV_RTOL * (np.max(np.abs(w)) if w.size else 0.0)
    inv = np.zeros_like(w)
    big = np.abs(w) > cutoff
    inv[big] = 1.0 / w[big]
    return inv


def approx_kernel(s: NystromSketch) -> np.ndarray:
    """C Q_k^+ C^T."""
    w, u = _rank_k(s.Q, s.rank_k)
    cu = s.C @ u
    out = (cu * _pinv_eig(w)[None, :]) @ cu.T
    return 0.5 * (out + out.T)


def approx_inverse(s: NystromSketch) -> np.ndarray:
    """C1^T Q_k C1 with C1 the pseudo-inverse of C."""
    w, u = _rank_k(s.Q, s.rank_k)
    c1 = scipy.linalg.pinv(s.C, rtol=PINV_RTOL)
    c1u = u.T @ c1
    out = (c1u.T * w[None, :]) @ c1u
    return 0.5 * (out + out.T)


def nystrom_attr_kernel(k: Kernel, a2: float, a3: float, opts: NystromOptions) -> Kernel:
    """K_attr through a Nystrom inverse.

    K_attr = (I + (a3/a2)(K + a3 I)^{-1})^{-1} = I - (a3/a2)(K + c I)^{-1}
    with c = a3 (1 + 1/a2), so one inverse of a shifted kernel suffices.
    'final' approximates (K + c I)^{-1}; 'gamma' approximates
    (K + a3 I)^{-1} inside Gamma and keeps the outer inversion exact.
    """
    n = k.n
    eye = np.eye(n)
    if opts.m > n:
        raise ParameterError(f'Nystrom m={opts.m} exceeds N={n}')
    if opts.mode == 'final':
        c = a3 * (1.0 + 1.0 / a2)
        shifted = Kernel(k.matrix + c * eye)
        inv = approx_inverse(sketch(shifted, opts.m, opts.rank_k, opts.seed))
        out = eye - (a3 / a2) * inv
    else:
        shifted = Kernel(k.matrix + a3 * eye)
        inv = approx_inverse(sketch(shifted, opts.m, opts.rank_k, opts.seed))
        gamma = k.matrix @ inv
        khat = eye - 0.5 * (gamma + gamma.T)
        out = np.linalg.inv(eye + khat / a2)
    logger.debug('nystrom K_attr: mode=%s m=%d rank_k=%s', opts.mode, opts.m, opts.rank_k)
    return Kernel(0.5 * (out + out.T))


def frobenius_error(approx: np.ndarray, exact: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(approx) - np.asarray(exact), 'fro'))
