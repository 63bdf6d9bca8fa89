"""Spectral filters: the attribute high-pass kernel, topology low-pass kernel
and the closed-form filter functions of classic graph models.

A `FilterSpec` is a scalar function g(lambda) with named parameters and a
declared eigenvalue domain. Topology filters live on [0, 2] (normalized
Laplacian spectrum), attribute filters on [0, inf) (kernel spectrum).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from csf.errors import DomainError, KernelError, NumericError, ParameterError
from csf.graph import Graph, degree_info, normalized_laplacian
from csf.kernels import EigenSystem, Kernel, assert_psd, eigendecompose, gamma_operator

if TYPE_CHECKING:
    from csf.nystrom import NystromOptions

logger = logging.getLogger(__name__)

TOPOLOGY_DOMAIN = (0.0, 2.0)
ATTRIBUTE_DOMAIN = (0.0, np.inf)
DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class FilterSpec:
    name: str
    params: Mapping[str, float]
    g: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    kind: str = 'lowpass'
    domain: Tuple[float, float] = TOPOLOGY_DOMAIN

    def __call__(self, lam):
        return filter_value(self, lam)


def gcn_filter(avg_degree: float) -> FilterSpec:
    """GCN's first-order filter 1 - (p/(p+1)) lambda."""
    if not avg_degree > 0:
        raise ParameterError('average degree must be > 0')
    p = float(avg_degree)
    return FilterSpec('gcn', {'p_bar': p}, lambda lam: 1.0 - (p / (p + 1.0)) * lam, 'lowpass')


def gcn_regularizer(avg_degree: float) -> FilterSpec:
    """r(lambda) = (p+1)/(p(1-lambda)+1); GCN's filter is 1/r. Pole -> inf."""
    if not avg_degree > 0:
        raise ParameterError('average degree must be > 0')
    p = float(avg_degree)

    def r(lam):
        den = p * (1.0 - lam) + 1.0
        with np.errstate(divide='ignore'):
            return np.where(den == 0.0, np.inf, (p + 1.0) / np.where(den == 0.0, 1.0, den))

    return FilterSpec('gcn_regularizer', {'p_bar': p}, r, 'regularizer')


def sgc_filter(c: int) -> FilterSpec:
    """SGC's (1 - lambda)^c. Not monotone on [0, 2] for even c."""
    if int(c) != c or c < 0:
        raise ParameterError('SGC power c must be a nonnegative integer')
    c = int(c)
    return FilterSpec('sgc', {'c': float(c)}, lambda lam: (1.0 - lam) ** c, 'polynomial')


def lp_filter(a1: float) -> FilterSpec:
    """Label propagation's 1 / (1 + a1 lambda), a1 = gamma / (1 - gamma)."""
    if not a1 >= 0:
        raise ParameterError('a1 must be >= 0')
    a1 = float(a1)
    return FilterSpec('lp', {'a1': a1}, lambda lam: 1.0 / (1.0 + a1 * lam), 'lowpass')


def krr_filter(a: float) -> FilterSpec:
    """Kernel ridge regression shrinkage lambda / (lambda + a)."""
    if not a > 0:
        raise ParameterError('ridge penalty must be > 0')
    a = float(a)
    return FilterSpec('krr', {'a': a}, lambda lam: lam / (lam + a), 'highpass', ATTRIBUTE_DOMAIN)


def attr_filter(a2: float, a3: float) -> FilterSpec:
    """The attribute filter a2(l + a3) / (a3 + a2(l + a3)); high-pass for a2, a3 > 0."""
    _check_attr_params(a2, a3)
    a2, a3 = float(a2), float(a3)
    return FilterSpec('attr', {'a2': a2, 'a3': a3},
                      lambda lam: a2 * (lam + a3) / (a3 + a2 * (lam + a3)),
                      'highpass', ATTRIBUTE_DOMAIN)


FILTER_FACTORY: Dict[str, Callable[..., FilterSpec]] = {
    'gcn': gcn_filter,
    'gcn_regularizer': gcn_regularizer,
    'sgc': sgc_filter,
    'lp': lp_filter,
    'krr': krr_filter,
    'attr': attr_filter,
}


def make_filter(name: str, **params) -> FilterSpec:
    try:
        factory = FILTER_FACTORY[name]
    except KeyError:
        raise ParameterError(f'unknown filter {name!r}; choose from {sorted(FILTER_FACTORY)}') from None
    return factory(**params)


def filter_value(spec: FilterSpec, lam):
    """g(lambda) for a scalar or array; DomainError outside spec.domain."""
    arr = np.asarray(lam, dtype=np.float64)
    lo, hi = spec.domain
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - DOMAIN_TOL) or np.any(arr > hi + DOMAIN_TOL):
        raise DomainError(f'{spec.name}: lambda outside domain [{lo}, {hi}]')
    out = np.asarray(spec.g(arr), dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def shrinkage_profile(spec: FilterSpec, lambdas) -> np.ndarray:
    lambdas = np.asarray(lambdas, dtype=np.float64).ravel()
    if lambdas.size > 1 and np.any(np.diff(lambdas) < 0):
        raise ParameterError('lambdas must be sorted ascending')
    return np.atleast_1d(filter_value(spec, lambdas))


def _check_attr_params(a2: float, a3: float) -> None:
    if not a3 > 0:
        raise ParameterError(f'a3 must be > 0 for K_hat to be a valid kernel, got a3={a3}')
    if not a2 > 0:
        raise ParameterError(f'a2 must be > 0 for K_attr to be a valid kernel, got a2={a2}')


def khat(k: Kernel, a3: float) -> np.ndarray:
    """K_hat = I - Gamma(K, a3)."""
    g = gamma_operator(k, a3)
    return np.eye(g.shape[0]) - g


def attr_highpass_kernel(k: Kernel, a2: float, a3: float,
                         nystrom: Optional['NystromOptions'] = None) -> Kernel:
    """K_attr = (I + (1/a2) (I - Gamma(K, a3)))^{-1}.

    Its eigenvalues are g(lambda_i) = a2(lambda_i + a3)/(a3 + a2(lambda_i + a3))
    for the eigenvalues lambda_i of K. With `nystrom` set, the inverse is
    replaced by a Nystrom approximation (see csf.nystrom).
    """
    _check_attr_params(a2, a3)
    if nystrom is not None:
        from csf.nystrom import nystrom_attr_kernel
        return nystrom_attr_kernel(k, a2, a3, nystrom)
    n = k.n
    m = np.eye(n) + khat(k, a3) / a2
    try:
        k_attr = scipy.linalg.solve(m, np.eye(n), assume_a='pos')
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericError(f'I + K_hat / a2 is not invertible ({e})') from None
    k_attr = 0.5 * (k_attr + k_attr.T)
    if k.psd_checked:
        return assert_psd(k_attr)
    return Kernel(k_attr)


def topology_lowpass_kernel(g: Graph) -> Kernel:
    """K_top = I - L_tilde = D~^{-1/2} (A + I) D~^{-1/2}.

    Symmetric with eigenvalues in (-1, 1]; not PSD in general.
    """
    a = g.adjacency(self_loops=True)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    k = inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return Kernel(0.5 * (k + k.T))


def gcn_kernel(g: Graph, avg_degree: Optional[float] = None) -> Kernel:
    """Damped analytic kernel I - (p/(p+1)) L_tilde (p the average degree)."""
    p = degree_info(g).avg_degree if avg_degree is None else float(avg_degree)
    if not p > 0:
        raise ParameterError('average degree must be > 0; graph has no edges')
    lap = normalized_laplacian(g, with_self_loops=True)
    return Kernel(np.eye(g.n_nodes) - (p / (p + 1.0)) * lap)


def graph_fourier_basis(g: Graph) -> EigenSystem:
    """Eigensystem of L_tilde: columns are graph-Fourier signals, low to high frequency."""
    return eigendecompose(normalized_laplacian(g, with_self_loops=True))


def frequency_response(k: Kernel, signals) -> np.ndarray:
    """K @ signals; on Fourier signals this reads out per-frequency gain."""
    s = np.asarray(signals, dtype=np.float64)
    vec = s.ndim == 1
    if vec:
        s = s[:, None]
    if s.ndim != 2 or s.shape[0] != k.n:
        raise KernelError(f'signals need {k.n} rows, got shape {np.shape(signals)}')
    out = k.matrix @ s
    return out[:, 0] if vec else out


def gain_table(kernels: Mapping[str, Kernel], basis: EigenSystem,
               indices: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Rayleigh-quotient gain u^T K u of each kernel on selected basis vectors."""
    idx = np.arange(basis.eigenvalues.size) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= basis.eigenvalues.size):
        raise ParameterError('signal index out of range')
    u = basis.eigenvectors[:, idx]
    gains = {}
    for name, k in kernels.items():
        resp = frequency_response(k, u)
        gains[name] = np.einsum('ij,ij->j', u, resp)
    return basis.eigenvalues[idx], gains


def is_monotone(spec: FilterSpec, grid: Iterable[float], increasing: bool) -> bool:
    vals = np.atleast_1d(filter_value(spec, np.asarray(list(grid), dtype=np.float64)))
    diffs = np.diff(vals)
    return bool(np.all(diffs >= -1e-15) if increasing else np.all(diffs <= 1e-15))
