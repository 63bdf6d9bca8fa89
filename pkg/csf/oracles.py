"""Closed-form reference models and brute-force verifiers.

Ridge regression, kernel ridge regression and label propagation are the
classic filters the attribute kernel generalizes. The semi-supervised KRR
problems are checked two ways: the closed forms used by the library and an
independent solve of the quadratic objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from csf.errors import ConvergenceError, GraphError, NumericError, ParameterError
from csf.graph import Graph, LabelMatrix, normalized_laplacian
from csf.kernels import Kernel, eigendecompose, gamma_operator
from csf.spectral import attr_highpass_kernel

logger = logging.getLogger(__name__)


def _as_2d(y) -> Tuple[np.ndarray, bool]:
    y = np.asarray(y.onehot if isinstance(y, LabelMatrix) else y, dtype=np.float64)
    if y.ndim == 1:
        return y[:, None], True
    return y, False


def _finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError('non-finite input')


@dataclass(frozen=True, eq=False)
class RidgeSolution:
    beta: np.ndarray
    lam: float
    shrinkage: np.ndarray

    def residual(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y, _ = _as_2d(y)
        b = self.beta.reshape(x.shape[1], -1)
        r = (x.T @ x + self.lam * np.eye(x.shape[1])) @ b - x.T @ y
        return float(np.max(np.abs(r)))


def ridge_fit(x, y, lam: float) -> RidgeSolution:
    """beta = (X^T X + lam I)^{-1} X^T Y, with shrinkage factors d^2/(d^2 + lam).

    Factors follow the singular values of X in descending order.
    """
    if not lam > 0:
        raise ParameterError('ridge penalty must be > 0')
    x = np.asarray(x, dtype=np.float64)
    y2, vec = _as_2d(y)
    _finite(x, y2)
    gram = x.T @ x + lam * np.eye(x.shape[1])
    beta = scipy.linalg.solve(gram, x.T @ y2, assume_a='pos')
    d = scipy.linalg.svdvals(x)
    return RidgeSolution(beta[:, 0] if vec else beta, float(lam), d * d / (d * d + lam))


def krr_fit(k: Kernel, y, lam: float) -> np.ndarray:
    """Fitted values Gamma(K, lam) Y of kernel ridge regression."""
    if not lam > 0:
        raise ParameterError('ridge penalty must be > 0')
    y2, vec = _as_2d(y)
    _finite(y2)
    fitted = gamma_operator(k, lam) @ y2
    return fitted[:, 0] if vec else fitted


def krr_shrinkage(k: Kernel, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of K and the KRR shrinkage lam_i / (lam_i + lam)."""
    w = eigendecompose(k).eigenvalues
    return w, w / (w + lam)


def label_propagation(g: Graph, y0, gamma: float) -> np.ndarray:
    """Closed form (I + gamma/(1-gamma) L)^{-1} Y0."""
    if not 0.0 <= gamma < 1.0:
        raise ParameterError('gamma must lie in [0, 1)')
    if g.isolated_nodes().size:
        raise GraphError('label propagation needs a graph without isolated nodes')
    y2, vec = _as_2d(y0)
    lap = normalized_laplacian(g, with_self_loops=False)
    a1 = gamma / (1.0 - gamma)
    out = scipy.linalg.solve(np.eye(g.n_nodes) + a1 * lap, y2, assume_a='pos')
    return out[:, 0] if vec else out


def label_propagation_iterative(g: Graph, y0, gamma: float, n_iter: int = 500) -> np.ndarray:
    """Y <- gamma S Y + (1 - gamma) Y0 with S = D^{-1/2} A D^{-1/2}, from Y = Y0."""
    if not 0.0 <= gamma < 1.0:
        raise ParameterError('gamma must lie in [0, 1)')
    if g.isolated_nodes().size:
        raise GraphError('label propagation needs a graph without isolated nodes')
    y2, vec = _as_2d(y0)
    s = np.eye(g.n_nodes) - normalized_laplacian(g, with_self_loops=False)
    y = y2.copy()
    for _ in range(n_iter):
        y = gamma * (s @ y) + (1.0 - gamma) * y2
    return y[:, 0] if vec else y


def lp_filter_factors(g: Graph, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Laplacian eigenvalues and label propagation's factors 1/(1 + a1 lambda)."""
    lap = normalized_laplacian(g, with_self_loops=False)
    w = eigendecompose(lap).eigenvalues
    a1 = gamma / (1.0 - gamma)
    return w, 1.0 / (1.0 + a1 * w)


def _partition(n: int, labeled_idx) -> Tuple[np.ndarray, np.ndarray]:
    lab = np.asarray(labeled_idx, dtype=np.int64).ravel()
    if lab.size == 0:
        raise ParameterError('labeled set is empty')
    if len(np.unique(lab)) != lab.size or lab.min() < 0 or lab.max() >= n:
        raise ParameterError('labeled indices must be distinct and in range')
    mask = np.zeros(n, dtype=bool)
    mask[lab] = True
    unl = np.flatnonzero(~mask)
    if unl.size == 0:
        raise ParameterError('unlabeled set is empty')
    return lab, unl


def _labeled_rows(y_l, labeled_idx) -> np.ndarray:
    if isinstance(y_l, LabelMatrix):
        return np.asarray(y_l.onehot, dtype=np.float64)[np.asarray(labeled_idx, dtype=np.int64)]
    y, _ = _as_2d(y_l)
    return y


def transductive_z(khat, y_l, labeled_idx, a2: float) -> np.ndarray:
    """Z = -(K_hat_uu + a2 I)^{-1} K_hat_ul Y_L for the unlabeled rows.

    `y_l` holds the labeled rows in the order of `labeled_idx` (a full
    LabelMatrix is also accepted and restricted). Rows of Z follow the
    ascending unlabeled node order.
    """
    if not a2 > 0:
        raise ParameterError('a2 must be > 0')
    kh = np.asarray(khat, dtype=np.float64)
    lab, unl = _partition(kh.shape[0], labeled_idx)
    yl = _labeled_rows(y_l, lab)
    k_uu = kh[np.ix_(unl, unl)]
    k_ul = kh[np.ix_(unl, lab)]
    return -scipy.linalg.solve(k_uu + a2 * np.eye(unl.size), k_ul @ yl, assume_a='sym')


def _assemble(n: int, lab, unl, yl, z) -> np.ndarray:
    full = np.zeros((n, yl.shape[1]))
    full[lab] = yl
    full[unl] = z
    return full


def problem2_objective(khat, y_l, labeled_idx, a2: float, z) -> float:
    """tr(Y^T K_hat Y) + a2 |Z|^2 with Y the labeled rows stacked with Z."""
    kh = np.asarray(khat, dtype=np.float64)
    lab, unl = _partition(kh.shape[0], labeled_idx)
    yl = _labeled_rows(y_l, lab)
    y = _assemble(kh.shape[0], lab, unl, yl, np.asarray(z, dtype=np.float64).reshape(unl.size, -1))
    return float(np.sum(y * (kh @ y)) + a2 * np.sum(np.square(z)))


def brute_force_problem2(khat, y_l, labeled_idx, a2: float, tol: float = 1e-9,
                         step: float = 1e-2, max_iter: int = 1_000_000) -> np.ndarray:
    """Minimize the transductive objective without using the block formula.

    The gradient map is probed on unit vectors to assemble the quadratic,
    which is then solved directly; gradient descent takes over when the
    assembled system is singular or the stationarity residual is too big.
    """
    if not a2 > 0:
        raise ParameterError('a2 must be > 0')
    kh = np.asarray(khat, dtype=np.float64)
    n = kh.shape[0]
    if n > 50:
        raise ParameterError('brute_force_problem2 is a test oracle for N <= 50')
    lab, unl = _partition(n, labeled_idx)
    yl = _labeled_rows(y_l, lab)
    nu, c = unl.size, yl.shape[1]

    def grad(z):
        y = _assemble(n, lab, unl, yl, z)
        return 2.0 * (kh @ y)[unl] + 2.0 * a2 * z

    g0 = grad(np.zeros((nu, c)))
    hess = np.empty((nu, nu))
    for j in range(nu):
        e = np.zeros((nu, c))
        e[j, :] = 1.0
        hess[:, j] = (grad(e) - g0)[:, 0]
    z = None
    try:
        z = np.linalg.lstsq(hess, -g0, rcond=None)[0]
    except np.linalg.LinAlgError:
        logger.debug('direct quadratic solve failed; falling back to gradient descent')
    if z is None or np.max(np.abs(grad(z))) > tol:
        z = np.zeros((nu, c)) if z is None else z
        lip = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (hess + hess.T))))) or 1.0
        lr = min(step, 1.0 / lip)
        for _ in range(max_iter):
            gz = grad(z)
            if np.max(np.abs(gz)) <= tol:
                break
            z = z - lr * gz
        else:
            raise ConvergenceError(f'gradient descent did not reach |grad| <= {tol:g} in {max_iter} steps')
    return z


def semi_krr_fitted(k: Kernel, y0, a2: float, a3: float) -> np.ndarray:
    """Fitted values K_attr Y0 of semi-supervised kernel ridge regression."""
    y2, vec = _as_2d(y0)
    out = attr_highpass_kernel(k, a2, a3).matrix @ y2
    return out[:, 0] if vec else out


def stationarity_solve(k: Kernel, y0, a2: float, a3: float) -> np.ndarray:
    """Solve (K_hat + a2 I) Y = a2 Y0, the stationarity condition of the fitted-value problem."""
    y2, vec = _as_2d(y0)
    kh = np.eye(k.n) - gamma_operator(k, a3)
    out = np.linalg.solve(kh + a2 * np.eye(k.n), a2 * y2)
    return out[:, 0] if vec else out


def problem1_objective(k: Kernel, y_full, alpha, unlabeled, a2: float, a3: float) -> float:
    """|Y - K alpha|^2 + a3 alpha^T K alpha + a2 |Z|^2 (joint objective)."""
    y, _ = _as_2d(y_full)
    alpha = np.asarray(alpha, dtype=np.float64).reshape(y.shape)
    km = k.matrix
    resid = y - km @ alpha
    z = y[np.asarray(unlabeled, dtype=np.int64)]
    return float(np.sum(resid * resid) + a3 * np.sum(alpha * (km @ alpha)) + a2 * np.sum(z * z))


def closed_form_problem1(k: Kernel, y_l, labeled_idx, a2: float, a3: float) -> Tuple[float, np.ndarray, np.ndarray]:
    """Joint objective at alpha = (a3 I + K)^{-1} Y with Z from the transductive solution.

    Recorded for inspection only: the joint problem is not claimed to be
    minimized exactly at this point.
    """
    kh = np.eye(k.n) - gamma_operator(k, a3)
    lab, unl = _partition(k.n, labeled_idx)
    yl = _labeled_rows(y_l, lab)
    z = transductive_z(kh, yl, lab, a2)
    y = _assemble(k.n, lab, unl, yl, z)
    alpha = np.linalg.solve(k.matrix + a3 * np.eye(k.n), y)
    return problem1_objective(k, y, alpha, unl, a2, a3), y, alpha
