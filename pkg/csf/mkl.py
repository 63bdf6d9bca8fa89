"""Cross-space kernel fusion.

    KK = (K_attr + K_top) / 2 + gamma (K_attr - K_top)^2

The squared difference is PSD, so KK is PSD whenever both inputs are.
gamma is picked by single-split validation accuracy over a small grid.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from csf.errors import CSFError, KernelError, ParameterError
from csf.kernels import Kernel, assert_psd
from utils.helpers import worker_count, write_tsv

logger = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = (0.0, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class FusionConfig:
    gamma: float = 0.1
    gamma_grid: Tuple[float, ...] = DEFAULT_GAMMA_GRID

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ParameterError('gamma must be >= 0')
        if any(not g >= 0 for g in self.gamma_grid):
            raise ParameterError('gamma grid values must be >= 0')
        object.__setattr__(self, 'gamma_grid', tuple(float(g) for g in self.gamma_grid))


@dataclass(frozen=True)
class GammaScore:
    gamma: float
    val_accuracy: float
    seed: int


def fuse(k_attr: Kernel, k_top: Kernel, gamma: float) -> Kernel:
    if not gamma >= 0:
        raise ParameterError(f'gamma must be >= 0, got {gamma}')
    if k_attr.n != k_top.n:
        raise KernelError(f'kernel sizes differ: {k_attr.n} vs {k_top.n}')
    a, t = k_attr.matrix, k_top.matrix
    diff = a - t
    sq = diff @ diff.T
    out = 0.5 * (a + t) + gamma * 0.5 * (sq + sq.T)
    out = 0.5 * (out + out.T)
    if k_attr.psd_checked and k_top.psd_checked:
        return assert_psd(out)
    logger.debug('fusing with an unchecked kernel; result is symmetric but not PSD-checked')
    return Kernel(out)


class GammaSelectionError(CSFError):
    def __init__(self, gamma: float, cause: Exception):
        self.gamma = gamma
        super().__init__(f'gamma={gamma:g}: {cause}')


def select_gamma(k_attr: Kernel, k_top: Kernel, grid: Sequence[float],
                 train_fn: Callable[[Kernel], object],
                 max_workers: Optional[int] = None) -> Tuple[float, List[GammaScore]]:
    """Train on the fused kernel for every gamma; keep the best validation accuracy.

    `train_fn(kernel)` returns an object with `best_val_acc` and `seed`
    (a TrainReport). Ties go to the smaller gamma.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ParameterError('gamma grid is empty')

    def evaluate(g: float) -> GammaScore:
        try:
            report = train_fn(fuse(k_attr, k_top, g))
        except Exception as e:
            raise GammaSelectionError(g, e) from e
        return GammaScore(g, float(report.best_val_acc), int(report.seed))

    workers = min(len(grid), worker_count(max_workers))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(evaluate, grid))
    else:
        scores = [evaluate(g) for g in grid]
    best = min(scores, key=lambda s: (-s.val_accuracy, s.gamma))
    logger.info('selected gamma=%g (val acc %.4f)', best.gamma, best.val_accuracy)
    return best.gamma, scores


def write_gamma_scores(path, scores: Sequence[GammaScore]):
    return write_tsv(path, ('gamma', 'val_accuracy', 'seed'),
                     ((s.gamma, s.val_accuracy, s.seed) for s in scores))
