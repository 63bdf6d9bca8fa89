"""Kernel-propagation network, its training loop and the depth experiments.

Each layer computes

    H' = sigma(P H W) (+) X,      P = D^{-1/2} KK D^{-1/2},  D_ii = sum_j KK_ij

where (+) is column concatenation with the raw attributes. The final layer
maps to class scores with no activation and no concatenation. Training is
full-graph and transductive: softmax cross-entropy on the train rows,
manual backpropagation and Adam.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from csf.errors import NumericError, ParameterError, TrainingError
from csf.graph import Dataset, Graph, LabelMatrix, SplitSpec, representation_diversity
from csf.kernels import Kernel
from csf.mkl import fuse
from utils.helpers import worker_count

logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'identity')
VARIANTS = ('full', 'no_topology', 'no_attribute', 'lowpass_attribute', 'only_lowpass_attribute', 'mlp')
LR_GRID = (0.03, 0.02, 0.01, 0.005, 0.1, 0.2, 0.3, 0.4, 0.5)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
KINK_MARGIN = 1e-4


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 2
    hidden_dim: int = 16
    dropout: float = 0.5
    lr: float = 0.01
    epochs: int = 150
    activation: str = 'relu'
    concat_x: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.n_layers) < 1:
            raise ParameterError('n_layers must be >= 1')
        if int(self.epochs) < 1:
            raise ParameterError('epochs must be >= 1')
        if int(self.hidden_dim) < 1:
            raise ParameterError('hidden_dim must be >= 1')
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError('dropout must lie in [0, 1)')
        if not self.lr > 0:
            raise ParameterError('lr must be > 0')
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f'unknown activation {self.activation!r}; choose from {ACTIVATIONS}')


@dataclass
class TrainReport:
    per_epoch_loss: List[float]
    best_val_acc: float
    test_acc_at_best_val: float
    diversity_per_layer: List[float]
    seed: int
    best_epoch: int = 0
    final_train_acc: float = 0.0
    n_layers: int = 0
    wall_ms: float = 0.0

    def to_json(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: Dict) -> 'TrainReport':
        return cls(**payload)


def normalize_kernel(k: Kernel) -> np.ndarray:
    """D^{-1/2} KK D^{-1/2} with D the row sums of KK."""
    m = k.matrix
    d = m.sum(axis=1)
    if np.any(d <= 0):
        bad = np.flatnonzero(d <= 0)[:5].tolist()
        raise NumericError(f'degenerate normalization: nonpositive kernel row sum at node(s) {bad}')
    inv_sqrt = 1.0 / np.sqrt(d)
    p = inv_sqrt[:, None] * m * inv_sqrt[None, :]
    return 0.5 * (p + p.T)


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == 'relu' else z


def _dact(z: np.ndarray, activation: str) -> np.ndarray:
    return (z > 0).astype(np.float64) if activation == 'relu' else np.ones_like(z)


def propagate_layer(k: Union[Kernel, np.ndarray], h, w, x, cfg: ModelConfig,
                    final: bool = False) -> np.ndarray:
    """One propagation step sigma(P H W) (+) X.

    `k` is a Kernel (normalized here) or an already normalized matrix.
    With `final=True` the activation and concatenation are skipped.
    """
    p = normalize_kernel(k) if isinstance(k, Kernel) else np.asarray(k, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    z = p @ (h @ w)
    if final:
        return z
    a = _act(z, cfg.activation)
    return np.hstack([a, np.asarray(x, dtype=np.float64)]) if cfg.concat_x else a


def layer_shapes(n_features: int, n_classes: int, cfg: ModelConfig) -> List[Tuple[int, int]]:
    """(fan_in, fan_out) of every weight matrix, input layer first."""
    shapes = []
    width = n_features
    for layer in range(cfg.n_layers):
        last = layer == cfg.n_layers - 1
        out = n_classes if last else cfg.hidden_dim
        shapes.append((width, out))
        width = cfg.hidden_dim + (n_features if cfg.concat_x else 0)
    return shapes


def init_weights(n_features: int, n_classes: int, cfg: ModelConfig,
                 rng: np.random.Generator) -> List[np.ndarray]:
    """Glorot-uniform weights, no biases."""
    weights = []
    for fan_in, fan_out in layer_shapes(n_features, n_classes, cfg):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    return weights


@dataclass
class _Cache:
    inputs: List[np.ndarray] = field(default_factory=list)
    masks: List[Optional[np.ndarray]] = field(default_factory=list)
    pre: List[np.ndarray] = field(default_factory=list)
    hidden: List[np.ndarray] = field(default_factory=list)


def _forward(p: np.ndarray, x: np.ndarray, weights: Sequence[np.ndarray], cfg: ModelConfig,
             rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, _Cache]:
    cache = _Cache()
    h = x
    keep = 1.0 - cfg.dropout
    last = len(weights) - 1
    for layer, w in enumerate(weights):
        mask = None
        if rng is not None and cfg.dropout > 0:
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        cache.inputs.append(h)
        cache.masks.append(mask)
        z = p @ (h @ w)
        cache.pre.append(z)
        if layer == last:
            return z, cache
        a = _act(z, cfg.activation)
        cache.hidden.append(a)
        h = np.hstack([a, x]) if cfg.concat_x else a
    raise AssertionError('unreachable')


def _softmax_xent(logits: np.ndarray, y: np.ndarray, rows: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over `rows` and its gradient w.r.t. all logits."""
    z = logits[rows]
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    target = y[rows]
    loss = float(-np.sum(target * log_p) / rows.size)
    grad = np.zeros_like(logits)
    grad[rows] = (np.exp(log_p) - target) / rows.size
    return loss, grad


def _backward(p: np.ndarray, weights: Sequence[np.ndarray], cache: _Cache, dlogits: np.ndarray,
              cfg: ModelConfig) -> List[np.ndarray]:
    grads: List[Optional[np.ndarray]] = [None] * len(weights)
    dz = dlogits
    for layer in range(len(weights) - 1, -1, -1):
        # P is symmetric, so P^T dz = P dz.
        pdz = p @ dz
        grads[layer] = cache.inputs[layer].T @ pdz
        if layer == 0:
            break
        dh = pdz @ weights[layer].T
        if cache.masks[layer] is not None:
            dh = dh * cache.masks[layer]
        da = dh[:, :cfg.hidden_dim]
        dz = da * _dact(cache.pre[layer - 1], cfg.activation)
    return grads


def loss_and_grads(p: np.ndarray, x: np.ndarray, y: np.ndarray, train_idx: np.ndarray,
                   weights: Sequence[np.ndarray], cfg: ModelConfig,
                   rng: Optional[np.random.Generator] = None) -> Tuple[float, List[np.ndarray]]:
    logits, cache = _forward(p, x, weights, cfg, rng)
    loss, dlogits = _softmax_xent(logits, y, train_idx)
    return loss, _backward(p, weights, cache, dlogits, cfg)


class Adam:
    def __init__(self, shapes: Sequence[Tuple[int, int]], lr: float):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, weights: List[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for i, g in enumerate(grads):
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g
            weights[i] = weights[i] - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + ADAM_EPS)


def _unpack(data) -> Tuple[Graph, LabelMatrix, SplitSpec]:
    if isinstance(data, Dataset):
        return data.graph, data.labels, data.split
    graph, labels, split = data
    return graph, labels, split


def _scored(idx: np.ndarray, labels: LabelMatrix) -> np.ndarray:
    return idx[labels.labeled_mask[idx]]


def _accuracy(pred: np.ndarray, truth: np.ndarray, idx: np.ndarray) -> float:
    if idx.size == 0:
        return 0.0
    return float(np.mean(pred[idx] == truth[idx]))


def train(data, kernel: Kernel, cfg: ModelConfig) -> TrainReport:
    """Full-graph training; the test accuracy is read at the best validation epoch.

    Deterministic given cfg.seed: weights and dropout masks come from one
    `np.random.default_rng(cfg.seed)` stream.
    """
    started = time.perf_counter()
    graph, labels, split = _unpack(data)
    n = graph.n_nodes
    if kernel.n != n:
        raise ParameterError(f'kernel is {kernel.n}x{kernel.n} but the graph has {n} nodes')
    train_idx = split.train
    if train_idx.size == 0:
        raise TrainingError('train split is empty')
    if not np.all(labels.labeled_mask[train_idx]):
        raise TrainingError('train split contains unlabeled nodes')
    val_idx = _scored(split.val, labels)
    if val_idx.size == 0:
        raise TrainingError('validation split has no labeled nodes')
    test_idx = _scored(split.test, labels)
    if test_idx.size == 0:
        logger.warning('test split has no labeled nodes; test accuracy is reported as 0')

    x = graph.attributes
    y = labels.onehot
    truth = labels.labels
    p = normalize_kernel(kernel)
    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(graph.n_features, labels.n_classes, cfg, rng)
    opt = Adam([w.shape for w in weights], cfg.lr)

    losses: List[float] = []
    train_acc = 0.0
    best_val, best_test, best_epoch = -1.0, 0.0, 0
    diversity: List[float] = []
    for epoch in range(1, cfg.epochs + 1):
        loss, grads = loss_and_grads(p, x, y, train_idx, weights, cfg, rng)
        if not np.isfinite(loss):
            raise TrainingError('loss is not finite', epoch)
        losses.append(loss)
        opt.step(weights, grads)

        logits, cache = _forward(p, x, weights, cfg)
        pred = np.argmax(logits, axis=1)
        val_acc = _accuracy(pred, truth, val_idx)
        train_acc = _accuracy(pred, truth, train_idx)
        if val_acc > best_val:
            best_val, best_epoch = val_acc, epoch
            best_test = _accuracy(pred, truth, test_idx)
            diversity = [_safe_diversity(h) for h in [x, *cache.hidden, logits]]

    wall_ms = (time.perf_counter() - started) * 1000.0
    logger.debug('trained %d layers, seed %d: best val %.4f at epoch %d, test %.4f',
                 cfg.n_layers, cfg.seed, best_val, best_epoch, best_test)
    return TrainReport(losses, best_val, best_test, diversity, cfg.seed,
                       best_epoch=best_epoch, final_train_acc=train_acc, n_layers=cfg.n_layers,
                       wall_ms=wall_ms)


def _safe_diversity(h: np.ndarray) -> float:
    return representation_diversity(h) if h.shape[0] >= 2 else 0.0


def _has_kinks(p, x, weights, cfg) -> bool:
    _, cache = _forward(p, x, weights, cfg)
    return any(np.any(np.abs(z) < KINK_MARGIN) for z in cache.pre[:-1])


def gradient_errors(cfg: ModelConfig, data, kernel: Kernel, epsilon: float = 1e-6,
                    weights: Optional[Sequence[np.ndarray]] = None) -> List[float]:
    """Relative error of the analytic gradient of every weight matrix.

    Central differences with step `epsilon`; dropout is disabled. With ReLU
    the attributes are nudged (seeded, up to 20 times) until every hidden
    pre-activation is at least 1e-4 away from the kink.
    """
    graph, labels, split = _unpack(data)
    if graph.n_nodes > 30:
        raise ParameterError('gradient check is meant for N <= 30')
    if split.train.size == 0:
        raise TrainingError('train split is empty')
    cfg = replace(cfg, dropout=0.0)
    p = normalize_kernel(kernel)
    x = np.array(graph.attributes, dtype=np.float64)
    y = labels.onehot
    train_idx = split.train
    rng = np.random.default_rng(cfg.seed)
    if weights is None:
        weights = init_weights(graph.n_features, labels.n_classes, cfg, rng)
    weights = [np.array(w, dtype=np.float64) for w in weights]

    if cfg.activation == 'relu' and cfg.n_layers > 1:
        nudge = np.random.default_rng(cfg.seed + 1)
        for _ in range(20):
            if not _has_kinks(p, x, weights, cfg):
                break
            x = x + 1e-2 * nudge.standard_normal(x.shape)
        else:
            logger.warning('some ReLU inputs remain near the kink; finite differences may disagree')

    _, analytic = loss_and_grads(p, x, y, train_idx, weights, cfg)
    errors = []
    for i, w in enumerate(weights):
        numeric = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + epsilon
            up, _ = loss_and_grads(p, x, y, train_idx, weights, cfg)
            w[idx] = orig - epsilon
            down, _ = loss_and_grads(p, x, y, train_idx, weights, cfg)
            w[idx] = orig
            numeric[idx] = (up - down) / (2.0 * epsilon)
        scale = max(float(np.max(np.abs(analytic[i]))), float(np.max(np.abs(numeric))))
        err = float(np.max(np.abs(analytic[i] - numeric)))
        errors.append(err / scale if scale > 0 else err)
    return errors


def gradient_check(cfg: ModelConfig, data, kernel: Kernel, epsilon: float = 1e-6,
                   weights: Optional[Sequence[np.ndarray]] = None) -> float:
    return max(gradient_errors(cfg, data, kernel, epsilon, weights))


def ablation_variant(name: str, k_attr: Optional[Kernel] = None, k_top: Optional[Kernel] = None,
                     k_knn: Optional[Kernel] = None, gamma: float = 0.1, n: Optional[int] = None) -> Kernel:
    """Kernel used by each ablation.

    `k_knn` is the low-pass kernel of the attribute KNN graph (the Gaussian
    KNN kernel itself); `mlp` ignores every input except the size.
    """
    def need(kernel, what):
        if kernel is None:
            raise ParameterError(f'variant {name!r} needs {what}')
        return kernel

    if name == 'full':
        return fuse(need(k_attr, 'k_attr'), need(k_top, 'k_top'), gamma)
    if name == 'no_topology':
        return need(k_attr, 'k_attr')
    if name == 'no_attribute':
        return need(k_top, 'k_top')
    if name == 'lowpass_attribute':
        return fuse(need(k_knn, 'k_knn'), need(k_top, 'k_top'), gamma)
    if name == 'only_lowpass_attribute':
        return need(k_knn, 'k_knn')
    if name == 'mlp':
        size = n if n is not None else next((k.n for k in (k_attr, k_top, k_knn) if k is not None), None)
        if size is None:
            raise ParameterError("variant 'mlp' needs a kernel or n")
        return Kernel.identity(size)
    raise ParameterError(f'unknown variant {name!r}; choose from {VARIANTS}')


def propagation_diversity(kernel: Kernel, x, depth: int, concat_x: bool = True) -> np.ndarray:
    """Weight-free propagation trace, diversity of H^k for k = 0..depth.

    H^0 = X and H^{k+1} = P H^k, or P (H^k + X) / 2 when the raw attributes
    are fed back at every layer (`concat_x`).
    """
    if depth < 0:
        raise ParameterError('depth must be >= 0')
    p = normalize_kernel(kernel)
    x = np.asarray(x, dtype=np.float64)
    h = x
    trace = [representation_diversity(h)]
    for _ in range(depth):
        h = p @ (0.5 * (h + x)) if concat_x else p @ h
        trace.append(representation_diversity(h))
    return np.asarray(trace)


@dataclass
class DepthRow:
    depth: int
    reports: List[TrainReport]
    trace: np.ndarray

    @property
    def mean_test_acc(self) -> float:
        return float(np.mean([r.test_acc_at_best_val for r in self.reports]))


def depth_sweep(data, kernel_builder: Union[Kernel, Callable[[int], Kernel]], cfg_base: ModelConfig,
                depths: Sequence[int], seeds: Optional[Sequence[int]] = None,
                max_workers: Optional[int] = None) -> List[DepthRow]:
    """Train every (depth, seed) cell; the same seeds are shared across depths."""
    depths = [int(d) for d in depths]
    if not depths:
        raise ParameterError('depths is empty')
    seeds = [cfg_base.seed] if seeds is None else [int(s) for s in seeds]
    if not seeds:
        raise ParameterError('seeds is empty')
    graph, _, _ = _unpack(data)

    def kernel_for(depth: int) -> Kernel:
        return kernel_builder(depth) if callable(kernel_builder) else kernel_builder

    kernels = {d: kernel_for(d) for d in depths}
    cells = [(d, s) for d in depths for s in seeds]

    def run(cell):
        d, s = cell
        return train(data, kernels[d], replace(cfg_base, n_layers=d, seed=s))

    workers = min(len(cells), worker_count(max_workers))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, cells))
    else:
        reports = [run(c) for c in cells]

    rows = []
    for i, d in enumerate(depths):
        chunk = reports[i * len(seeds):(i + 1) * len(seeds)]
        trace = propagation_diversity(kernels[d], graph.attributes, d, cfg_base.concat_x)
        rows.append(DepthRow(d, chunk, trace))
    return rows
