"""Experiment harness behind the `csf` subcommands.

An experiment is a frozen `ExperimentConfig`. Results land in

    <out>/<experiment-id>/config.json
    <out>/<experiment-id>/runs/depth{d}_seed{s}.json
    <out>/<experiment-id>/aggregate.tsv

The experiment id hashes the configuration, so re-running the same
configuration rewrites the same directory with identical tables.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from csf.errors import ConfigError
from csf.graph import Dataset, degree_info, label_assortativity, load_dataset, random_split, suggest_a2
from csf.kernels import PSD_POLICIES, Kernel, gaussian_knn_kernel
from csf.mkl import fuse, select_gamma, write_gamma_scores
from csf.nystrom import MODES, NystromOptions, frobenius_error
from csf.spectral import (FILTER_FACTORY, attr_highpass_kernel, gain_table,
                          graph_fourier_basis, make_filter, shrinkage_profile, topology_lowpass_kernel)
from csf.trainer import LR_GRID, VARIANTS, ModelConfig, TrainReport, ablation_variant, depth_sweep, train
from utils.helpers import output_root, read_json, write_json, write_tsv

logger = logging.getLogger(__name__)

SPLIT_POLICIES = ('auto', 'from_file', 'random')
SWEEP_KINDS = ('knn_topk', 'a2', 'a3', 'lr', 'gamma')
AGGREGATE_HEADER = ('depth', 'n_seeds', 'mean_test_acc', 'std_test_acc', 'mean_val_acc', 'std_val_acc')


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str
    variant: str = 'full'
    a2: Union[float, str] = 100.0
    a3: float = 1.0
    gamma: float = 0.1
    gamma_grid: Optional[Tuple[float, ...]] = None
    top_k: Optional[int] = 20
    depths: Tuple[int, ...] = (2,)
    lr: float = 0.01
    lr_grid: Tuple[float, ...] = LR_GRID
    seeds: Tuple[int, ...] = tuple(range(10))
    split: str = 'auto'
    train_frac: float = 0.6
    val_frac: float = 0.2
    split_seed: int = 0
    nystrom_m: Optional[int] = None
    nystrom_rank: Optional[int] = None
    nystrom_mode: str = 'final'
    psd_policy: str = 'project'
    hidden_dim: int = 16
    dropout: float = 0.5
    epochs: int = 150
    activation: str = 'relu'
    concat_x: bool = True
    out_dir: Optional[str] = None

    def __post_init__(self):
        for name in ('depths', 'seeds', 'lr_grid'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.gamma_grid is not None:
            object.__setattr__(self, 'gamma_grid', tuple(float(g) for g in self.gamma_grid))
        if self.variant not in VARIANTS:
            raise ConfigError(f'unknown variant {self.variant!r}; choose from {VARIANTS}')
        if isinstance(self.a2, str):
            if self.a2 != 'auto':
                raise ConfigError(f"a2 must be a positive number or 'auto', got {self.a2!r}")
        elif not self.a2 > 0:
            raise ConfigError('a2 must be > 0')
        if not self.a3 > 0:
            raise ConfigError('a3 must be > 0')
        if not self.gamma >= 0 or (self.gamma_grid is not None and
                                   (not self.gamma_grid or min(self.gamma_grid) < 0)):
            raise ConfigError('gamma values must be >= 0 and the gamma grid nonempty')
        if self.top_k is not None and (not isinstance(self.top_k, int) or self.top_k < 1):
            raise ConfigError(f"top_k must be a count >= 1 or 'full', got {self.top_k!r}")
        if not self.depths or min(self.depths) < 1:
            raise ConfigError('depths must be a nonempty list of counts >= 1')
        if len(set(self.depths)) != len(self.depths):
            raise ConfigError(f'duplicate depth in {list(self.depths)}')
        if not self.seeds:
            raise ConfigError('seeds must be nonempty')
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f'duplicate seed in {list(self.seeds)}')
        if self.split not in SPLIT_POLICIES:
            raise ConfigError(f'unknown split policy {self.split!r}; choose from {SPLIT_POLICIES}')
        if self.train_frac <= 0 or self.val_frac < 0 or self.train_frac + self.val_frac > 1:
            raise ConfigError('split fractions must satisfy 0 < train_frac and train_frac + val_frac <= 1')
        if self.psd_policy not in PSD_POLICIES:
            raise ConfigError(f'unknown psd policy {self.psd_policy!r}')
        if self.nystrom_mode not in MODES:
            raise ConfigError(f'unknown Nystrom mode {self.nystrom_mode!r}')

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> 'ExperimentConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f'unknown config keys: {", ".join(unknown)}')
        if 'dataset_path' not in values:
            raise ConfigError('dataset_path is required')
        if str(values.get('top_k')).lower() == 'full':
            values = {**values, 'top_k': None}
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_json(self) -> Dict[str, Any]:
        payload = asdict(self)
        for name in ('depths', 'seeds', 'lr_grid', 'gamma_grid'):
            if payload[name] is not None:
                payload[name] = list(payload[name])
        return payload

    @property
    def experiment_id(self) -> str:
        payload = self.to_json()
        payload.pop('out_dir')
        digest = hashlib.sha1(json.dumps(payload, sort_keys=True).encode('utf-8')).hexdigest()[:10]
        return f'{Path(self.dataset_path).name}-{self.variant}-{digest}'

    def output_dir(self) -> Path:
        root = Path(self.out_dir) if self.out_dir else output_root()
        return root / self.experiment_id

    def nystrom(self) -> Optional[NystromOptions]:
        if self.nystrom_m is None:
            return None
        return NystromOptions(self.nystrom_m, self.nystrom_rank, self.split_seed, self.nystrom_mode)

    def model(self, depth: int, seed: int) -> ModelConfig:
        return ModelConfig(n_layers=depth, hidden_dim=self.hidden_dim, dropout=self.dropout, lr=self.lr,
                           epochs=self.epochs, activation=self.activation, concat_x=self.concat_x, seed=seed)


def merge_config(flags: Mapping[str, Any], config_file: Optional[str] = None) -> ExperimentConfig:
    """Flags first, then the JSON config file on top."""
    values = dict(flags)
    if config_file:
        try:
            values.update(read_json(Path(config_file)))
        except FileNotFoundError:
            raise ConfigError(f'config file not found: {config_file}') from None
        except json.JSONDecodeError as e:
            raise ConfigError(f'{config_file}:{e.lineno}: invalid JSON: {e.msg}') from None
    return ExperimentConfig.from_mapping(values)


def load_data(cfg: ExperimentConfig) -> Dataset:
    """Load the dataset and apply the split policy."""
    data = load_dataset(cfg.dataset_path, require_splits=cfg.split == 'from_file')
    if cfg.split == 'random' or (cfg.split == 'auto' and data.split.source == 'none'):
        split = random_split(data.labels, cfg.train_frac, cfg.val_frac, cfg.split_seed)
        logger.info('using %s split: %d/%d/%d', split.source, split.train.size, split.val.size, split.test.size)
        data = replace(data, split=split)
    data.split.validate(data.labels)
    return data


def resolve_a2(cfg: ExperimentConfig, data: Dataset) -> float:
    if cfg.a2 != 'auto':
        return float(cfg.a2)
    r = label_assortativity(data.graph, data.labels.restrict(data.split.train))
    a2 = suggest_a2(r)
    logger.info('label assortativity %.4f -> a2=%g', r, a2)
    return a2


@dataclass(frozen=True)
class KernelSet:
    k_knn: Kernel
    k_attr: Kernel
    k_top: Kernel
    a2: float


def build_kernels(cfg: ExperimentConfig, data: Dataset) -> KernelSet:
    x = data.graph.attributes
    top_k = cfg.top_k
    if top_k is not None and top_k >= data.graph.n_nodes:
        logger.warning('top_k=%d >= N=%d; using the fully connected kernel', top_k, data.graph.n_nodes)
        top_k = None
    a2 = resolve_a2(cfg, data)
    k_knn = gaussian_knn_kernel(x, top_k=top_k, psd_policy=cfg.psd_policy)
    k_attr = attr_highpass_kernel(k_knn, a2, cfg.a3, nystrom=cfg.nystrom())
    return KernelSet(k_knn, k_attr, topology_lowpass_kernel(data.graph), a2)


def variant_kernel(cfg: ExperimentConfig, kernels: KernelSet, gamma: float) -> Kernel:
    return ablation_variant(cfg.variant, k_attr=kernels.k_attr, k_top=kernels.k_top,
                            k_knn=kernels.k_knn, gamma=gamma)


def choose_gamma(cfg: ExperimentConfig, data: Dataset, kernels: KernelSet, out: Optional[Path] = None) -> float:
    """cfg.gamma, or the grid value with the best validation accuracy.

    Selection trains at the first depth and first seed; only fusing
    variants take part.
    """
    if cfg.gamma_grid is None or cfg.variant not in ('full', 'lowpass_attribute'):
        return cfg.gamma
    left = kernels.k_attr if cfg.variant == 'full' else kernels.k_knn
    model = cfg.model(cfg.depths[0], cfg.seeds[0])
    gamma, scores = select_gamma(left, kernels.k_top, cfg.gamma_grid, lambda k: train(data, k, model))
    if out is not None:
        write_gamma_scores(out / 'gamma_scores.tsv', scores)
    return gamma


def _run_cells(cfg: ExperimentConfig, data: Dataset, kernel: Kernel) -> Dict[Tuple[int, int], TrainReport]:
    rows = depth_sweep(data, kernel, cfg.model(cfg.depths[0], cfg.seeds[0]), cfg.depths, cfg.seeds)
    return {(row.depth, r.seed): r for row in rows for r in row.reports}


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def aggregate(reports: Mapping[Tuple[int, int], TrainReport]) -> List[Tuple]:
    """One row per depth: mean and population std over seeds."""
    rows = []
    for depth in sorted({d for d, _ in reports}):
        cell = [reports[k] for k in sorted(reports) if k[0] == depth]
        test = _mean_std([r.test_acc_at_best_val for r in cell])
        val = _mean_std([r.best_val_acc for r in cell])
        rows.append((depth, len(cell), test[0], test[1], val[0], val[1]))
    return rows


def run_file(depth: int, seed: int) -> str:
    return f'depth{depth}_seed{seed}.json'


def cmd_run(cfg: ExperimentConfig) -> Path:
    """Train every (depth, seed) cell and write the result files; returns the experiment directory."""
    out = cfg.output_dir()
    (out / 'runs').mkdir(parents=True, exist_ok=True)
    data = load_data(cfg)
    kernels = build_kernels(cfg, data)
    gamma = choose_gamma(cfg, data, kernels, out)
    kernel = variant_kernel(cfg, kernels, gamma)
    reports = _run_cells(cfg, data, kernel)

    meta = {'config': cfg.to_json(), 'experiment_id': cfg.experiment_id, 'a2': kernels.a2, 'gamma': gamma,
            'split': {'source': data.split.source, **data.split.to_json()}}
    write_json(out / 'config.json', meta)
    for (depth, seed), report in sorted(reports.items()):
        write_json(out / 'runs' / run_file(depth, seed), report.to_json())
    rows = aggregate(reports)
    write_tsv(out / 'aggregate.tsv', AGGREGATE_HEADER, rows)
    for depth, n, mt, st, _, _ in rows:
        logger.info('depth %d: test acc %.4f +- %.4f over %d seeds', depth, mt, st, n)
    return out


def reaggregate(out: Path) -> List[Tuple]:
    """Recompute the aggregate table from the per-run files of an experiment directory."""
    reports = {}
    for path in sorted((Path(out) / 'runs').glob('depth*_seed*.json')):
        r = TrainReport.from_json(read_json(path))
        reports[(r.n_layers, r.seed)] = r
    return aggregate(reports)


def _sweep_value(kind: str, raw: Any) -> Any:
    if kind == 'knn_topk':
        return None if str(raw).lower() == 'full' else int(raw)
    return float(raw)


def cmd_sweep(kind: str, cfg: ExperimentConfig, grid: Sequence[Any]) -> Path:
    """One aggregate row per grid value, averaged over every depth and seed cell."""
    if kind not in SWEEP_KINDS:
        raise ConfigError(f'unknown sweep kind {kind!r}; choose from {SWEEP_KINDS}')
    if not grid:
        raise ConfigError('sweep grid is empty')
    out = cfg.output_dir()
    data = load_data(cfg)
    field_name = {'knn_topk': 'top_k', 'a2': 'a2', 'a3': 'a3', 'lr': 'lr', 'gamma': 'gamma'}[kind]
    rows = []
    for raw in grid:
        value = _sweep_value(kind, raw)
        cell_cfg = replace(cfg, **{field_name: value})
        if kind == 'gamma':
            cell_cfg = replace(cell_cfg, gamma_grid=None)
        kernels = build_kernels(cell_cfg, data)
        gamma = choose_gamma(cell_cfg, data, kernels)
        reports = _run_cells(cell_cfg, data, variant_kernel(cell_cfg, kernels, gamma))
        test = _mean_std([r.test_acc_at_best_val for r in reports.values()])
        val = _mean_std([r.best_val_acc for r in reports.values()])
        rows.append(('full' if value is None else value, len(reports), test[0], test[1], val[0], val[1]))
        logger.info('%s=%s: test acc %.4f +- %.4f', kind, raw, test[0], test[1])
    write_json(out / 'config.json', {'config': cfg.to_json(), 'sweep': kind, 'grid': [str(g) for g in grid]})
    return write_tsv(out / f'sweep_{kind}.tsv',
                     (kind, 'n_cells', 'mean_test_acc', 'std_test_acc', 'mean_val_acc', 'std_val_acc'), rows)


def default_filter(name: str, cfg: ExperimentConfig, data: Dataset, a2: float):
    """Filter `name` with parameters taken from the experiment."""
    if name == 'attr':
        return make_filter('attr', a2=a2, a3=cfg.a3)
    if name == 'krr':
        return make_filter('krr', a=cfg.a3)
    if name in ('gcn', 'gcn_regularizer'):
        return make_filter(name, avg_degree=degree_info(data.graph).avg_degree)
    if name == 'sgc':
        return make_filter('sgc', c=2)
    if name == 'lp':
        return make_filter('lp', a1=9.0)
    return make_filter(name)


def cmd_spectral(cfg: ExperimentConfig, filter_names: Sequence[str],
                 signal_indices: Optional[Sequence[int]] = None,
                 lambdas: Optional[Sequence[float]] = None) -> List[Path]:
    """Write shrinkage profiles of the named filters and the per-frequency gains of the kernels."""
    for name in filter_names:
        if name not in FILTER_FACTORY:
            raise ConfigError(f'unknown filter {name!r}; choose from {sorted(FILTER_FACTORY)}')
    out = cfg.output_dir()
    data = load_data(cfg)
    kernels = build_kernels(cfg, data)
    paths = []
    for name in filter_names:
        spec = default_filter(name, cfg, data, kernels.a2)
        grid = np.linspace(0.0, 2.0, 21) if lambdas is None else np.asarray(sorted(lambdas), dtype=np.float64)
        values = shrinkage_profile(spec, grid)
        paths.append(write_tsv(out / f'shrinkage_{name}.tsv', ('lambda', name), zip(grid, values)))

    basis = graph_fourier_basis(data.graph)
    n = data.graph.n_nodes
    idx = sorted(set([0, n // 4, n // 2, (3 * n) // 4, n - 1])) if signal_indices is None else list(signal_indices)
    gamma = cfg.gamma if cfg.gamma_grid is None else cfg.gamma_grid[0]
    named = {'k_top': kernels.k_top, 'k_knn': kernels.k_knn, 'k_attr': kernels.k_attr,
             'fused': fuse(kernels.k_attr, kernels.k_top, gamma)}
    eig, gains = gain_table(named, basis, idx)
    names = list(named)
    rows = [(i, e, *(gains[k][j] for k in names)) for j, (i, e) in enumerate(zip(idx, eig))]
    paths.append(write_tsv(out / 'frequency_response.tsv', ('index', 'eigenvalue', *names), rows))
    return paths


def cmd_nystrom_bench(cfg: ExperimentConfig, m_grid: Sequence[int]) -> Path:
    """Nystrom K_attr against the exact one: error, build time and downstream accuracy per m.

    wall_ms covers only the K_attr computation from the shared KNN kernel;
    the KNN kernel, K_top and a2 are built once.
    """
    if not m_grid:
        raise ConfigError('m grid is empty')
    out = cfg.output_dir()
    data = load_data(cfg)
    exact = build_kernels(replace(cfg, nystrom_m=None, nystrom_rank=None), data)
    unchecked_knn = Kernel(exact.k_knn.matrix)

    def timed_attr(options: Optional[NystromOptions]) -> Tuple[Kernel, float]:
        started = time.perf_counter()
        k_attr = attr_highpass_kernel(unchecked_knn, exact.a2, cfg.a3, nystrom=options)
        return k_attr, (time.perf_counter() - started) * 1000.0

    _, exact_ms = timed_attr(None)
    gamma = cfg.gamma
    model = cfg.model(cfg.depths[0], cfg.seeds[0])

    def accuracy(kernels: KernelSet) -> float:
        kernel = variant_kernel(cfg, kernels, gamma)
        return float(np.mean([train(data, kernel, replace(model, seed=s)).test_acc_at_best_val
                              for s in cfg.seeds]))

    exact_acc = accuracy(exact)
    logger.info('exact K_attr: %.1f ms, test acc %.4f', exact_ms, exact_acc)
    rows = []
    for m in m_grid:
        m = int(m)
        rank = m if cfg.nystrom_rank is None else min(int(cfg.nystrom_rank), m)
        k_attr, wall_ms = timed_attr(replace(cfg, nystrom_m=m, nystrom_rank=rank).nystrom())
        approx = replace(exact, k_attr=k_attr)
        logger.info('m=%d: %.1f ms (exact %.1f ms)', m, wall_ms, exact_ms)
        err = frobenius_error(approx.k_attr.matrix, exact.k_attr.matrix)
        rows.append((m, rank, err, wall_ms, accuracy(approx)))
    write_json(out / 'config.json', {'config': cfg.to_json(), 'exact_wall_ms': exact_ms, 'exact_accuracy': exact_acc})
    return write_tsv(out / 'nystrom_bench.tsv', ('m', 'rank_k', 'frobenius_error', 'wall_ms', 'accuracy'), rows)
