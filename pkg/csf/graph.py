"""Graph and label data model, dataset directories and Laplacians.

A dataset directory holds four UTF-8 files:

  features.tsv   N rows of M tab-separated floats
  edges.tsv      one "i<TAB>j" pair per line, 0-based, i != j
  labels.tsv     N rows, class id in [0, C) or -1 for unknown
  splits.json    {"train": [...], "val": [...], "test": [...]}

Edges are stored once with i < j; dense adjacency is built on demand.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from scipy.spatial.distance import pdist

from csf.errors import DatasetError, GraphError, ParameterError
from utils.helpers import format_float

logger = logging.getLogger(__name__)

FEATURES_FILE = 'features.tsv'
EDGES_FILE = 'edges.tsv'
LABELS_FILE = 'labels.tsv'
SPLITS_FILE = 'splits.json'


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph with a node attribute matrix."""

    n_nodes: int
    edges: np.ndarray
    attributes: np.ndarray

    def __post_init__(self):
        n = int(self.n_nodes)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        attrs = np.asarray(self.attributes, dtype=np.float64)
        if attrs.ndim != 2 or attrs.shape[0] != n:
            raise GraphError(f'attributes must have {n} rows, got shape {attrs.shape}')
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise GraphError('node index out of range')
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError('self-loop in edge list')
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            edges = np.stack([lo, hi], axis=1)
            if len(np.unique(edges, axis=0)) != len(edges):
                raise GraphError('duplicate edge')
        object.__setattr__(self, 'n_nodes', n)
        object.__setattr__(self, 'edges', _frozen(edges))
        object.__setattr__(self, 'attributes', _frozen(attrs))

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.attributes.shape[1])

    def adjacency(self, self_loops: bool = False) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.float64)
        if self.n_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        if self_loops:
            a[np.diag_indices(self.n_nodes)] += 1.0
        return a

    def isolated_nodes(self) -> np.ndarray:
        deg = np.bincount(self.edges.ravel(), minlength=self.n_nodes)
        return np.flatnonzero(deg == 0)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        return g

    def permute(self, perm: np.ndarray) -> 'Graph':
        """Relabel nodes so that new node i is old node perm[i]."""
        perm = np.asarray(perm, dtype=np.int64)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(len(perm))
        return Graph(self.n_nodes, inverse[self.edges], self.attributes[perm])


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """One-hot labels; rows of unlabeled nodes are exactly zero."""

    onehot: np.ndarray
    labeled_mask: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.onehot, dtype=np.float64)
        mask = np.asarray(self.labeled_mask, dtype=bool)
        if y.ndim != 2 or mask.shape != (y.shape[0],):
            raise ParameterError('label matrix and mask shapes disagree')
        if np.any(y[~mask] != 0.0):
            raise ParameterError('unlabeled rows must be zero')
        lab = y[mask]
        if lab.size and not (np.all((lab == 0.0) | (lab == 1.0)) and np.all(lab.sum(axis=1) == 1.0)):
            raise ParameterError('labeled rows must contain a single 1')
        object.__setattr__(self, 'onehot', _frozen(y))
        object.__setattr__(self, 'labeled_mask', _frozen(mask))

    @classmethod
    def from_labels(cls, labels, n_classes: Optional[int] = None) -> 'LabelMatrix':
        labels = np.asarray(labels, dtype=np.int64)
        known = labels >= 0
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if known.any() else 0
        if known.any() and labels[known].max() >= n_classes:
            raise ParameterError(f'class id {int(labels[known].max())} >= n_classes={n_classes}')
        y = np.zeros((len(labels), n_classes), dtype=np.float64)
        y[np.flatnonzero(known), labels[known]] = 1.0
        return cls(y, known)

    @property
    def n_nodes(self) -> int:
        return int(self.onehot.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.onehot.shape[1])

    @property
    def labels(self) -> np.ndarray:
        """Class id per node, -1 where unlabeled."""
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        out[self.labeled_mask] = np.argmax(self.onehot[self.labeled_mask], axis=1)
        return out

    @property
    def labeled_index(self) -> np.ndarray:
        return np.flatnonzero(self.labeled_mask)

    def restrict(self, index) -> 'LabelMatrix':
        """Keep only the labels of `index` (the Y0 of a training split)."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[np.asarray(index, dtype=np.int64)] = True
        mask &= self.labeled_mask
        y = np.where(mask[:, None], self.onehot, 0.0)
        return LabelMatrix(y, mask)


@dataclass(frozen=True, eq=False)
class DegreeInfo:
    degrees: np.ndarray
    avg_degree: float


@dataclass(frozen=True, eq=False)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    source: str = 'file'

    def __post_init__(self):
        for name in ('train', 'val', 'test'):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64).ravel()))
        sets = [set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ParameterError('train/val/test splits must be disjoint')

    def validate(self, labels: LabelMatrix) -> None:
        n = labels.n_nodes
        for name in ('train', 'val', 'test'):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ParameterError(f'{name} split: node index out of range')
        if not np.all(labels.labeled_mask[self.train]):
            raise ParameterError('train split contains unlabeled nodes')
        for name in ('val', 'test'):
            idx = getattr(self, name)
            missing = int(np.count_nonzero(~labels.labeled_mask[idx]))
            if missing:
                logger.warning('%s split has %d unlabeled nodes; they are ignored when scoring', name, missing)

    def to_json(self) -> Dict[str, List[int]]:
        return {'train': self.train.tolist(), 'val': self.val.tolist(), 'test': self.test.tolist()}


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: Graph
    labels: LabelMatrix
    split: SplitSpec
    name: str = 'dataset'
    meta: Dict[str, str] = field(default_factory=dict)


def _read_rows(path: Path) -> List[Tuple[int, List[str]]]:
    if not path.is_file():
        raise DatasetError('missing file', str(path))
    rows = []
    with path.open('r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip('\n').rstrip('\r')
            if not line.strip():
                continue
            rows.append((lineno, line.split('\t')))
    return rows


def _parse_features(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    if not rows:
        raise DatasetError('no feature rows', str(path))
    width = len(rows[0][1])
    out = np.empty((len(rows), width), dtype=np.float64)
    for i, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise DatasetError(f'ragged row: expected {width} values, got {len(cells)}', str(path), lineno)
        try:
            out[i] = [float(c) for c in cells]
        except ValueError as e:
            raise DatasetError(f'bad float: {e}', str(path), lineno) from None
    return out


def _parse_edges(path: Path, n: int) -> np.ndarray:
    edges = []
    seen = set()
    for lineno, cells in _read_rows(path):
        if len(cells) != 2:
            raise DatasetError(f'expected 2 columns, got {len(cells)}', str(path), lineno)
        try:
            i, j = int(cells[0]), int(cells[1])
        except ValueError:
            raise DatasetError('edge endpoints must be integers', str(path), lineno) from None
        if not (0 <= i < n and 0 <= j < n):
            raise DatasetError('node index out of range', str(path), lineno)
        if i == j:
            raise DatasetError('self-loop', str(path), lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DatasetError('duplicate edge', str(path), lineno)
        seen.add(key)
        edges.append(key)
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def _parse_labels(path: Path, n: int) -> np.ndarray:
    rows = _read_rows(path)
    if len(rows) != n:
        raise DatasetError(f'expected {n} label rows, got {len(rows)}', str(path))
    out = np.empty(n, dtype=np.int64)
    for i, (lineno, cells) in enumerate(rows):
        if len(cells) != 1:
            raise DatasetError('ragged row: expected 1 value', str(path), lineno)
        try:
            out[i] = int(cells[0])
        except ValueError:
            raise DatasetError('label must be an integer', str(path), lineno) from None
        if out[i] < -1:
            raise DatasetError('label must be >= -1', str(path), lineno)
    return out


def _parse_splits(path: Path, n: int) -> SplitSpec:
    if not path.is_file():
        raise DatasetError('missing file', str(path))
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise DatasetError(f'invalid JSON: {e.msg}', str(path), e.lineno) from None
    parts = {}
    for name in ('train', 'val', 'test'):
        idx = payload.get(name)
        if not isinstance(idx, list) or not all(isinstance(v, int) for v in idx):
            raise DatasetError(f'"{name}" must be an integer array', str(path))
        if any(v < 0 or v >= n for v in idx):
            raise DatasetError(f'"{name}": node index out of range', str(path))
        parts[name] = idx
    try:
        return SplitSpec(parts['train'], parts['val'], parts['test'], source='file')
    except ParameterError as e:
        raise DatasetError(str(e), str(path)) from None


def load_dataset(path, require_splits: bool = True, self_loops: bool = True) -> Dataset:
    """Load and validate a dataset directory.

    With require_splits=False a missing splits.json yields an empty split;
    the experiment harness then generates one. Isolated nodes are rejected
    unless the caller works with self-loops (A + I), as every kernel here does.
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetError('not a dataset directory', str(root))
    x = _parse_features(root / FEATURES_FILE)
    n = x.shape[0]
    edges = _parse_edges(root / EDGES_FILE, n)
    labels = LabelMatrix.from_labels(_parse_labels(root / LABELS_FILE, n))
    if (root / SPLITS_FILE).is_file() or require_splits:
        split = _parse_splits(root / SPLITS_FILE, n)
        if not np.all(labels.labeled_mask[split.train]):
            raise DatasetError('train split contains unlabeled nodes', str(root / SPLITS_FILE))
        split.validate(labels)
    else:
        split = SplitSpec([], [], [], source='none')
    graph = Graph(n, edges, x)
    isolated = graph.isolated_nodes()
    if isolated.size:
        if not self_loops:
            raise DatasetError(f'zero degree at isolated node(s) {isolated[:5].tolist()} without self-loops',
                               str(root / EDGES_FILE))
        logger.warning('%s: %d isolated nodes, connected only through their self-loops', root.name, isolated.size)
    logger.info('loaded %s: %d nodes, %d edges, %d features, %d classes',
                root.name, n, graph.n_edges, graph.n_features, labels.n_classes)
    return Dataset(graph, labels, split, name=root.name)


def save_dataset(path, graph: Graph, labels: LabelMatrix, split: SplitSpec) -> Path:
    """Write the dataset directory format; inverse of `load_dataset`."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with (root / FEATURES_FILE).open('w', encoding='utf-8', newline='\n') as f:
        for row in graph.attributes:
            f.write('\t'.join(format_float(v) for v in row) + '\n')
    with (root / EDGES_FILE).open('w', encoding='utf-8', newline='\n') as f:
        for i, j in graph.edges.tolist():
            f.write(f'{i}\t{j}\n')
    with (root / LABELS_FILE).open('w', encoding='utf-8', newline='\n') as f:
        for c in labels.labels.tolist():
            f.write(f'{c}\n')
    (root / SPLITS_FILE).write_text(json.dumps(split.to_json()) + '\n', encoding='utf-8')
    return root


def degree_info(g: Graph, with_self_loops: bool = False) -> DegreeInfo:
    d = g.adjacency(self_loops=with_self_loops).sum(axis=1)
    return DegreeInfo(_frozen(d), float(d.mean()) if d.size else 0.0)


def normalized_laplacian(g: Graph, with_self_loops: bool = False) -> np.ndarray:
    """I - D^{-1/2} A D^{-1/2}, or the self-loop variant built from A + I."""
    a = g.adjacency(self_loops=with_self_loops)
    d = a.sum(axis=1)
    if np.any(d <= 0):
        raise GraphError(f'zero degree at node(s) {np.flatnonzero(d <= 0)[:5].tolist()}')
    inv_sqrt = 1.0 / np.sqrt(d)
    lap = np.eye(g.n_nodes) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return 0.5 * (lap + lap.T)


def representation_diversity(h) -> float:
    """Mean pairwise Euclidean distance between L2-normalized rows.

    Zero rows stay zero. Collapsing representations drive this to 0.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise ParameterError('representation_diversity needs at least 2 rows')
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = np.where(norms > 0, h / safe, 0.0)
    return float(pdist(unit).mean())


def random_split(labels: LabelMatrix, train_frac: float = 0.6, val_frac: float = 0.2,
                 seed: int = 0) -> SplitSpec:
    """Class-stratified random split of the labeled nodes.

    Each class contributes round(train_frac * n_c) training nodes (at
    least one), round(val_frac * n_c) validation nodes, the rest testing.
    """
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac > 1:
        raise ParameterError('need 0 < train_frac and train_frac + val_frac <= 1')
    rng = np.random.default_rng(seed)
    y = labels.labels
    train, val, test = [], [], []
    for c in range(labels.n_classes):
        idx = np.flatnonzero(y == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        n_tr = max(1, int(round(train_frac * idx.size)))
        n_va = min(idx.size - n_tr, int(round(val_frac * idx.size)))
        train.extend(idx[:n_tr].tolist())
        val.extend(idx[n_tr:n_tr + n_va].tolist())
        test.extend(idx[n_tr + n_va:].tolist())
    return SplitSpec(sorted(train), sorted(val), sorted(test),
                     source=f'random({train_frac:g},{val_frac:g},seed={seed})')


def label_assortativity(g: Graph, labels: LabelMatrix) -> float:
    """Label assortativity of the labeled subgraph (networkx coefficient).

    Positive for assortative graphs, negative for disassortative ones;
    0.0 when the coefficient is undefined (no labeled edges, one class).
    """
    nxg = g.to_networkx()
    known = labels.labeled_index.tolist()
    sub = nxg.subgraph(known).copy()
    y = labels.labels
    nx.set_node_attributes(sub, {i: int(y[i]) for i in known}, 'label')
    if sub.number_of_edges() == 0:
        return 0.0
    with np.errstate(divide='ignore', invalid='ignore'):
        r = nx.attribute_assortativity_coefficient(sub, 'label')
    return float(r) if np.isfinite(r) else 0.0


def suggest_a2(assortativity: float) -> float:
    """Small shrinkage strength for assortative graphs, large otherwise."""
    return 0.1 if assortativity > 0 else 100.0
