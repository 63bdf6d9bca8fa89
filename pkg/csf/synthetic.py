"""Synthetic contextual stochastic block model graphs.

Nodes are split evenly into classes. Edges follow a stochastic block model
whose in/out-class probabilities hit a target edge homophily and average
degree; attributes are Gaussian around a per-class mean. Homophily near 1
gives an assortative graph, near 0 a disassortative one.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Tuple

import networkx as nx
import numpy as np

from csf.errors import ParameterError
from csf.graph import Graph, LabelMatrix, random_split, save_dataset

logger = logging.getLogger(__name__)


def block_probabilities(n_nodes: int, n_classes: int, homophily: float,
                        avg_degree: float) -> Tuple[float, float]:
    """(p_in, p_out) giving expected degree `avg_degree` with a `homophily` share of in-class edges."""
    size = n_nodes / n_classes
    p_in = homophily * avg_degree / max(size - 1.0, 1.0)
    p_out = (1.0 - homophily) * avg_degree / max(n_nodes - size, 1.0)
    return float(np.clip(p_in, 0.0, 1.0)), float(np.clip(p_out, 0.0, 1.0))


def _connect(g: nx.Graph, rng: np.random.Generator) -> int:
    comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: (-len(c), c[0]))
    main = comps[0]
    for comp in comps[1:]:
        u = int(comp[rng.integers(len(comp))])
        v = int(main[rng.integers(len(main))])
        g.add_edge(u, v)
    return len(comps) - 1


def contextual_sbm(n_nodes: int = 183, n_classes: int = 5, n_features: int = 32,
                   homophily: float = 0.1, avg_degree: float = 4.0, feature_sep: float = 1.0,
                   feature_noise: float = 1.0, seed: int = 0,
                   connect: bool = True) -> Tuple[Graph, LabelMatrix]:
    if n_classes < 1 or n_nodes < n_classes:
        raise ParameterError('need 1 <= n_classes <= n_nodes')
    if not 0.0 <= homophily <= 1.0:
        raise ParameterError('homophily must lie in [0, 1]')
    if avg_degree < 0 or n_features < 1:
        raise ParameterError('avg_degree must be >= 0 and n_features >= 1')
    rng = np.random.default_rng(seed)
    sizes = [n_nodes // n_classes + (1 if c < n_nodes % n_classes else 0) for c in range(n_classes)]
    p_in, p_out = block_probabilities(n_nodes, n_classes, homophily, avg_degree)
    probs = [[p_in if a == b else p_out for b in range(n_classes)] for a in range(n_classes)]
    g = nx.stochastic_block_model(sizes, probs, seed=int(rng.integers(2 ** 31)))
    labels = np.repeat(np.arange(n_classes), sizes)
    if connect and g.number_of_nodes() > 1:
        added = _connect(g, rng)
        if added:
            logger.debug('joined %d extra components to the main one', added)

    means = feature_sep * rng.standard_normal((n_classes, n_features))
    x = means[labels] + feature_noise * rng.standard_normal((n_nodes, n_features))
    edges = np.asarray(sorted((min(u, v), max(u, v)) for u, v in g.edges()), dtype=np.int64).reshape(-1, 2)
    graph = Graph(n_nodes, edges, x)
    logger.info('contextual SBM: %d nodes, %d edges, p_in=%.4f p_out=%.4f',
                n_nodes, graph.n_edges, p_in, p_out)
    return graph, LabelMatrix.from_labels(labels, n_classes)


def edge_homophily(graph: Graph, labels: LabelMatrix) -> float:
    """Share of edges whose endpoints carry the same (known) label."""
    y = labels.labels
    if graph.n_edges == 0:
        return 0.0
    a, b = y[graph.edges[:, 0]], y[graph.edges[:, 1]]
    known = (a >= 0) & (b >= 0)
    if not known.any():
        return 0.0
    return float(np.mean(a[known] == b[known]))


def write_synthetic_dataset(path, train_frac: float = 0.6, val_frac: float = 0.2, **params) -> Path:
    """Generate a contextual SBM graph with a stratified split and save it as a dataset directory."""
    graph, labels = contextual_sbm(**params)
    split = random_split(labels, train_frac, val_frac, seed=params.get('seed', 0))
    return save_dataset(path, graph, labels, split)
