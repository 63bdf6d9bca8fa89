"""Shared fixtures: seeded generators, random kernels and small graphs."""

import logging
from pathlib import Path

import numpy as np
import pytest

from csf.graph import Graph, LabelMatrix, SplitSpec
from csf.kernels import assert_psd

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / 'data'


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank))
    return scale * (a @ a.T) / rank


def random_kernel(rng, n, rank=None):
    return assert_psd(random_psd(rng, n, rank))


def path_graph(n, x=None):
    edges = [(i, i + 1) for i in range(n - 1)]
    if x is None:
        x = np.eye(n)
    return Graph(n, edges, x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy2():
    """The bundled two-node dataset: one edge, one training node."""
    g = Graph(2, [(0, 1)], np.array([[1.0, 0.0], [0.0, 1.0]]))
    labels = LabelMatrix.from_labels([0, 1])
    split = SplitSpec([0], [1], [])
    return g, labels, split


@pytest.fixture
def toy2_path():
    return DATA / 'toy2'


@pytest.fixture
def separable10(rng):
    """10 nodes, 2 linearly separable classes, a ring graph."""
    labels = np.array([0] * 5 + [1] * 5)
    x = np.where(labels[:, None] == 0, 1.0, -1.0) * np.array([[1.0, 0.5]]) + 0.1 * rng.standard_normal((10, 2))
    edges = [(i, (i + 1) % 10) for i in range(10)]
    g = Graph(10, edges, x)
    split = SplitSpec([0, 1, 2, 3, 5, 6, 7, 8], [4, 9], [])
    return g, LabelMatrix.from_labels(labels), split


@pytest.fixture
def small_task(rng):
    """12-node graph with 3 classes, for gradient checks."""
    n = 12
    labels = np.arange(n) % 3
    x = rng.standard_normal((n, 4)) + labels[:, None]
    edges = [(i, (i + 1) % n) for i in range(n)] + [(i, (i + 5) % n) for i in range(0, n, 2)]
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
    g = Graph(n, edges, x)
    split = SplitSpec([0, 1, 2, 3, 4, 5], [6, 7, 8], [9, 10, 11])
    return g, LabelMatrix.from_labels(labels), split


def has_dataset(name):
    return (DATA / name / 'features.tsv').is_file()


@pytest.fixture(autouse=True)
def reset_csf_logger():
    """main() installs a stderr handler bound to the captured stream of one test."""
    yield
    log = logging.getLogger('csf')
    for h in list(log.handlers):
        log.removeHandler(h)
    log.setLevel(logging.NOTSET)
    log.propagate = True
