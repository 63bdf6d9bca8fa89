"""Graph data model, dataset directories and Laplacians."""

import json
from itertools import combinations

import numpy as np
import pytest

from conftest import DATA, has_dataset, path_graph
from csf.errors import DatasetError, GraphError, ParameterError
from csf.graph import (Graph, LabelMatrix, SplitSpec, degree_info, label_assortativity, load_dataset,
                       normalized_laplacian, random_split, representation_diversity, save_dataset, suggest_a2)


def write_dataset(root, features, edges, labels, splits=None):
    root.mkdir(parents=True, exist_ok=True)
    (root / 'features.tsv').write_text(features, encoding='utf-8')
    (root / 'edges.tsv').write_text(edges, encoding='utf-8')
    (root / 'labels.tsv').write_text(labels, encoding='utf-8')
    if splits is not None:
        (root / 'splits.json').write_text(json.dumps(splits), encoding='utf-8')
    return root


class TestGraph:
    def test_edges_are_stored_once_with_i_lt_j(self):
        g = Graph(3, [(2, 0), (1, 2)], np.zeros((3, 1)))
        assert g.edges.tolist() == [[0, 2], [1, 2]]
        assert g.n_edges == 2

    def test_rejects_self_loop_and_duplicates(self):
        with pytest.raises(GraphError, match='self-loop'):
            Graph(2, [(1, 1)], np.zeros((2, 1)))
        with pytest.raises(GraphError, match='duplicate'):
            Graph(2, [(0, 1), (1, 0)], np.zeros((2, 1)))

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError, match='out of range'):
            Graph(3, [(0, 5)], np.zeros((3, 1)))

    def test_arrays_are_read_only(self):
        g = path_graph(3)
        with pytest.raises(ValueError):
            g.attributes[0, 0] = 5.0

    def test_permute_relabels_edges_and_rows(self):
        g = Graph(3, [(0, 1)], np.arange(3.0)[:, None])
        p = g.permute(np.array([2, 0, 1]))
        assert p.attributes[:, 0].tolist() == [2.0, 0.0, 1.0]
        assert p.edges.tolist() == [[1, 2]]

    def test_to_networkx(self):
        nxg = path_graph(4).to_networkx()
        assert nxg.number_of_nodes() == 4
        assert nxg.number_of_edges() == 3


class TestLabelMatrix:
    def test_from_labels_unknown_rows_are_zero(self):
        y = LabelMatrix.from_labels([0, -1, 2])
        assert y.n_classes == 3
        assert y.onehot[1].tolist() == [0.0, 0.0, 0.0]
        assert y.labels.tolist() == [0, -1, 2]
        assert y.labeled_index.tolist() == [0, 2]

    def test_restrict_keeps_only_index(self):
        y = LabelMatrix.from_labels([0, 1, 1]).restrict([1])
        assert y.labeled_mask.tolist() == [False, True, False]
        assert y.onehot.sum() == 1.0

    def test_invalid_rows_rejected(self):
        with pytest.raises(ParameterError):
            LabelMatrix(np.array([[1.0, 1.0]]), np.array([True]))


class TestSplitSpec:
    def test_disjoint(self):
        with pytest.raises(ParameterError, match='disjoint'):
            SplitSpec([0, 1], [1], [])

    def test_unlabeled_train_node_rejected(self):
        labels = LabelMatrix.from_labels([0, -1])
        with pytest.raises(ParameterError, match='unlabeled'):
            SplitSpec([1], [], []).validate(labels)


class TestLoadDataset:
    def test_bundled_toy(self, toy2_path):
        data = load_dataset(toy2_path)
        assert data.graph.n_nodes == 2
        assert data.graph.n_edges == 1
        assert data.graph.n_features == 2
        assert data.split.train.tolist() == [0]

    def test_edge_out_of_range_names_file_and_line(self, tmp_path):
        root = write_dataset(tmp_path / 'd', '1\n2\n3\n', '0\t1\n0\t5\n', '0\n1\n0\n',
                             {'train': [0], 'val': [], 'test': []})
        with pytest.raises(DatasetError, match='node index out of range') as exc:
            load_dataset(root)
        assert exc.value.line == 2
        assert exc.value.path.endswith('edges.tsv')

    def test_ragged_features(self, tmp_path):
        root = write_dataset(tmp_path / 'd', '1\t2\n3\n', '', '0\n0\n', {'train': [0], 'val': [], 'test': []})
        with pytest.raises(DatasetError, match='ragged') as exc:
            load_dataset(root)
        assert exc.value.line == 2

    def test_duplicate_edge(self, tmp_path):
        root = write_dataset(tmp_path / 'd', '1\n2\n', '0\t1\n1\t0\n', '0\n0\n', {'train': [0], 'val': [], 'test': []})
        with pytest.raises(DatasetError, match='duplicate edge'):
            load_dataset(root)

    def test_missing_file(self, tmp_path):
        root = write_dataset(tmp_path / 'd', '1\n2\n', '0\t1\n', '0\n0\n')
        with pytest.raises(DatasetError, match='missing file'):
            load_dataset(root)
        assert load_dataset(root, require_splits=False).split.source == 'none'

    def test_save_then_load(self, tmp_path, rng):
        g = Graph(4, [(0, 1), (2, 3)], rng.standard_normal((4, 3)))
        y = LabelMatrix.from_labels([0, 1, -1, 1])
        save_dataset(tmp_path / 'd', g, y, SplitSpec([0, 1], [3], []))
        data = load_dataset(tmp_path / 'd')
        np.testing.assert_array_equal(data.graph.attributes, g.attributes)
        assert data.labels.labels.tolist() == [0, 1, -1, 1]
        assert data.split.val.tolist() == [3]

    def test_isolated_node_needs_self_loops(self, tmp_path):
        root = write_dataset(tmp_path / 'd', '1\n2\n3\n', '0\t1\n', '0\n1\n0\n', {'train': [0], 'val': [], 'test': []})
        with pytest.raises(DatasetError, match='isolated') as exc:
            load_dataset(root, self_loops=False)
        assert exc.value.path.endswith('edges.tsv')
        assert load_dataset(root).graph.isolated_nodes().tolist() == [2]

    @pytest.mark.skipif(not has_dataset('texas'), reason='data/texas not present')
    def test_texas_export(self):
        data = load_dataset(DATA / "texas")
        assert data.graph.n_nodes == 183


class TestNormalizedLaplacian:
    def test_two_nodes(self):
        g = path_graph(2)
        np.testing.assert_allclose(normalized_laplacian(g), [[1, -1], [-1, 1]], atol=1e-15)
        np.testing.assert_allclose(normalized_laplacian(g, with_self_loops=True),
                                   [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)

    def test_isolated_node(self):
        g = Graph(3, [(0, 1)], np.zeros((3, 1)))
        with pytest.raises(GraphError, match='zero degree'):
            normalized_laplacian(g)
        normalized_laplacian(g, with_self_loops=True)

    def test_spectrum_in_0_2(self, rng):
        edges = [(i, i + 1) for i in range(9)] + [(a, b) for a, b in combinations(range(10), 2)
                                                  if b > a + 1 and rng.random() < 0.3]
        g = Graph(10, edges, np.zeros((10, 1)))
        for loops in (False, True):
            w = np.linalg.eigvalsh(normalized_laplacian(g, with_self_loops=loops))
            assert w.min() >= -1e-12
            assert w.max() <= 2 + 1e-12

    def test_degree_info(self):
        info = degree_info(path_graph(3))
        assert info.degrees.tolist() == [1.0, 2.0, 1.0]
        assert info.avg_degree == pytest.approx(4 / 3)


class TestRepresentationDiversity:
    def test_identical_rows(self):
        assert representation_diversity(np.tile([[1.0, 2.0]], (4, 1))) == pytest.approx(0.0, abs=1e-15)

    def test_orthonormal_rows(self):
        assert representation_diversity(np.eye(2)) == pytest.approx(np.sqrt(2))

    def test_matches_pair_loop(self, rng):
        h = rng.standard_normal((5, 3))
        u = h / np.linalg.norm(h, axis=1, keepdims=True)
        pairs = [np.linalg.norm(u[i] - u[j]) for i, j in combinations(range(5), 2)]
        assert representation_diversity(h) == pytest.approx(np.mean(pairs), rel=1e-12)

    def test_scale_invariant_rows(self, rng):
        h = rng.standard_normal((6, 2))
        scaled = h * rng.uniform(0.5, 3.0, size=(6, 1))
        assert representation_diversity(scaled) == pytest.approx(representation_diversity(h))

    def test_common_rotation_invariant(self, rng):
        h = rng.standard_normal((8, 4))
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        assert representation_diversity(h @ q) == pytest.approx(representation_diversity(h), abs=1e-10)


class TestSplitsAndAssortativity:
    def test_random_split_is_stratified_and_deterministic(self):
        labels = LabelMatrix.from_labels(np.repeat([0, 1], 10))
        a = random_split(labels, 0.6, 0.2, seed=3)
        b = random_split(labels, 0.6, 0.2, seed=3)
        assert a.train.tolist() == b.train.tolist()
        assert (a.train.size, a.val.size, a.test.size) == (12, 4, 4)
        assert np.sum(labels.labels[a.train] == 0) == 6

    def test_assortativity_sign(self):
        x = np.zeros((4, 1))
        same = Graph(4, [(0, 1), (2, 3)], x)
        cross = Graph(4, [(0, 2), (1, 3), (0, 3), (1, 2)], x)
        labels = LabelMatrix.from_labels([0, 0, 1, 1])
        assert label_assortativity(same, labels) > 0
        assert label_assortativity(cross, labels) < 0
        assert suggest_a2(label_assortativity(same, labels)) == 0.1
        assert suggest_a2(label_assortativity(cross, labels)) == 100.0
