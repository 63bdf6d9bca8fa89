"""Experiment harness: configuration, run/sweep/spectral/bench outputs and reproducibility."""

import json

import numpy as np
import pytest

from conftest import DATA, has_dataset
from csf.errors import ConfigError
from csf.experiment import (AGGREGATE_HEADER, ExperimentConfig, aggregate, build_kernels, cmd_nystrom_bench,
                            cmd_run, cmd_spectral, cmd_sweep, load_data, merge_config, reaggregate)
from csf.synthetic import write_synthetic_dataset
from csf.trainer import TrainReport
from utils.helpers import read_json, read_tsv


def toy_config(toy2_path, tmp_path, **kw):
    values = dict(dataset_path=str(toy2_path), depths=(1,), seeds=(0,), epochs=5, out_dir=str(tmp_path / 'out'))
    values.update(kw)
    return ExperimentConfig(**values)


def numeric_rows(path):
    _, rows = read_tsv(path)
    return [[float(v) for v in row] for row in rows]


def fake_report(seed, depth, test, val):
    return TrainReport([1.0], val, test, [0.0] * (depth + 1), seed, n_layers=depth)


class TestConfig:
    def test_defaults(self, toy2_path):
        cfg = ExperimentConfig(dataset_path=str(toy2_path))
        assert cfg.top_k == 20
        assert cfg.a3 == 1.0
        assert cfg.seeds == tuple(range(10))
        assert (cfg.train_frac, cfg.val_frac) == (0.6, 0.2)

    @pytest.mark.parametrize('kw', [{'variant': 'gat'}, {'a2': 'sometimes'}, {'a3': 0.0}, {'top_k': 0},
                                    {'seeds': ()}, {'depths': (0,)}, {'train_frac': 0.9, 'val_frac': 0.2},
                                    {'split': 'kfold'}, {'gamma_grid': ()}, {'seeds': (1, 2, 1)}, {'depths': (2, 2)},
                                    {'top_k': 'five'}])
    def test_rejects(self, toy2_path, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(dataset_path=str(toy2_path), **kw)

    def test_unknown_keys(self, toy2_path):
        with pytest.raises(ConfigError, match='unknown config keys: colour'):
            ExperimentConfig.from_mapping({'dataset_path': str(toy2_path), 'colour': 'red'})

    def test_full_top_k_in_config_file(self, toy2_path, tmp_path):
        path = tmp_path / 'cfg.json'
        path.write_text(json.dumps({'top_k': 'full'}), encoding='utf-8')
        assert merge_config({'dataset_path': str(toy2_path), 'top_k': 5}, str(path)).top_k is None

    def test_config_file_overrides_flags(self, toy2_path, tmp_path):
        path = tmp_path / 'cfg.json'
        path.write_text(json.dumps({'a3': 2.5, 'seeds': [3]}), encoding='utf-8')
        cfg = merge_config({'dataset_path': str(toy2_path), 'a3': 0.5, 'lr': 0.02}, str(path))
        assert cfg.a3 == 2.5
        assert cfg.seeds == (3,)
        assert cfg.lr == 0.02

    def test_bad_config_file(self, toy2_path, tmp_path):
        path = tmp_path / 'cfg.json'
        path.write_text('{\n  "a3": ,\n}', encoding='utf-8')
        with pytest.raises(ConfigError, match='cfg.json:2: invalid JSON'):
            merge_config({'dataset_path': str(toy2_path)}, str(path))
        with pytest.raises(ConfigError, match='not found'):
            merge_config({'dataset_path': str(toy2_path)}, str(tmp_path / 'missing.json'))

    def test_experiment_id_ignores_output_location(self, toy2_path, tmp_path):
        a = toy_config(toy2_path, tmp_path)
        b = toy_config(toy2_path, tmp_path / 'elsewhere')
        assert a.experiment_id == b.experiment_id
        assert a.experiment_id.startswith('toy2-full-')
        assert toy_config(toy2_path, tmp_path, a3=2.0).experiment_id != a.experiment_id


class TestDataAndKernels:
    def test_file_split(self, toy2_path, tmp_path):
        data = load_data(toy_config(toy2_path, tmp_path))
        assert data.split.train.tolist() == [0]

    def test_random_split(self, tmp_path):
        path = write_synthetic_dataset(tmp_path / 'csbm', n_nodes=30, n_classes=3, n_features=4, seed=1)
        cfg = ExperimentConfig(dataset_path=str(path), split='random', split_seed=4)
        data = load_data(cfg)
        assert data.split.source.startswith('random(')
        assert data.split.train.size == 18

    def test_top_k_capped(self, toy2_path, tmp_path):
        kernels = build_kernels(toy_config(toy2_path, tmp_path), load_data(toy_config(toy2_path, tmp_path)))
        assert kernels.k_knn.n == 2
        assert kernels.a2 == 100.0
        assert kernels.k_attr.psd_checked


class TestAggregate:
    def test_population_std(self):
        reports = {(2, 0): fake_report(0, 2, 0.5, 0.6), (2, 1): fake_report(1, 2, 1.0, 0.8)}
        [row] = aggregate(reports)
        assert row[:2] == (2, 2)
        assert row[2] == pytest.approx(0.75)
        assert row[3] == pytest.approx(0.25)
        assert row[4] == pytest.approx(0.7)


class TestRun:
    def test_toy_run_writes_one_report(self, toy2_path, tmp_path):
        out = cmd_run(toy_config(toy2_path, tmp_path))
        assert sorted(p.name for p in (out / 'runs').iterdir()) == ['depth1_seed0.json']
        header, rows = read_tsv(out / 'aggregate.tsv')
        assert tuple(header) == AGGREGATE_HEADER
        assert len(rows) == 1
        meta = read_json(out / 'config.json')
        assert meta['split']['train'] == [0]
        assert meta['experiment_id'] == out.name

    def test_rerun_is_byte_identical(self, toy2_path, tmp_path):
        cfg = toy_config(toy2_path, tmp_path, depths=(1, 2), seeds=(0, 1))
        first = (cmd_run(cfg) / 'aggregate.tsv').read_bytes()
        second = (cmd_run(cfg) / 'aggregate.tsv').read_bytes()
        assert first == second

    def test_reaggregate_matches_table(self, toy2_path, tmp_path):
        out = cmd_run(toy_config(toy2_path, tmp_path, depths=(1, 2), seeds=(0, 1)))
        expected = numeric_rows(out / 'aggregate.tsv')
        assert [list(map(float, row)) for row in reaggregate(out)] == expected

    def test_gamma_selection_writes_scores(self, toy2_path, tmp_path):
        out = cmd_run(toy_config(toy2_path, tmp_path, gamma_grid=(0.0, 0.5)))
        header, rows = read_tsv(out / 'gamma_scores.tsv')
        assert header == ['gamma', 'val_accuracy', 'seed']
        assert [float(r[0]) for r in rows] == [0.0, 0.5]
        assert read_json(out / 'config.json')['gamma'] in (0.0, 0.5)

    def test_ablation_variant_runs(self, toy2_path, tmp_path):
        out = cmd_run(toy_config(toy2_path, tmp_path, variant='no_attribute'))
        assert out.name.startswith('toy2-no_attribute-')


class TestSweep:
    def test_singleton_matches_run(self, toy2_path, tmp_path):
        cfg = toy_config(toy2_path, tmp_path)
        run_rows = numeric_rows(cmd_run(cfg) / 'aggregate.tsv')
        sweep_rows = numeric_rows(cmd_sweep('a3', cfg, [1.0]))
        assert sweep_rows[0][1:] == run_rows[0][1:]

    def test_full_top_k_label(self, toy2_path, tmp_path):
        path = cmd_sweep('knn_topk', toy_config(toy2_path, tmp_path), ['full', 1])
        header, rows = read_tsv(path)
        assert header[0] == 'knn_topk'
        assert [r[0] for r in rows] == ['full', '1']

    def test_unknown_kind_and_empty_grid(self, toy2_path, tmp_path):
        cfg = toy_config(toy2_path, tmp_path)
        with pytest.raises(ConfigError):
            cmd_sweep('dropout', cfg, [0.1])
        with pytest.raises(ConfigError):
            cmd_sweep('a2', cfg, [])


class TestSpectral:
    def test_attr_profile_rows(self, toy2_path, tmp_path):
        cfg = toy_config(toy2_path, tmp_path, a2=1.0, a3=1.0)
        paths = cmd_spectral(cfg, ['attr'], lambdas=[1.0, 0.0])
        np.testing.assert_allclose(numeric_rows(paths[0]), [[0.0, 0.5], [1.0, 2 / 3]], rtol=1e-15)

    def test_gcn_profile_is_affine(self, toy2_path, tmp_path):
        paths = cmd_spectral(toy_config(toy2_path, tmp_path), ['gcn'])
        values = np.array(numeric_rows(paths[0]))[:, 1]
        d = np.diff(values)
        assert np.all(d < 0)
        np.testing.assert_allclose(d, d[0])

    def test_fused_passes_more_high_frequency(self, toy2_path, tmp_path):
        paths = cmd_spectral(toy_config(toy2_path, tmp_path), ['attr'])
        header, rows = read_tsv(paths[-1])
        assert header == ['index', 'eigenvalue', 'k_top', 'k_knn', 'k_attr', 'fused']
        top = dict(zip(header, map(float, rows[-1])))
        assert top['fused'] > top['k_top']

    def test_unknown_filter(self, toy2_path, tmp_path):
        with pytest.raises(ConfigError, match='unknown filter'):
            cmd_spectral(toy_config(toy2_path, tmp_path), ['chebyshev'])


class TestNystromBench:
    def test_full_sample_row_is_exact(self, toy2_path, tmp_path):
        path = cmd_nystrom_bench(toy_config(toy2_path, tmp_path), [1, 2])
        header, rows = read_tsv(path)
        assert header == ['m', 'rank_k', 'frobenius_error', 'wall_ms', 'accuracy']
        assert [int(r[0]) for r in rows] == [1, 2]
        assert float(rows[1][2]) <= 1e-6
        meta = read_json(path.parent / 'config.json')
        assert 'exact_wall_ms' in meta

    def test_empty_grid(self, toy2_path, tmp_path):
        with pytest.raises(ConfigError):
            cmd_nystrom_bench(toy_config(toy2_path, tmp_path), [])


@pytest.fixture(scope='module')
def webkb_sized(tmp_path_factory):
    """A disassortative graph the size of Texas: 183 nodes, 5 classes, homophily 0.1."""
    return write_synthetic_dataset(tmp_path_factory.mktemp('csbm') / 'csbm183', n_nodes=183, n_classes=5,
                                   homophily=0.1, seed=0)


class TestDeskScale:
    def test_deep_model_keeps_accuracy(self, webkb_sized, tmp_path):
        cfg = ExperimentConfig(dataset_path=str(webkb_sized), depths=(2, 20), seeds=(0, 1, 2),
                               out_dir=str(tmp_path))
        rows = {int(r[0]): r for r in numeric_rows(cmd_run(cfg) / 'aggregate.tsv')}
        assert rows[2][2] >= 0.80
        assert abs(rows[20][2] - rows[2][2]) <= 0.05

    def test_knn_sparsity_barely_matters(self, webkb_sized, tmp_path):
        cfg = ExperimentConfig(dataset_path=str(webkb_sized), seeds=(0, 1, 2, 3, 4), out_dir=str(tmp_path))
        acc = [row[2] for row in numeric_rows(cmd_sweep('knn_topk', cfg, [5, 10, 20, 50]))]
        assert len(acc) == 4
        assert max(acc) - min(acc) <= 0.05

    def test_disassortative_graph_prefers_large_a2(self, webkb_sized, tmp_path):
        cfg = ExperimentConfig(dataset_path=str(webkb_sized), seeds=(0, 1, 2), out_dir=str(tmp_path))
        acc = {row[0]: row[2] for row in numeric_rows(cmd_sweep('a2', cfg, [0.1, 1.0, 10.0, 100.0]))}
        assert acc[100.0] >= acc[0.1]


@pytest.mark.slow
def test_nystrom_bench_time_grows_with_m(tmp_path):
    path = write_synthetic_dataset(tmp_path / 'csbm2000', n_nodes=2000, n_classes=5, homophily=0.5, seed=0)
    cfg = ExperimentConfig(dataset_path=str(path), depths=(1,), seeds=(0,), epochs=1, out_dir=str(tmp_path / 'out'))
    table = cmd_nystrom_bench(cfg, [200, 1000, 2000])
    wall = [row[3] for row in numeric_rows(table)]
    assert wall[0] < wall[1] < wall[2]
    assert 2 * wall[0] <= wall[2]
    assert read_json(table.parent / 'config.json')['exact_wall_ms'] >= 2 * wall[0]


@pytest.mark.slow
@pytest.mark.parametrize('name', ['texas', 'cornell', 'wisconsin'])
def test_webkb_desk_scale(name, tmp_path):
    if not has_dataset(name):
        pytest.skip(f'data/{name} not present')
    cfg = ExperimentConfig(dataset_path=str(DATA / name), depths=(2, 20), out_dir=str(tmp_path))
    rows = {int(r[0]): r for r in numeric_rows(cmd_run(cfg) / 'aggregate.tsv')}
    assert rows[2][2] >= 0.80
    assert abs(rows[20][2] - rows[2][2]) <= 0.05
