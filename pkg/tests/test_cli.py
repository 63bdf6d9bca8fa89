"""The `csf` dispatcher, its subcommands and the docs generator."""

import importlib.util
from pathlib import Path

import pytest

from conftest import ROOT
from csf import __version__
from main import main
from utils.helpers import list_core_commands, read_tsv

COMMANDS = ['ablate', 'nystrom-bench', 'run', 'spectral', 'sweep', 'synth']


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


class TestDispatcher:
    def test_version(self, capsys):
        assert main(['--version']) == 0
        assert capsys.readouterr().out.strip() == __version__

    def test_list_commands(self, capsys):
        assert list_core_commands() == COMMANDS
        assert main(['--list-commands']) == 0
        assert capsys.readouterr().out.split() == COMMANDS

    def test_unknown_command(self, capsys):
        assert main(['frobnicate']) == 127
        assert 'frobnicate: command not found' in capsys.readouterr().err

    def test_no_command(self, capsys):
        assert main([]) == 2
        assert main(['-h']) == 0

    @pytest.mark.parametrize('cmd', COMMANDS)
    def test_command_help(self, cmd, capsys):
        assert main([cmd, '--help']) == 0
        assert 'usage:' in capsys.readouterr().out


class TestCommands:
    def test_run_on_toy(self, toy2_path, tmp_path, capsys):
        rc = main(['-q', 'run', str(toy2_path), '--depths', '1', '--seed-list', '0', '--epochs', '3',
                   '--out', str(tmp_path)])
        assert rc == 0
        out = Path(last_line(capsys))
        assert out.parent == tmp_path
        assert (out / 'runs' / 'depth1_seed0.json').is_file()

    def test_run_without_dataset(self, capsys):
        assert main(['run']) == 1
        assert 'csf: run: a dataset directory or --config is required' in capsys.readouterr().err

    def test_bad_dataset_reports_error(self, tmp_path, capsys):
        assert main(['-q', 'run', str(tmp_path / 'nowhere'), '--out', str(tmp_path)]) == 1
        assert capsys.readouterr().err.startswith('csf: run: ')

    def test_config_file_overrides_flag(self, toy2_path, tmp_path, capsys):
        cfg = tmp_path / 'cfg.json'
        cfg.write_text('{"epochs": 2, "seeds": [1]}', encoding='utf-8')
        rc = main(['-q', 'run', str(toy2_path), '--depths', '1', '--seed-list', '0', '--epochs', '9',
                   '--config', str(cfg), '--out', str(tmp_path)])
        assert rc == 0
        out = Path(last_line(capsys))
        assert (out / 'runs' / 'depth1_seed1.json').is_file()

    def test_ablate_prints_one_directory_per_variant(self, toy2_path, tmp_path, capsys):
        rc = main(['-q', 'ablate', str(toy2_path), '--variants', 'full,no_attribute', '--depths', '1',
                   '--seed-list', '0', '--epochs', '2', '--out', str(tmp_path)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert [Path(p).name.split('-')[1] for p in lines] == ['full', 'no_attribute']

    def test_sweep(self, toy2_path, tmp_path, capsys):
        rc = main(['-q', 'sweep', 'a2', str(toy2_path), '--grid', '0.1,100', '--depths', '1', '--seed-list', '0',
                   '--epochs', '2', '--out', str(tmp_path)])
        assert rc == 0
        header, rows = read_tsv(last_line(capsys))
        assert header[0] == 'a2'
        assert len(rows) == 2

    def test_spectral(self, toy2_path, tmp_path, capsys):
        rc = main(['-q', 'spectral', str(toy2_path), '--filters', 'attr,lp', '--lambdas', '0,1',
                   '--out', str(tmp_path)])
        assert rc == 0
        names = [Path(p).name for p in capsys.readouterr().out.split()]
        assert names == ['shrinkage_attr.tsv', 'shrinkage_lp.tsv', 'frequency_response.tsv']

    def test_nystrom_bench(self, toy2_path, tmp_path, capsys):
        rc = main(['-q', 'nystrom-bench', str(toy2_path), '--m-grid', '2', '--seed-list', '0', '--depths', '1',
                   '--epochs', '2', '--out', str(tmp_path)])
        assert rc == 0
        _, rows = read_tsv(last_line(capsys))
        assert float(rows[0][2]) <= 1e-6

    def test_synth_then_run(self, tmp_path, capsys):
        data = tmp_path / 'csbm'
        assert main(['synth', str(data), '--nodes', '30', '--classes', '3', '--features', '4']) == 0
        assert Path(last_line(capsys)) == data
        rc = main(['-q', 'run', str(data), '--depths', '2', '--seed-list', '0', '--epochs', '3',
                   '--top-k', '5', '--out', str(tmp_path / 'out')])
        assert rc == 0

    def test_invalid_flag_value(self, toy2_path, tmp_path, capsys):
        assert main(['-q', 'run', str(toy2_path), '--variant', 'gat', '--out', str(tmp_path)]) == 1
        assert 'unknown variant' in capsys.readouterr().err


def test_generate_docs(tmp_path, capsys):
    spec = importlib.util.spec_from_file_location('generate_docs', ROOT / 'scripts' / 'generate_docs.py')
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    assert module.generate(tmp_path) == 0
    assert sorted(p.stem for p in (tmp_path / 'commands').glob('*.md')) == COMMANDS
    index = (tmp_path / 'index.md').read_text(encoding='utf-8')
    assert '## Experiments' in index
    assert '[nystrom-bench](commands/nystrom-bench.md)' in index
