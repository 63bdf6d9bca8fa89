"""Flags shared by the experiment commands.

Every `ExperimentConfig` field has a `--kebab-case` flag. Flags default to
None so that unset values fall back to the config file or the dataclass
defaults; a file given with `--config` overrides the flags.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Callable, List

from csf.errors import ConfigError, CSFError
from csf.experiment import ExperimentConfig, merge_config
from csf.graph import load_dataset
from csf.nystrom import NystromOptions
from utils.helpers import parse_list


def _top_k(text: str):
    return 'full' if text.lower() == 'full' else int(text)


def _a2(text: str):
    return 'auto' if text.lower() == 'auto' else float(text)


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('dataset_path', nargs='?', help='dataset directory')
    parser.add_argument('--config', help='JSON file with ExperimentConfig fields (overrides flags)')
    parser.add_argument('--variant', help='full, no_topology, no_attribute, lowpass_attribute, '
                                          'only_lowpass_attribute or mlp')
    parser.add_argument('--a2', type=_a2, help="attribute shrinkage strength, or 'auto'")
    parser.add_argument('--a3', type=float, help='ridge penalty inside Gamma')
    parser.add_argument('--gamma', type=float, help='fusion weight of the squared difference')
    parser.add_argument('--gamma-grid', help='comma-separated gamma values to select from')
    parser.add_argument('--top-k', type=_top_k, help="KNN neighbours, or 'full'")
    parser.add_argument('--depths', help='comma-separated layer counts')
    parser.add_argument('--lr', type=float, help='Adam learning rate')
    parser.add_argument('--seed-list', help='comma-separated seeds')
    parser.add_argument('--split', help='auto, from_file or random')
    parser.add_argument('--train-frac', type=float)
    parser.add_argument('--val-frac', type=float)
    parser.add_argument('--split-seed', type=int)
    parser.add_argument('--nystrom-m', type=int, help='Nystrom sample size (off when unset)')
    parser.add_argument('--nystrom-rank', type=int, help='Nystrom rank truncation (default m)')
    parser.add_argument('--nystrom-mode', help='final or gamma')
    parser.add_argument('--nystrom-frac', type=float, help='set m = rank = frac * N (e.g. 0.001)')
    parser.add_argument('--psd-policy', help='strict or project')
    parser.add_argument('--hidden-dim', type=int)
    parser.add_argument('--dropout', type=float)
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--activation', help='relu or identity')
    parser.add_argument('--no-concat-x', action='store_true', help='do not concatenate X after each layer')
    parser.add_argument('--out', dest='out_dir', help='output root (default $CSF_OUT or ./out)')


def config_from_namespace(ns: argparse.Namespace) -> ExperimentConfig:
    flags = {
        'dataset_path': ns.dataset_path,
        'variant': ns.variant,
        'a2': ns.a2,
        'a3': ns.a3,
        'gamma': ns.gamma,
        'gamma_grid': parse_list(ns.gamma_grid, float),
        'top_k': ns.top_k,
        'depths': parse_list(ns.depths, int),
        'lr': ns.lr,
        'seeds': parse_list(ns.seed_list, int),
        'split': ns.split,
        'train_frac': ns.train_frac,
        'val_frac': ns.val_frac,
        'split_seed': ns.split_seed,
        'nystrom_m': ns.nystrom_m,
        'nystrom_rank': ns.nystrom_rank,
        'nystrom_mode': ns.nystrom_mode,
        'psd_policy': ns.psd_policy,
        'hidden_dim': ns.hidden_dim,
        'dropout': ns.dropout,
        'epochs': ns.epochs,
        'activation': ns.activation,
        'concat_x': False if ns.no_concat_x else None,
        'out_dir': ns.out_dir,
    }
    values = {k: v for k, v in flags.items() if v is not None}
    if values.get('top_k') == 'full':
        values['top_k'] = None
    cfg = merge_config(values, ns.config)
    if ns.nystrom_frac is not None:
        n = load_dataset(cfg.dataset_path, require_splits=False).graph.n_nodes
        preset = NystromOptions.fraction(n, ns.nystrom_frac)
        cfg = replace(cfg, nystrom_m=preset.m, nystrom_rank=preset.rank_k)
    return cfg


def guarded(prog: str, fn: Callable[[], int]) -> int:
    """Run `fn`; expected library errors become `prog: message` and exit code 1."""
    try:
        return fn()
    except CSFError as e:
        print(f"{prog}: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"{prog}: invalid value: {e}", file=sys.stderr)
        return 2


def require_dataset(ns: argparse.Namespace) -> None:
    if ns.dataset_path is None and ns.config is None:
        raise ConfigError('a dataset directory or --config is required')


def print_paths(paths: List) -> None:
    for p in paths:
        print(str(p))
