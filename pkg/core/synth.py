"""Generate a synthetic contextual SBM dataset directory.

Usage: synth OUT_DIR [--nodes 183] [--classes 5] [--features 32]
                     [--homophily 0.1] [--degree 4] [--sep 1.0] [--noise 1.0]
                     [--seed 0] [--train-frac 0.6] [--val-frac 0.2]
"""

from __future__ import annotations

import argparse
from typing import List

from core._common import guarded
from csf.synthetic import write_synthetic_dataset


def execute(args: List[str]) -> int:
    parser = argparse.ArgumentParser(prog='synth', add_help=False)
    parser.add_argument('out', nargs='?', help='dataset directory to create')
    parser.add_argument('--nodes', type=int, default=183)
    parser.add_argument('--classes', type=int, default=5)
    parser.add_argument('--features', type=int, default=32)
    parser.add_argument('--homophily', type=float, default=0.1, help='share of in-class edges')
    parser.add_argument('--degree', type=float, default=4.0, help='expected average degree')
    parser.add_argument('--sep', type=float, default=1.0, help='scale of the class means')
    parser.add_argument('--noise', type=float, default=1.0, help='per-node attribute noise')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--train-frac', type=float, default=0.6)
    parser.add_argument('--val-frac', type=float, default=0.2)
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')

    ns = parser.parse_args(args)
    if ns.show_help or ns.out is None:
        parser.print_help()
        return 0 if ns.show_help else 2

    def go() -> int:
        path = write_synthetic_dataset(ns.out, train_frac=ns.train_frac, val_frac=ns.val_frac,
                                       n_nodes=ns.nodes, n_classes=ns.classes, n_features=ns.features,
                                       homophily=ns.homophily, avg_degree=ns.degree, feature_sep=ns.sep,
                                       feature_noise=ns.noise, seed=ns.seed)
        print(str(path))
        return 0

    return guarded('csf: synth', go)
