"""Sweep one hyperparameter and write one aggregate row per value.

Usage: sweep KIND DATASET --grid V1,V2,... [run flags]

KIND is one of knn_topk, a2, a3, lr, gamma. knn_topk accepts `full`
(fully connected attribute kernel). lr defaults to the tuning grid when
--grid is omitted.
"""

from __future__ import annotations

import argparse
from typing import List

from core._common import add_experiment_arguments, config_from_namespace, guarded, require_dataset
from csf.experiment import SWEEP_KINDS, cmd_sweep
from utils.helpers import parse_list


def execute(args: List[str]) -> int:
    parser = argparse.ArgumentParser(prog='sweep', add_help=False)
    parser.add_argument('kind', nargs='?', help=', '.join(SWEEP_KINDS))
    add_experiment_arguments(parser)
    parser.add_argument('--grid', help='comma-separated values')
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')

    ns = parser.parse_args(args)
    if ns.show_help or ns.kind is None:
        parser.print_help()
        return 0 if ns.show_help else 2

    def go() -> int:
        require_dataset(ns)
        cfg = config_from_namespace(ns)
        grid = parse_list(ns.grid, str)
        if grid is None and ns.kind == 'lr':
            grid = [str(v) for v in cfg.lr_grid]
        print(str(cmd_sweep(ns.kind, cfg, grid or [])))
        return 0

    return guarded('csf: sweep', go)
