"""Train the CSF model on a dataset over every (depth, seed) cell.

Usage: run DATASET [--depths 2,5,10,20] [--seed-list 0,1,2] [--a2 100|auto]
           [--variant full] [--config FILE] [--out DIR] ...

Writes <out>/<experiment-id>/{config.json, runs/*.json, aggregate.tsv}
and prints the experiment directory.
"""

from __future__ import annotations

import argparse
from typing import List

from core._common import add_experiment_arguments, config_from_namespace, guarded, require_dataset
from csf.experiment import cmd_run


def execute(args: List[str]) -> int:
    parser = argparse.ArgumentParser(prog='run', add_help=False)
    add_experiment_arguments(parser)
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')

    ns = parser.parse_args(args)
    if ns.show_help:
        parser.print_help()
        return 0

    def go() -> int:
        require_dataset(ns)
        out = cmd_run(config_from_namespace(ns))
        print(str(out))
        return 0

    return guarded('csf: run', go)
