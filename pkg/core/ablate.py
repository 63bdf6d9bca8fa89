"""Run one or more ablation variants through `run`.

Usage: ablate DATASET [--variants full,no_topology,no_attribute,...] [run flags]

Each variant gets its own experiment directory; one path is printed per
variant, in the order given.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from typing import List

from core._common import add_experiment_arguments, config_from_namespace, guarded, require_dataset
from csf.experiment import cmd_run
from csf.trainer import VARIANTS
from utils.helpers import parse_list


def execute(args: List[str]) -> int:
    parser = argparse.ArgumentParser(prog='ablate', add_help=False)
    add_experiment_arguments(parser)
    parser.add_argument('--variants', default=','.join(VARIANTS[:5]),
                        help='comma-separated variants (default: all but mlp)')
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')

    ns = parser.parse_args(args)
    if ns.show_help:
        parser.print_help()
        return 0

    def go() -> int:
        require_dataset(ns)
        base = config_from_namespace(ns)
        for variant in parse_list(ns.variants, str):
            print(str(cmd_run(replace(base, variant=variant))))
        return 0

    return guarded('csf: ablate', go)
