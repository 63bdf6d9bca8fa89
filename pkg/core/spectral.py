"""Write filter shrinkage profiles and per-frequency kernel gains.

Usage: spectral DATASET [--filters attr,gcn,sgc,lp,krr] [--signals 0,10,182]
                [--lambdas 0,0.5,1] [run flags]

One shrinkage_<filter>.tsv per filter (lambda, value) plus
frequency_response.tsv with the Rayleigh gain of k_top, k_knn, k_attr and
the fused kernel on the selected graph-Fourier basis vectors.
"""

from __future__ import annotations

import argparse
from typing import List

from core._common import add_experiment_arguments, config_from_namespace, guarded, print_paths, require_dataset
from csf.experiment import cmd_spectral
from utils.helpers import parse_list


def execute(args: List[str]) -> int:
    parser = argparse.ArgumentParser(prog='spectral', add_help=False)
    add_experiment_arguments(parser)
    parser.add_argument('--filters', default='attr,gcn', help='comma-separated filter names')
    parser.add_argument('--signals', help='comma-separated basis indices (default: 5 spread over the spectrum)')
    parser.add_argument('--lambdas', help='comma-separated eigenvalues for the shrinkage tables')
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')

    ns = parser.parse_args(args)
    if ns.show_help:
        parser.print_help()
        return 0

    def go() -> int:
        require_dataset(ns)
        paths = cmd_spectral(config_from_namespace(ns), parse_list(ns.filters, str),
                             parse_list(ns.signals, int), parse_list(ns.lambdas, float))
        print_paths(paths)
        return 0

    return guarded('csf: spectral', go)
