"""Top-level CLI entrypoint for csf.

A small dispatcher that handles global flags and forwards subcommands to
`core.<command>.execute(args)`. Dashes in a command name map to
underscores (`csf nystrom-bench` runs `core.nystrom_bench`).
"""
from __future__ import annotations

import argparse
import importlib
import sys
from typing import List

from utils.helpers import command_module_name
from utils.helpers import list_core_commands as _list_commands
from utils.helpers import setup_logging


def _run_subcommand(cmd: str, args: List[str]) -> int:
    # imported command modules are cached across calls
    if not hasattr(_run_subcommand, '_module_cache'):
        _run_subcommand._module_cache = {}
    cache = _run_subcommand._module_cache

    name = command_module_name(cmd)
    try:
        module = cache.get(name)
        if module is None:
            module = importlib.import_module(f'core.{name}')
            cache[name] = module
    except ModuleNotFoundError as e:
        if e.name not in (f'core.{name}', 'core'):
            print(f"csf: error loading command '{cmd}': {e}", file=sys.stderr)
            return 1
        print(f"csf: {cmd}: command not found", file=sys.stderr)
        return 127
    except Exception as e:
        print(f"csf: error loading command '{cmd}': {e}", file=sys.stderr)
        return 1

    if not hasattr(module, 'execute'):
        print(f"csf: {cmd}: no execute(args) function in module", file=sys.stderr)
        return 1

    try:
        rc = module.execute(args)
        return int(rc) if isinstance(rc, int) else 0
    except SystemExit as se:
        return int(se.code) if isinstance(se.code, int) else 0
    except Exception as e:
        print(f"csf: {cmd}: runtime error: {e}", file=sys.stderr)
        return 1


def main(argv: List[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog='csf', add_help=False)
    parser.add_argument('--version', action='store_true', help='print version')
    parser.add_argument('--list-commands', action='store_true', help='list available commands in core/')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='more log output (-vv for debug)')
    parser.add_argument('-q', '--quiet', action='store_true', help='only log errors')
    parser.add_argument('-h', '--help', action='store_true', dest='show_help')
    parser.add_argument('cmd', nargs='?', help='command to run')
    parser.add_argument('args', nargs=argparse.REMAINDER, help='arguments for the command')

    ns = parser.parse_args(argv)
    setup_logging(-1 if ns.quiet else ns.verbose)

    if ns.version:
        try:
            pkg = importlib.import_module('csf')
            print(getattr(pkg, '__version__', '0.0.0'))
        except Exception:
            print('0.0.0')
        return 0

    if ns.list_commands:
        for c in _list_commands():
            print(f"  {c}")
        return 0

    if ns.cmd:
        return _run_subcommand(ns.cmd, ns.args)

    parser.print_help()
    print('\ncommands: ' + ', '.join(_list_commands()))
    return 0 if ns.show_help else 2


if __name__ == '__main__':
    sys.exit(main())
