"""Helper utilities for the csf command line.

Small IO and environment helpers shared by the command modules and the
library. Keep this file free of numerical code.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

FLOAT_FORMAT = '%.17g'


def list_core_commands() -> List[str]:
    """Return a sorted list of available command names in `core/`.

    Module names with underscores are reported with dashes, the way they
    are typed on the command line (`nystrom_bench` -> `nystrom-bench`).
    """
    utils_dir = os.path.dirname(__file__)
    core_dir = os.path.join(os.path.dirname(utils_dir), 'core')
    cmds = []
    try:
        for fname in os.listdir(core_dir):
            if not fname.endswith('.py'):
                continue
            if fname == '__init__.py' or fname.startswith('_'):
                continue
            cmds.append(os.path.splitext(fname)[0].replace('_', '-'))
    except OSError:
        return []
    return sorted(cmds)


def command_module_name(cmd: str) -> str:
    return cmd.replace('-', '_')


def setup_logging(verbosity: int = 0) -> None:
    """Install the single stderr handler used by every library logger."""
    if verbosity < 0:
        level = logging.ERROR
    elif verbosity == 0:
        level = logging.WARNING
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.DEBUG
    root = logging.getLogger('csf')
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('csf: %(levelname)s: %(message)s'))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


def worker_count(default: Optional[int] = None) -> int:
    """Worker-pool size, bounded by the CSF_THREADS environment variable."""
    raw = os.environ.get('CSF_THREADS')
    if raw:
        try:
            n = int(raw)
        except ValueError:
            logging.getLogger('csf').warning('ignoring non-integer CSF_THREADS=%r', raw)
        else:
            return max(1, n)
    if default is not None:
        return max(1, default)
    return max(1, os.cpu_count() or 1)


def output_root() -> Path:
    return Path(os.environ.get('CSF_OUT', 'out'))


def format_float(value: float) -> str:
    return FLOAT_FORMAT % float(value)


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return ''
    return str(value)


def write_tsv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a tab-separated table with a header row (UTF-8, LF endings)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        f.write('\t'.join(header) + '\n')
        for row in rows:
            f.write('\t'.join(format_cell(v) for v in row) + '\n')
    return path


def read_tsv(path: Path) -> Tuple[List[str], List[List[str]]]:
    """Read a table written by `write_tsv`; returns (header, rows of strings)."""
    with Path(path).open('r', encoding='utf-8') as f:
        lines = [ln.rstrip('\n') for ln in f if ln.strip()]
    if not lines:
        return [], []
    header = lines[0].split('\t')
    return header, [ln.split('\t') for ln in lines[1:]]


def write_matrix_tsv(path: Path, matrix: np.ndarray) -> Path:
    """Headerless matrix dump; 17 significant digits round-trip float64 exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with path.open('w', encoding='utf-8', newline='\n') as f:
        for row in m:
            f.write('\t'.join(format_float(v) for v in row) + '\n')
    return path


def read_matrix_tsv(path: Path) -> np.ndarray:
    rows = []
    with Path(path).open('r', encoding='utf-8') as f:
        for ln in f:
            ln = ln.rstrip('\n')
            if ln:
                rows.append([float(v) for v in ln.split('\t')])
    return np.asarray(rows, dtype=np.float64)


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def read_json(path: Path) -> Any:
    with Path(path).open('r', encoding='utf-8') as f:
        return json.load(f)


def parse_list(text: Optional[str], cast=float) -> Optional[List[Any]]:
    """Parse a comma-separated flag value such as `--depths 2,5,10,20`."""
    if text is None:
        return None
    items = [t.strip() for t in str(text).split(',') if t.strip()]
    return [cast(t) for t in items]
