"""Generate the Markdown manual for the csf commands in `core/`.

Each command module's docstring and `--help` output go into
`docs/commands/<command>.md`; `docs/index.md` lists the commands grouped by
what they are used for.

Usage:
    python scripts/generate_docs.py [OUT_DIR]
"""
from __future__ import annotations

import contextlib
import importlib
import io
import sys
from pathlib import Path
from typing import Dict, List, Tuple

ROOT = Path(__file__).resolve().parents[1]
OUT_DIR = ROOT / 'docs'

if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from utils.helpers import command_module_name, list_core_commands  # noqa: E402

CATEGORIES = {
    'experiments': {'run', 'sweep', 'ablate'},
    'analysis': {'spectral', 'nystrom-bench'},
    'data': {'synth'},
}
ORDER = ['experiments', 'analysis', 'data', 'other']


def detect_category(name: str) -> str:
    for k, s in CATEGORIES.items():
        if name in s:
            return k
    return 'other'


def capture_help(module) -> str:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        try:
            module.execute(['--help'])
        except SystemExit:
            pass
    return buf.getvalue()


def render_command(name: str, doc: str, help_text: str) -> str:
    lines = [f'# {name}', '']
    if doc:
        lines += ['## Description', '', doc, '']
    else:
        lines += ['*(no module docstring available)*', '']
    lines += ['## Help', '']
    if help_text:
        lines += ['```', help_text.rstrip(), '```']
    else:
        lines += ['*(no help output captured)*']
    return '\n'.join(lines) + '\n'


def render_index(entries: List[Tuple[str, str]]) -> str:
    groups: Dict[str, List[Tuple[str, str]]] = {}
    for name, desc in entries:
        groups.setdefault(detect_category(name), []).append((name, desc))
    out = ['# csf commands', '', 'Run `csf <command> --help` for the flags of a command.', '']
    for cat in ORDER:
        items = groups.get(cat)
        if not items:
            continue
        out += [f'## {cat.capitalize()}', '']
        out += [f'- [{name}](commands/{name}.md) - {desc}' for name, desc in items]
        out.append('')
    out += ['Regenerate these pages with:', '', '```sh', 'python scripts/generate_docs.py', '```', '']
    return '\n'.join(out)


def generate(out_dir: Path = OUT_DIR) -> int:
    out_dir = Path(out_dir)
    (out_dir / 'commands').mkdir(parents=True, exist_ok=True)
    names = list_core_commands()
    if not names:
        print('No core modules found under core/.')
        return 1
    entries = []
    for name in names:
        mod = importlib.import_module(f'core.{command_module_name(name)}')
        doc = (mod.__doc__ or '').strip()
        path = out_dir / 'commands' / f'{name}.md'
        path.write_text(render_command(name, doc, capture_help(mod)), encoding='utf-8')
        entries.append((name, doc.splitlines()[0] if doc else '(no description)'))
        print(f'Wrote {path}')
    (out_dir / 'index.md').write_text(render_index(entries), encoding='utf-8')
    print('Wrote', out_dir / 'index.md')
    return 0


if __name__ == '__main__':
    sys.exit(generate(Path(sys.argv[1]) if len(sys.argv) > 1 else OUT_DIR))
