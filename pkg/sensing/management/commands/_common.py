"""Shared flags and error translation for the experiment commands"""
import json
from typing import Any, Callable

from django.core.management.base import CommandError

from sensing.exceptions import SensingError


def add_run_arguments(parser):
    parser.add_argument('--config', type=str, help='Path to an experiment config (JSON)')
    parser.add_argument('--figure', type=str, help='Figure preset to start from, e.g. fig3a')
    parser.add_argument('--out', type=str, help='Output directory for run directories')
    parser.add_argument('--seed', type=int, help='Master seed (unsigned 64-bit)')
    parser.add_argument('--workers', type=int, help='Worker processes for restarts and sweep points')


def run_flags(options) -> dict:
    return {
        'path': options.get('config'),
        'figure': options.get('figure'),
        'seed': options.get('seed'),
        'workers': options.get('workers'),
        'output_dir': options.get('out'),
    }


def guarded(action: Callable[[], Any]) -> Any:
    """Run ``action`` and turn sensing errors into CommandError with their exit code"""
    try:
        return action()
    except SensingError as e:
        key = getattr(e, 'key', None)
        detail = f" [{key}]" if key else ''
        raise CommandError(f"{type(e).__name__}{detail}: {e}", returncode=e.exit_code)


def summary(record: dict) -> str:
    return json.dumps({
        'run_id': record['run_id'],
        'status': record['status'],
        'output_dir': record['output_dir'],
        'files': record['files'],
    }, indent=2)
