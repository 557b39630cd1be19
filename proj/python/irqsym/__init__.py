"""MVM-32 firmware analysis with automatic interrupt modeling."""

import json

from . import _core
from ._core import Error, assemble, cfg_dot, cli, compare, fixture_names, fixture_source, run

__all__ = [
    "Error",
    "analyze",
    "assemble",
    "cfg_dot",
    "cli",
    "compare",
    "fixture_names",
    "fixture_source",
    "imt_dump",
    "run",
]


def analyze(input, mode="aim", steps=2_000_000, isr_window=30, max_seq_len=64, deterministic=True,
            force_fixed=False):
    """Runs an analysis and returns (report dict, trend CSV text).

    `input` is "fixture:NAME", an assembly file path or an image path.
    """
    report, trend, _ = _core.analyze_json(input, mode, steps, isr_window, max_seq_len, deterministic, force_fixed)
    return json.loads(report), trend


def imt_dump(input, steps=2_000_000):
    """Interrupt model table after an AIM analysis."""
    _, _, table = _core.analyze_json(input, "aim", steps, 30, 64, True, False)
    return json.loads(table)

