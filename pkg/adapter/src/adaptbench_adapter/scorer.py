"""Validation scoring through the toolkit's own command line.

Checkpoint selection must use exactly the same WER definition as the final
evaluation, so the adapter shells out to ``adaptbench score`` rather than
reimplementing any scoring.
"""

from __future__ import annotations

import json
import os
import subprocess
from pathlib import Path

from .errors import AdapterError


def scorer_command() -> str:
    return os.environ.get("ADAPTBENCH_BIN", "adaptbench")


def score_with_toolkit(manifest: Path, hyps: Path, condition: str | None = None) -> dict:
    """Run ``adaptbench score --json -`` and return the parsed report."""
    cmd = [
        scorer_command(),
        "score",
        "--manifest", str(manifest),
        "--hyps", str(hyps),
        "--json", "-",
    ]
    if condition:
        cmd += ["--condition", condition]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
    except FileNotFoundError as exc:
        raise AdapterError(
            f"toolkit scorer {scorer_command()!r} not found on PATH"
        ) from exc
    if proc.returncode != 0:
        raise AdapterError(
            f"scorer failed (exit {proc.returncode}): {proc.stderr.strip() or proc.stdout.strip()}"
        )
    brace = proc.stdout.find("{")
    if brace == -1:
        raise AdapterError(f"scorer produced no JSON report: {proc.stdout!r}")
    return json.loads(proc.stdout[brace:])
