"""Adapter command line: execute toolkit job plans against a backend.

``finetune`` trains one job and records the selected checkpoint;
``decode`` writes hypothesis files for a job's evaluation manifests;
``run`` does both. Exit codes follow the toolkit: 2 usage/config,
3 data/contract, 4 I/O.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .decode import decode
from .errors import AdapterError, AdapterUsageError
from .finetune import finetune, resolve_init_checkpoint
from .plans import AdapterRunSpec, load_plan

log = logging.getLogger("adaptbench_adapter")


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except AdapterUsageError as exc:
            click.echo(f"adaptbench-adapter: error: config: {exc}", err=True)
            sys.exit(2)
        except AdapterError as exc:
            click.echo(f"adaptbench-adapter: error: data: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"adaptbench-adapter: error: io: {exc}", err=True)
            sys.exit(4)

    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="adaptbench-adapter")
def main():
    """Execute adaptbench job plans against ASR backends."""
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def common_options(func):
    func = click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))(func)
    func = click.option("--job", "job_id", required=True)(func)
    func = click.option("--backend", "backend_id", default="mock", show_default=True)(func)
    func = click.option(
        "--run-root",
        default=None,
        type=click.Path(file_okay=False),
        help="Toolkit output directory; defaults to the plan's directory.",
    )(func)
    func = click.option("--workdir", required=True, type=click.Path(file_okay=False))(func)
    func = click.option("--device", default="cpu", show_default=True)(func)
    return func


def build_spec(plan_path, job_id, backend_id, run_root, workdir, device, epochs=None) -> AdapterRunSpec:
    jobs = load_plan(plan_path)
    if job_id not in jobs:
        raise AdapterUsageError(
            f"job {job_id!r} not in plan; available: {', '.join(sorted(jobs))}"
        )
    root = Path(run_root) if run_root else Path(plan_path).resolve().parent
    return AdapterRunSpec(
        job=jobs[job_id],
        backend_id=backend_id,
        run_root=root,
        workdir=Path(workdir),
        epochs=epochs,
        device=device,
    )


@main.command("finetune")
@common_options
@click.option("--epochs", type=int, default=None, help="Training epochs (required; no default).")
@click.option("--dry-run", is_flag=True, help="Emit the resolved training config and stop.")
@handle_errors
def finetune_command(plan_path, job_id, backend_id, run_root, workdir, device, epochs, dry_run):
    """Fine-tune one training job and select its best checkpoint."""
    spec = build_spec(plan_path, job_id, backend_id, run_root, workdir, device, epochs)
    result = finetune(spec, dry_run=dry_run)
    if dry_run:
        click.echo(json.dumps(result, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        click.echo(f"selected checkpoint: {result}")


@main.command("decode")
@common_options
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Checkpoint to decode with; defaults to the job's selected one.")
@handle_errors
def decode_command(plan_path, job_id, backend_id, run_root, workdir, device, checkpoint):
    """Decode every evaluation manifest of a job to hypothesis files."""
    spec = build_spec(plan_path, job_id, backend_id, run_root, workdir, device)
    ckpt = Path(checkpoint) if checkpoint else _selected_or_init(spec)
    for manifest in spec.job.eval_manifests:
        out = decode(spec, ckpt, manifest)
        click.echo(f"decoded {manifest} -> {out}")


def _selected_or_init(spec: AdapterRunSpec):
    pointer = spec.selected_path()
    if pointer.exists():
        data = json.loads(pointer.read_text(encoding="utf-8"))
        checkpoint = Path(data["checkpoint"])
        return checkpoint if checkpoint.is_absolute() else spec.workdir / checkpoint
    if spec.job.init_from == "si_checkpoint":
        return resolve_init_checkpoint(spec)
    return None


@main.command("run")
@common_options
@click.option("--epochs", type=int, default=None)
@handle_errors
def run_command(plan_path, job_id, backend_id, run_root, workdir, device, epochs):
    """Fine-tune (when the job trains) and decode its evaluation manifests."""
    spec = build_spec(plan_path, job_id, backend_id, run_root, workdir, device, epochs)
    ckpt = None
    if spec.job.is_training:
        ckpt = finetune(spec)
        click.echo(f"selected checkpoint: {ckpt}")
    else:
        ckpt = _selected_or_init(spec)
    for manifest in spec.job.eval_manifests:
        out = decode(spec, ckpt, manifest)
        click.echo(f"decoded {manifest} -> {out}")


if __name__ == "__main__":
    main()
