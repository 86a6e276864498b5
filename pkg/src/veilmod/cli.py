"""Operator command line: ingest, prewarm, serve, simulate, report, fixture.

Exit codes: 0 success, 1 io or data damage, 2 validation, 3 no data.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import replace
from pathlib import Path

import click

from .config import load_config
from .corpus import (
    CATEGORIES,
    REALISM,
    Corpus,
    category_counts,
    ingest_manifest,
    materialize_corpus,
)
from .errors import (
    ConflictError,
    InvalidParameterError,
    LogCorruptionError,
    SchemaError,
    StateError,
    ValidationError,
    VeilmodError,
)
from .eventlog import replay
from .fixture import DEFAULT_DISTRIBUTION, generate_placeholder_corpus
from .report import build_report, canonical_report_bytes, render_csv, render_table
from .report import state_from_records
from .service import RenditionCache


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LogCorruptionError as exc:
            _fail(str(exc), 1)
        except (SchemaError, ValidationError, InvalidParameterError, ConflictError) as exc:
            _fail(str(exc), 2)
        except StateError as exc:
            _fail(str(exc), 3)
        except OSError as exc:
            _fail(str(exc), 1)
        except VeilmodError as exc:
            _fail(str(exc), 1)

    return wrapper


def count_table(corpus: Corpus) -> str:
    counts = category_counts(corpus)
    lines = ["category".ljust(12) + "".join(r.rjust(11) for r in REALISM) + "total".rjust(11)]
    col_totals = {r: 0 for r in REALISM}
    for cat in CATEGORIES:
        row = counts.get(cat, {})
        values = [row.get(r, 0) for r in REALISM]
        for r, v in zip(REALISM, values):
            col_totals[r] += v
        lines.append(cat.ljust(12) + "".join(str(v).rjust(11) for v in values)
                     + str(sum(values)).rjust(11))
    lines.append("total".ljust(12) + "".join(str(col_totals[r]).rjust(11) for r in REALISM)
                 + str(sum(col_totals.values())).rjust(11))
    return "\n".join(lines)


@click.group()
def main():
    """Obfuscated image moderation platform: operator tool."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(path_type=Path),
              help="JSONL manifest describing the source images.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory to write the validated corpus into.")
@guarded
def ingest(manifest: Path, out_dir: Path):
    """Validate a manifest and materialize a self-contained corpus directory."""
    corpus = ingest_manifest(manifest)
    materialized = materialize_corpus(corpus, out_dir)
    click.echo(count_table(materialized))
    click.echo(f"corpus written to {out_dir}")


def _parse_sigma_list(raw: str) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"sigma list {raw!r} is not comma-separated numbers")
    if not values:
        raise ValidationError("sigma list is empty")
    for v in values:
        if not v >= 0:
            raise ValidationError(f"sigma must be non-negative, got {v}")
    return values


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(path_type=Path),
              help="Corpus directory (must contain manifest.jsonl).")
@click.option("--sigmas", default="7,14", show_default=True,
              help="Comma-separated blur strengths to precompute.")
@click.option("--levels", default=None,
              help="Additional comma-separated slider levels to precompute.")
@click.option("--cache-dir", default=None, type=click.Path(path_type=Path),
              help="Rendition cache directory (default: <corpus>/renditions).")
@guarded
def prewarm(corpus_dir: Path, sigmas: str, levels: str, cache_dir: Path):
    """Precompute and cache blurred renditions; reruns recompute nothing."""
    corpus = ingest_manifest(corpus_dir / "manifest.jsonl")
    wanted = _parse_sigma_list(sigmas)
    if levels:
        wanted.extend(_parse_sigma_list(levels))
    ordered = sorted(set(wanted))
    cache = RenditionCache(corpus, cache_dir or corpus_dir / "renditions")
    computed = 0
    cached = 0
    for record in corpus.records:
        for sigma in ordered:
            if cache.lookup(record.id, sigma) is None:
                cache.ensure(record.id, sigma)
                computed += 1
            else:
                cached += 1
    click.echo(
        f"renditions: {computed} computed, {cached} already cached "
        f"({len(corpus)} images x {len(ordered)} sigma values) in {cache.cache_dir}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path),
              help="Experiment config file (JSON).")
@click.option("--static", "static_dir", default=None, type=click.Path(path_type=Path),
              help="Optional directory of UI assets to serve at /.")
@guarded
def serve(config_path: Path, static_dir: Path):
    """Run the HTTP server for an experiment."""
    import uvicorn

    from .server import create_app
    from .service import ExperimentService

    config = load_config(config_path)
    service = ExperimentService(config)
    if config.admin_token is None:
        click.echo(f"admin token (generated): {service.admin_token}", err=True)
    app = create_app(service, static_dir=static_dir)
    click.echo(f"serving experiment {config.experiment_id!r} "
               f"on http://{config.listen_host}:{config.listen_port}", err=True)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")


@main.command()
@click.option("--experiment", "config_path", required=True, type=click.Path(path_type=Path),
              help="Experiment config file (JSON).")
@click.option("--workers", default=12, show_default=True, type=int)
@click.option("--accuracy-profile", "profile", default="identity", show_default=True,
              help="Builtin profile name (identity, uniform) or a JSON file path.")
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path),
              help="Override the log directory.")
@guarded
def simulate(config_path: Path, workers: int, profile: str, seed: int, out_dir: Path):
    """Drive scripted workers through an embedded server; deterministic per seed."""
    from .simulate import run_simulation

    config = load_config(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    if out_dir is not None:
        config = replace(config, log_dir=out_dir)
    result = run_simulation(config, workers, profile)
    click.echo(f"workers: {result.n_workers}  responses: {result.n_responses}  "
               f"privacy probes refused: {result.n_probes_rejected}")
    for stage_key in sorted(result.report["stages"], key=int):
        acc = result.report["stages"][stage_key]["accuracy"]
        click.echo(f"stage {stage_key}: n={acc['n_responses']} "
                   f"q1_accuracy={acc['q1_accuracy']:.4f}")
    click.echo(f"event log: {result.log_path}")
    click.echo(f"trace:     {result.trace_path}")
    click.echo(f"report:    {result.report_path}")


def _find_log_file(log_path: Path) -> Path:
    if log_path.is_file():
        return log_path
    if log_path.is_dir():
        candidates = [
            p for p in sorted(log_path.glob("*.jsonl"))
            if not p.stem.endswith("-trace")
        ]
        if not candidates:
            raise StateError(f"no data: no event log found in {log_path}")
        if len(candidates) > 1:
            raise ValidationError(
                f"{log_path} holds several logs ({[p.name for p in candidates]}); "
                "pass the file explicitly"
            )
        return candidates[0]
    raise StateError(f"no data: {log_path} does not exist")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(path_type=Path),
              help="Event log file, or a directory holding exactly one.")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(path_type=Path),
              help="Corpus directory the log refers to.")
@click.option("--format", "fmt", default="table", show_default=True,
              type=click.Choice(["table", "csv", "json"]))
@guarded
def report(log_path: Path, corpus_dir: Path, fmt: str):
    """Rebuild the accuracy/exposure/survey report from an event log."""
    log_file = _find_log_file(log_path)
    records, skipped = replay(log_file)
    if skipped:
        click.echo(f"warning: {skipped} partial record skipped", err=True)
    if not records:
        raise StateError("no data: event log is empty")
    corpus = ingest_manifest(Path(corpus_dir) / "manifest.jsonl")
    state = state_from_records(records)
    body = build_report(state, corpus)
    if fmt == "table":
        click.echo(render_table(body), nl=False)
    elif fmt == "csv":
        click.echo(render_csv(body), nl=False)
    else:
        sys.stdout.buffer.write(canonical_report_bytes(body))


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory to generate the corpus into.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--width", default=96, show_default=True, type=int)
@click.option("--height", default=64, show_default=True, type=int)
@click.option("--per-cell", default=None, type=int,
              help="Images per category/type cell (default: the study distribution, 785 total).")
@guarded
def fixture(out_dir: Path, seed: int, width: int, height: int, per_cell: int):
    """Generate a synthetic placeholder corpus with the study's category mix."""
    distribution = None
    if per_cell is not None:
        if per_cell < 1:
            raise ValidationError("--per-cell must be at least 1")
        distribution = {key: per_cell for key in DEFAULT_DISTRIBUTION}
    manifest = generate_placeholder_corpus(
        out_dir, seed=seed, width=width, height=height, distribution=distribution
    )
    corpus = ingest_manifest(manifest)
    click.echo(count_table(corpus))
    click.echo(f"corpus written to {out_dir}")


if __name__ == "__main__":
    main()
