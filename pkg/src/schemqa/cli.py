"""Command-line interface.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from .config import load_config
from .corpus import bundle_chunks, dump_chunks, load_bundle
from .engine import build_backend, build_engine, build_index
from .errors import SchemqaError
from .metrics import evaluate_records, load_eval_records, render_table
from .orchestrator import QueryRequest, Task
from .prompts import TemplateRegistry
from .trace import canonical_json


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _load(config_path: str | None, overrides: dict | None = None):
    return load_config(config_path, overrides=overrides)


@click.group()
def cli() -> None:
    """Retrieval-augmented QA over process engineering document corpora."""


@cli.command()
@click.argument("manifest", type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="index snapshot output path (.npz)")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--window", type=int, default=None, help="chunk window in words")
@click.option("--stride", type=int, default=None, help="chunk stride in words")
@click.option("--dump-chunks", "dump_path", type=click.Path(), default=None)
@click.option("--fill-alt-texts", is_flag=True, help="generate missing image alt-texts via the backend")
def ingest(manifest, out, config_path, window, stride, dump_path, fill_alt_texts) -> None:
    """Build a vector index from a bundle MANIFEST."""
    overrides: dict = {"corpus": {}}
    if window is not None:
        overrides["corpus"]["window_words"] = window
    if stride is not None:
        overrides["corpus"]["stride_words"] = stride
    try:
        config = _load(config_path, overrides)
        bundle = load_bundle(manifest)
        if fill_alt_texts:
            from .ingest_helpers import populate_alt_texts

            backend = build_backend(config)
            templates = TemplateRegistry(config.selection.template_dir)
            bundle, filled = populate_alt_texts(bundle, backend, templates)
            click.echo(f"alt-texts generated: {filled}")
        index, _ = build_index(bundle, config)
        index.save(out)
        if dump_path:
            dump_chunks(
                bundle_chunks(bundle, config.corpus.window_words, config.corpus.stride_words),
                dump_path,
            )
        click.echo(
            f"indexed {len(bundle.documents)} documents "
            f"({json.dumps(bundle.kind_counts, sort_keys=True)}) into {len(index)} chunks -> {out}"
        )
    except SchemqaError as exc:
        _fail(exc)


def _print_turn(final, request_id: str) -> None:
    chosen = final.iterations[final.chosen_iteration]
    click.echo(f"answer: {final.answer}")
    click.echo(
        f"k_star: {chosen.selection.k_star} (iteration {final.chosen_iteration}, "
        f"route {final.route.target.value})"
    )
    click.echo(f"verdict: {final.verdict.value} (composite {final.composite:.4f})")
    click.echo(f"request: {request_id}")


@cli.command()
@click.argument("question")
@click.option("--session", default="cli", help="session id for multi-turn context")
@click.option("--gold", default=None, help="gold answer for metric-based critique")
@click.option("--task", default="OPEN_VQA", type=click.Choice([t.value for t in Task], case_sensitive=False))
@click.option("--mc-option", "mc_options", multiple=True, help="multiple-choice option (repeatable)")
@click.option("--config", "config_path", type=click.Path(), default=None)
def ask(question, session, gold, task, mc_options, config_path) -> None:
    """Answer one QUESTION against the configured corpus."""
    try:
        engine = build_engine(_load(config_path))
        request = QueryRequest(
            session_id=session,
            question=question,
            task=Task(task.upper()),
            gold_answer=gold,
            mc_options=tuple(mc_options) if mc_options else None,
        )
        outcome = engine.ask(request)
    except (SchemqaError, ValueError) as exc:
        _fail(exc)
        return
    _print_turn(outcome.final, outcome.archive.request_id)


@cli.command()
@click.option("--session", default="repl")
@click.option("--config", "config_path", type=click.Path(), default=None)
def repl(session, config_path) -> None:
    """Interactive multi-turn loop; empty line or 'exit' quits."""
    try:
        engine = build_engine(_load(config_path))
    except SchemqaError as exc:
        _fail(exc)
        return
    click.echo("schemqa repl — ask about the indexed corpus (exit to quit)")
    while True:
        try:
            question = input("> ").strip()
        except EOFError:
            break
        if not question or question.lower() in ("exit", "quit"):
            break
        try:
            outcome = engine.ask(QueryRequest(session_id=session, question=question))
        except (SchemqaError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            continue
        _print_turn(outcome.final, outcome.archive.request_id)


@cli.command(name="eval")
@click.argument("dataset", type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_cmd(dataset, report_path) -> None:
    """Score an eval DATASET (newline-delimited records) and write a report."""
    try:
        records = load_eval_records(dataset)
        report = evaluate_records(records)
    except (SchemqaError, OSError, json.JSONDecodeError) as exc:
        _fail(exc)
        return
    Path(report_path).write_text(
        json.dumps(report.to_record(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(render_table(report))
    click.echo(f"report written to {report_path}")


@cli.command()
@click.argument("dataset", type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", type=click.Path(), default=".")
@click.option("--train", type=float, default=0.70, show_default=True)
@click.option("--val", type=float, default=0.15, show_default=True)
def split(dataset, seed, out_dir, train, val) -> None:
    """Shuffle DATASET with --seed and split into train/val/test files."""
    try:
        records = load_eval_records(dataset)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(exc)
        return
    rng = random.Random(seed)
    rng.shuffle(records)
    n = len(records)
    n_train = int(n * train)
    n_val = int(n * val)
    parts = {
        "train": records[:n_train],
        "val": records[n_train : n_train + n_val],
        "test": records[n_train + n_val :],
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in parts.items():
        path = out / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for rec in part:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        click.echo(f"{name}: {len(part)} -> {path}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    overrides: dict = {"server": {}}
    if host:
        overrides["server"]["host"] = host
    if port:
        overrides["server"]["port"] = port
    try:
        config = _load(config_path, overrides)
        engine = build_engine(config)
    except SchemqaError as exc:
        _fail(exc)
        return
    uvicorn.run(create_app(engine), host=config.server.host, port=config.server.port)


@cli.group()
def memory() -> None:
    """Inspect and export the memory stores."""


@memory.command(name="list")
@click.option("--config", "config_path", type=click.Path(), default=None)
def memory_list(config_path) -> None:
    """Summarize sessions and long-term records."""
    try:
        engine = build_engine(_load(config_path))
    except SchemqaError as exc:
        _fail(exc)
        return
    for session_id in engine.memory.short_term.sessions():
        turns = engine.memory.short_term.turns(session_id)
        click.echo(f"session {session_id}: {len(turns)} turns")
    click.echo(f"long-term records: {len(engine.memory.long_term)}")


@memory.command(name="export")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
def memory_export(config_path, out) -> None:
    """Dump all memory records as one JSON document."""
    try:
        engine = build_engine(_load(config_path))
    except SchemqaError as exc:
        _fail(exc)
        return
    payload = {
        "sessions": {
            sid: [t.to_record() for t in engine.memory.short_term.turns(sid)]
            for sid in engine.memory.short_term.sessions()
        },
        "long_term": [r.to_record() for r in engine.memory.long_term.records()],
    }
    Path(out).write_text(canonical_json(payload) + "\n", encoding="utf-8")
    click.echo(f"memory exported to {out}")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
