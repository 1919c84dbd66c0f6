"""Batch entry points covering the full engine without the UI.

Every command exits nonzero on error, writing a machine-readable error
JSON to stderr. All randomness flows from --seed, so seeded commands are
byte-reproducible. MFWB_LOG sets the log level.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import __version__
from .alignment import (
    AdapterConfig, AdapterModel, AlignmentDirective, build_triplets,
    load_adapter, rerank, save_adapter, train_adapter, verify_alignment,
)
from .axis import ConceptAxisSpec, axis_layout
from .errors import MfwbError
from .fusion import build_merged_matrix, matrix_export_doc
from .mfm import MfmConfig, save_model, train_mfm
from .projectors import PROJECTOR_IDS, run_projector
from .quality import evaluate_protocol
from .store import load_dataset, save_dataset, write_vector_file
from .synth import PRESETS, synth_benchmark

log = logging.getLogger("mfwb")


def _dump(doc, out: Path | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


@click.group()
def cli():
    logging.basicConfig(level=os.environ.get("MFWB_LOG", "WARNING").upper())


@cli.command()
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--method", required=True,
              type=click.Choice([p.lower() for p in PROJECTOR_IDS]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--epochs", default=None, type=int, help="MFM training epochs")
@click.option("--out", type=click.Path(), default=None)
@click.option("--model-out", type=click.Path(), default=None,
              help="also save the trained MFM model")
def project(manifest, method, seed, epochs, out, model_out):
    """Project a dataset to 2D; emits layout JSON (plus loss trace for mfm)."""
    dataset = load_dataset(manifest)
    doc = {"method": method, "seed": seed}
    if method == "mfm":
        config = MfmConfig(seed=seed, **({"epochs": epochs} if epochs else {}))
        model, layout, trace = train_mfm(dataset, config)
        doc["lossTrace"] = trace
        if model_out:
            save_model(model, model_out)
    else:
        layout = run_projector(method, dataset, seed)
    doc["layout"] = layout.to_json()
    _dump(doc, out)


@cli.command()
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--method", required=True,
              type=click.Choice([p.lower() for p in PROJECTOR_IDS]))
@click.option("--rounds", default=20, show_default=True, type=int)
@click.option("--sample-size", default=150, show_default=True, type=int)
@click.option("--k", default=30, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--mfm-epochs", default=None, type=int)
@click.option("--out", type=click.Path(), default=None)
def evaluate(manifest, method, rounds, sample_size, k, seed, mfm_epochs, out):
    """Round-based quality protocol; JSON report on stdout, table on stderr."""
    dataset = load_dataset(manifest)
    run = None
    if mfm_epochs is not None:
        def run(pid, ds, s):
            return run_projector(pid, ds, s, MfmConfig(epochs=mfm_epochs))
    report = evaluate_protocol(dataset, method, rounds, sample_size, k, seed,
                               run_projector=run)
    doc = {"method": method, "seed": seed, "report": report.to_json()}
    _dump(doc, out)
    print(report.table(method.upper()), file=sys.stderr)


@cli.command()
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--concepts", required=True,
              help="one concept (one-end) or two comma-separated (two-end)")
@click.option("--length", default=100.0, show_default=True, type=float)
@click.option("--bins", default=20, show_default=True, type=int)
@click.option("--out", type=click.Path(), default=None)
def axis(manifest, concepts, length, bins, out):
    """Concept-axis layout JSON for the dataset's image points."""
    dataset = load_dataset(manifest)
    names = [c.strip() for c in concepts.split(",") if c.strip()]
    if len(names) not in (1, 2):
        raise MfwbError("--concepts takes one or two comma-separated names")
    spec = (ConceptAxisSpec(names[0], length=length) if len(names) == 1
            else ConceptAxisSpec(names[0], names[1], length=length))
    layouts = axis_layout(dataset, [spec], bins=bins)
    _dump({"axes": [l.to_json() for l in layouts]}, out)


@cli.command()
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--directive", "-d", "directive_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=200, show_default=True, type=int)
@click.option("--learning-rate", default=1e-3, show_default=True, type=float)
@click.option("--margin", default=0.2, show_default=True, type=float)
@click.option("--max-triplets", default=256, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--report-out", type=click.Path(), default=None)
@click.option("--log-out", type=click.Path(), default=None,
              help="JSON-lines training log (epoch, hinge, then lhs/rhs)")
def align(manifest, directive_path, out, epochs, learning_rate, margin,
          max_triplets, seed, report_out, log_out):
    """Fine-tune an adapter for a directive; emits the verification report."""
    from .alignment import AlignmentRunLog

    dataset = load_dataset(manifest)
    directive = AlignmentDirective.from_json(
        json.loads(Path(directive_path).read_text()))
    config = AdapterConfig(epochs=epochs, learning_rate=learning_rate,
                           margin=margin, max_triplets=max_triplets, seed=seed)
    identity = AdapterModel.identity(dataset.dimension)
    before = verify_alignment(directive, dataset, identity)
    batch = build_triplets(directive, dataset, max_triplets, seed, margin)
    run_log = AlignmentRunLog(log_out)
    run_log.record(epoch=-1, hinge=None, lhs=before["lhs"], rhs=before["rhs"])
    adapter = train_adapter(
        dataset, batch, config,
        progress=lambda epoch, hinge: run_log.record(epoch=epoch, hinge=hinge))
    save_adapter(adapter, out)
    after = verify_alignment(directive, dataset, adapter)
    run_log.record(epoch=config.epochs, hinge=None,
                   lhs=after["lhs"], rhs=after["rhs"])
    _dump({
        "directive": directive.to_json(),
        "triplets": len(batch.triplets),
        "before": before,
        "after": after,
        "satisfied": after["satisfied"],
        "adapter": str(out),
    }, report_out)


@cli.command(name="rerank")
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--adapter", "-a", "adapter_path", type=click.Path(exists=True),
              default=None, help="identity adapter when omitted")
@click.option("--query", required=True)
@click.option("--candidates", required=True, type=click.Path(exists=True),
              help="JSON list of candidate point ids")
@click.option("--out", type=click.Path(), default=None)
def rerank_cmd(manifest, adapter_path, query, candidates, out):
    """Sort candidates by adapted distance to the adapted query."""
    dataset = load_dataset(manifest)
    adapter = (load_adapter(adapter_path) if adapter_path
               else AdapterModel.identity(dataset.dimension))
    ids = json.loads(Path(candidates).read_text())
    ranked = rerank(query, ids, dataset, adapter)
    _dump({"query": query, "ranked": ranked}, out)


@cli.command(name="synth-benchmark")
@click.option("--preset", required=True, type=click.Choice(PRESETS))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def synth_benchmark_cmd(preset, seed, out):
    """Generate a synthetic fixture manifest."""
    dataset = synth_benchmark(preset, seed)
    save_dataset(dataset, out)
    print(json.dumps({"preset": preset, "seed": seed,
                      "points": len(dataset), "out": str(out)}, sort_keys=True))


@cli.command(name="export-matrix")
@click.option("--manifest", "-m", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(),
              help="JSON header path; the float32 blob lands beside it")
def export_matrix(manifest, out):
    """Write the merged distance matrix: JSON header + binary rows."""
    dataset = load_dataset(manifest)
    merged = build_merged_matrix(dataset)
    out = Path(out)
    blob = out.with_suffix(".bin")
    write_vector_file(blob, merged.full())
    _dump(matrix_export_doc(merged, blob.name), out)


@cli.command()
@click.option("--port", default=8040, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False),
              default=".", show_default=True)
def serve(port, host, data_dir):
    """Start the HTTP/WebSocket session service."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(Path(data_dir)), host=host, port=port,
                log_level=os.environ.get("MFWB_LOG", "warning").lower())


def main() -> int:
    try:
        cli.main(standalone_mode=False)
        return 0
    except click.ClickException as exc:
        print(json.dumps({"error": "UsageError", "message": exc.format_message()}),
              file=sys.stderr)
        return exc.exit_code or 1
    except click.exceptions.Abort:
        print(json.dumps({"error": "Aborted", "message": "aborted"}), file=sys.stderr)
        return 1
    except MfwbError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
