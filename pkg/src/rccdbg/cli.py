"""Command line interface: workspace pipeline steps plus the review server."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from rccdbg.pipeline.config import PipelineConfig
from rccdbg.pipeline.workspace import Workspace
from rccdbg.pipeline import steps
from rccdbg.pipeline.report import format_report


def _load_config(workspace: Path, config: Path | None, seed: int | None) -> PipelineConfig:
    if config is not None:
        cfg = PipelineConfig.load(config)
    elif (workspace / "config.json").is_file():
        cfg = PipelineConfig.load(workspace / "config.json")
    else:
        cfg = PipelineConfig()
    if seed is not None:
        cfg = PipelineConfig.from_dict({**_as_dict(cfg), "seed": seed})
    return cfg


def _as_dict(cfg: PipelineConfig) -> dict:
    import json

    return json.loads(cfg.to_json())


workspace_option = click.option(
    "--workspace", "-w", required=True, type=click.Path(path_type=Path),
    help="Workspace root directory.")
config_option = click.option(
    "--config", "-c", type=click.Path(exists=True, path_type=Path), default=None,
    help="Pipeline config JSON (defaults to <workspace>/config.json when present).")
seed_option = click.option("--seed", type=int, default=None, help="Override the config seed.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Debug image networks by clustering error relevance heatmaps."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@workspace_option
@config_option
@seed_option
def init(workspace: Path, config: Path | None, seed: int | None):
    """Create the workspace folder layout and write the effective config."""
    cfg = _load_config(workspace, config, seed)
    ws = Workspace(workspace).ensure_layout()
    cfg.write(ws.root / "config.json")
    click.echo(f"workspace ready at {ws.root}")


@main.command()
@workspace_option
@config_option
@seed_option
def gen(workspace: Path, config: Path | None, seed: int | None):
    """Generate synthetic Training/Test/Improvement sets with parameter logs."""
    cfg = _load_config(workspace, config, seed)
    steps.step_gen(Workspace(workspace), cfg)
    click.echo("datasets generated")


@main.command()
@workspace_option
@config_option
@seed_option
def train(workspace: Path, config: Path | None, seed: int | None):
    """Train the initial model on TrainingSet and save it to DNNModels."""
    cfg = _load_config(workspace, config, seed)
    name = steps.step_train(Workspace(workspace), cfg)
    click.echo(f"saved model {name!r}")


@main.command()
@workspace_option
@config_option
@seed_option
def test(workspace: Path, config: Path | None, seed: int | None):
    """Evaluate the current model; write trainResult.csv and testResult.csv."""
    cfg = _load_config(workspace, config, seed)
    result = steps.step_test(Workspace(workspace), cfg)
    click.echo(f"train accuracy {result.train_accuracy:.4f}, "
               f"test accuracy {result.test_accuracy:.4f}, "
               f"{len(result.error_ids)} error-inducing images")


@main.command()
@workspace_option
@config_option
@seed_option
def heatmaps(workspace: Path, config: Path | None, seed: int | None):
    """Generate per-layer relevance heatmaps for the error-inducing images."""
    cfg = _load_config(workspace, config, seed)
    bundles = steps.step_heatmaps(Workspace(workspace), cfg)
    click.echo(f"wrote {len(bundles)} heatmap bundles under T/Heatmaps")


@main.command()
@workspace_option
@config_option
@seed_option
def cluster(workspace: Path, config: Path | None, seed: int | None):
    """Cluster heatmaps per layer and promote the best layer's clusters."""
    cfg = _load_config(workspace, config, seed)
    result = steps.step_cluster(Workspace(workspace), cfg)
    best = result.results[result.best_layer]
    click.echo(f"best layer {result.best_layer} with {best.k} clusters"
               + (" (weak knee)" if best.weak_knee else ""))


@main.command()
@workspace_option
@config_option
@seed_option
def assign(workspace: Path, config: Path | None, seed: int | None):
    """Assign ImprovementSet images to clusters; write the unsafe set."""
    cfg = _load_config(workspace, config, seed)
    entries = steps.step_assign(Workspace(workspace), cfg)
    click.echo(f"{len(entries)} unsafe images written to UnsafeSet/unsafe.csv")


@main.command()
@workspace_option
@config_option
@seed_option
@click.option("--labels", type=click.Path(exists=True, path_type=Path), default=None,
              help="Labels CSV (defaults to UnsafeSet/labels.csv).")
def retrain(workspace: Path, config: Path | None, seed: int | None, labels: Path | None):
    """Retrain from current weights on training set + balanced unsafe set."""
    cfg = _load_config(workspace, config, seed)
    result = steps.step_retrain(Workspace(workspace), cfg, labels_path=labels)
    click.echo(f"saved {result.model_name}: train accuracy "
               f"{result.original_train_accuracy:.4f} -> {result.retrained_train_accuracy:.4f}")


@main.command()
@workspace_option
@config_option
@seed_option
def report(workspace: Path, config: Path | None, seed: int | None):
    """Summarize the run: failing images, clusters, inspection effort, flags."""
    cfg = _load_config(workspace, config, seed)
    data = steps.step_report(Workspace(workspace), cfg)
    click.echo(format_report(data))


@main.command()
@workspace_option
@config_option
@seed_option
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Directory of built UI assets to serve at / (optional).")
def serve(workspace: Path, config: Path | None, seed: int | None,
          port: int, host: str, ui_dir: Path | None):
    """Serve the review API (and the UI, when built) for this workspace."""
    import uvicorn

    from rccdbg.server.app import create_app

    cfg = _load_config(workspace, config, seed)
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    app = create_app(workspace, cfg, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except SystemExit as exc:  # uvicorn exits non-zero when the port is busy
        click.echo(f"server failed to start on {host}:{port}", err=True)
        sys.exit(exc.code or 1)


if __name__ == "__main__":
    main()
