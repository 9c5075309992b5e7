"""Command-line entry point orchestrating the full pipeline.

    hybridil gen-data --n 50 --seed 7 --out data/demos
    hybridil label   --dataset data/demos [--learned --fraction 0.25]
    hybridil process --dataset data/demos [--no-relabel] [--add-waypoints N]
    hybridil train   --dataset data/demos --variant hybrid --out runs/h0
    hybridil eval    --checkpoint runs/h0/policy.ckpt --episodes 50
    hybridil ablate  gamma --values 0.1,0.3,0.5 --out runs/gamma
    hybridil serve   --dataset data/demos --port 8765
    hybridil report  runs/gamma/report.json

Every command accepts --config <yaml> plus repeated --set dotted.path=value
overrides; artifacts embed the resolved configuration. Exit codes: 0 ok,
1 validation error, 2 runtime error.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from typing import Optional

import click
import numpy as np

from . import __version__
from .ablation import run_ablation
from .baselines import make_baseline
from .config import ExperimentConfig, load_config
from .errors import HybridILError, NotFoundError, ValidationError
from .evaluate import evaluate, success_evaluator
from .executor import ExecutorConfig
from .labeler import auto_label_dataset, train_mode_labeler
from .neural import load_checkpoint, save_checkpoint
from .pipeline import generate_dataset, process_dataset
from .policy import bundle_from_config
from .trajectory import load_dataset, save_dataset


def _parse_overrides(pairs: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"override must look like key=value: {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value
    return out


def _config(config_path: Optional[str],
            overrides: tuple[str, ...]) -> ExperimentConfig:
    return load_config(config_path, _parse_overrides(overrides))


def _write_json(path: str, data) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(data, f, indent=1, default=list)
        f.write("\n")
    os.replace(tmp, path)


def _snapshot_config(cfg: ExperimentConfig, out_dir: str) -> None:
    _write_json(os.path.join(out_dir, "config.snapshot.json"), cfg.to_dict())


common_options = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="YAML experiment config."),
    click.option("--set", "overrides", multiple=True,
                 help="Override config entries, e.g. --set train.gamma=0.1"),
]


def with_common(fn):
    for opt in reversed(common_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def cli():
    """Hybrid waypoint/dense-action imitation learning pipeline."""


@cli.command("gen-data")
@with_common
@click.option("--n", "n_demos", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def gen_data(config_path, overrides, n_demos, seed, out_dir):
    """Generate scripted, click-annotated demonstrations."""
    cfg = _config(config_path, overrides)
    n = n_demos if n_demos is not None else cfg.n_demos
    base_seed = seed if seed is not None else cfg.data_seed
    target = out_dir or cfg.dataset_dir
    dataset = generate_dataset(cfg.env, n, base_seed, cfg.profile)
    save_dataset(dataset, target)
    _snapshot_config(cfg, target)
    click.echo(f"wrote {n} demos to {target}")


@cli.command()
@with_common
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--learned", is_flag=True,
              help="Learn clicks from a fraction of demos and auto-label the rest.")
@click.option("--fraction", type=float, default=0.25)
def label(config_path, overrides, dataset_dir, learned, fraction):
    """Attach mode/waypoint labels derived from clicks (no relabeling)."""
    cfg = _config(config_path, overrides)
    path = dataset_dir or cfg.dataset_dir
    dataset = load_dataset(path)
    if learned:
        labeler = train_mode_labeler(dataset, fraction, cfg.labeler)
        keep = round(fraction * len(dataset.demos))
        dataset = auto_label_dataset(labeler, dataset, keep)
    dataset = process_dataset(dataset, relabel=False, ctrl=cfg.controller)
    save_dataset(dataset, path)
    click.echo(f"labeled {len(dataset.demos)} demos in {path}")


@cli.command()
@with_common
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--no-relabel", "no_relabel", is_flag=True)
@click.option("--add-waypoints", type=int, default=0)
@click.option("--augment-sigma", type=float, default=0.0)
def process(config_path, overrides, dataset_dir, no_relabel, add_waypoints,
            augment_sigma):
    """Segment demos and (by default) relabel sparse actions."""
    cfg = _config(config_path, overrides)
    path = dataset_dir or cfg.dataset_dir
    dataset = load_dataset(path)
    dataset = process_dataset(dataset, relabel=not no_relabel,
                              ctrl=cfg.controller,
                              add_waypoints=add_waypoints,
                              augment_sigma=augment_sigma,
                              augment_seed=cfg.data_seed)
    save_dataset(dataset, path)
    click.echo(f"processed {len(dataset.demos)} demos in {path}"
               f" (relabel={not no_relabel})")


@cli.command()
@with_common
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--variant", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def train(config_path, overrides, dataset_dir, variant, seed, out_dir):
    """Train one policy variant and keep the best fixed-eval checkpoint."""
    cfg = _config(config_path, overrides)
    path = dataset_dir or cfg.dataset_dir
    chosen = variant or cfg.variant
    train_cfg = cfg.train
    if seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=seed)
    out = out_dir or os.path.join(cfg.out_dir,
                                  f"{chosen}_seed{train_cfg.seed}")
    dataset = load_dataset(path)
    evaluator = success_evaluator(cfg.env, train_cfg.eval_episodes,
                                  cfg.executor)
    bundle, log = make_baseline(chosen, dataset, train_cfg, evaluator)
    os.makedirs(out, exist_ok=True)
    save_checkpoint(os.path.join(out, "policy.ckpt"), bundle.snapshot(),
                    bundle.config_dict())
    _write_json(os.path.join(out, "trainlog.json"), {
        "records": log.records,
        "evals": log.evals,
        "config": log.config,
    })
    _snapshot_config(cfg, out)
    best = max((e["success"] for e in log.evals), default=None)
    click.echo(f"trained {chosen} (seed {train_cfg.seed}) -> {out}"
               + (f", best eval success {best:.2f}" if best is not None else ""))


@cli.command("eval")
@with_common
@click.option("--checkpoint", "ckpt_path", type=click.Path(), required=True)
@click.option("--episodes", type=int, default=None)
@click.option("--noise", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--heldout", "heldout_dir", type=click.Path(), default=None)
def eval_cmd(config_path, overrides, ckpt_path, episodes, noise, out_path,
             heldout_dir):
    """Evaluate a checkpoint on the fixed episode set."""
    cfg = _config(config_path, overrides)
    arrays, bundle_cfg = load_checkpoint(ckpt_path)
    bundle = bundle_from_config(bundle_cfg)
    bundle.load_snapshot(arrays)
    env_cfg = cfg.env
    if noise is not None:
        env_cfg = dataclasses.replace(env_cfg, system_noise_sigma=noise)
    n = episodes or cfg.eval_episodes
    heldout = load_dataset(heldout_dir) if heldout_dir else None
    metrics = evaluate(bundle, env_cfg, n, exec_cfg=cfg.executor,
                       heldout=heldout)
    payload = {"metrics": metrics.as_dict(), "checkpoint": ckpt_path,
               "episodes": n, "config": cfg.to_dict()}
    if out_path:
        _write_json(out_path, payload)
    click.echo(json.dumps(metrics.as_dict(), indent=1))


@cli.command()
@with_common
@click.argument("kind")
@click.option("--values", required=True,
              help="Comma-separated cell values, e.g. 0.1,0.3,0.5")
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def ablate(config_path, overrides, kind, values, dataset_dir, out_dir):
    """Run one ablation sweep (gamma | action_space | noise |
    label_fraction | add_waypoints)."""
    cfg = _config(config_path, overrides)
    kind = kind.replace("-", "_")
    from .ablation import ABLATION_KINDS
    if kind not in ABLATION_KINDS:
        raise ValidationError(
            f"unknown ablation kind {kind!r}; pick one of {ABLATION_KINDS}")
    path = dataset_dir or cfg.dataset_dir
    dataset = load_dataset(path)
    parsed = []
    for raw in values.split(","):
        raw = raw.strip()
        try:
            parsed.append(json.loads(raw))
        except json.JSONDecodeError:
            parsed.append(raw)
    report = run_ablation({"kind": kind, "values": parsed}, dataset,
                          cfg.train, cfg.env, cfg.seeds,
                          eval_episodes=cfg.eval_episodes,
                          labeler_cfg=cfg.labeler)
    out = out_dir or os.path.join(cfg.out_dir, f"ablation_{kind}")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as f:
        f.write(report.to_json() + "\n")
    with open(os.path.join(out, "report.txt"), "w") as f:
        f.write(report.to_text() + "\n")
    _snapshot_config(cfg, out)
    click.echo(report.to_text())


@cli.command()
@with_common
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--port", type=int, default=8765)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
def serve(config_path, overrides, dataset_dir, port, host, ui_dir):
    """Serve the annotation API (and the UI assets when built)."""
    cfg = _config(config_path, overrides)
    path = dataset_dir or cfg.dataset_dir
    if ui_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        ui_dir = candidate if os.path.isdir(candidate) else None
    from .service import serve as run_service
    click.echo(f"serving {path} on http://{host}:{port}")
    run_service(path, port=port, host=host, ui_dir=ui_dir)


@cli.command()
@click.argument("paths", nargs=-1, type=click.Path())
def report(paths):
    """Render report/metrics JSON files as plain-text tables."""
    if not paths:
        raise ValidationError("report needs at least one file path")
    for path in paths:
        with open(path) as f:
            data = json.load(f)
        click.echo(f"== {path}")
        if "cell_means" in data:
            width = max(len(k) for k in data["cell_means"])
            click.echo(f"{'cell'.ljust(width)}  success")
            for k, v in data["cell_means"].items():
                click.echo(f"{k.ljust(width)}  {v:6.3f}")
        elif "metrics" in data:
            for k, v in data["metrics"].items():
                click.echo(f"{k:24} {v}")
        else:
            click.echo(json.dumps(data, indent=1))


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except (ValidationError, NotFoundError) as e:
        click.echo(f"validation error: {e}", err=True)
        return 1
    except HybridILError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except FileNotFoundError as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
