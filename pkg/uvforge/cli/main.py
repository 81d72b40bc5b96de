"""
``uvforge`` command line.

Config precedence, lowest to highest: model defaults, the ``--config`` YAML file, ``--set
section.key=value`` assignments in order, then dedicated flags such as ``--seed``. The
resolved config is written to ``config.resolved.yaml`` in the run directory; passing that
file back with ``--config`` replays the run.

Failures print one JSON line to stderr, ``{"error": kind, "code": n, "message": ...}``, and
exit with the error's code: 2 for config errors, 3 for missing files, 4 for a locked run
directory, 1 otherwise.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from ..assembly import (
    DEFAULT_ARM,
    InferenceModel,
    RecoveryRequest,
    RecoveryResult,
    assemble,
    compose_edit,
    interpolate,
    resolve_arm,
    train_appearance,
    train_structure,
)
from ..config import UvforgeSettings, load_run_config
from ..corpus import generate_corpus, load_manifest, load_sample, write_png, write_raster
from ..dataprep import TrainingSample, split_views
from ..exceptions import ConfigError, MissingFileError, UvforgeError
from ..metrics import (
    GroundTruthModel,
    MeanFillModel,
    eval_recovery,
    render_recovered,
    run_ablation_matrix,
    run_guidance_sweep,
    run_view_check,
    write_contact_sheet,
)
from ..types.config import RunConfig
from ..types.manifest import CorpusManifest
from ..world import region_mask
from .rundir import RunDir, default_run_dir, open_run_dir

_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
_logger.addHandler(logging.StreamHandler(sys.stderr))

BASELINES = {"mean-fill": lambda manifest: MeanFillModel(), "gt": GroundTruthModel}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvforge", description="UV texture recovery by cross-assembled diffusion")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run config")
    common.add_argument(
        "--set", dest="assignments", action="append", default=[], metavar="SECTION.KEY=VALUE", help="Config override"
    )
    common.add_argument("--out", type=Path, help="Run directory (default: <runs root>/<timestamp>-<fingerprint>)")
    common.add_argument("--threads", type=int, help="Worker threads (default: UVFORGE_THREADS or CPU count)")

    sub = parser.add_subparsers(dest="command", required=True)

    corpus = sub.add_parser("corpus", parents=[common], help="Generate the synthetic face corpus")
    corpus.add_argument("--seed", type=int)

    for name, section in (("train-appearance", "train_a"), ("train-structure", "train_s")):
        train = sub.add_parser(name, parents=[common], help=f"Train the {section} network")
        train.add_argument("--corpus", type=Path, required=True, help="Corpus directory")
        train.add_argument("--model", type=Path, help="Model directory for checkpoints (default: the run directory)")
        train.add_argument("--seed", type=int)
        train.add_argument("--steps", type=int)
        train.add_argument("--attention", choices=["channel", "self"])
        if section == "train_a":
            train.add_argument("--no-landmarks", action="store_true", help="Zero the landmark control channel")
        else:
            train.add_argument("--direction", choices=["2d_to_uv", "uv_to_2d"])

    for name, help_text in (
        ("recover", "Recover a complete UV texture for one corpus face"),
        ("edit", "Recover from a base unwrap with region layers from other faces"),
        ("interp", "Recover textures along a slerp between two faces"),
    ):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("--model", type=Path, required=True, help="Model directory holding the checkpoints")
        cmd.add_argument("--corpus", type=Path, required=True, help="Corpus directory")
        cmd.add_argument("--arm", default=DEFAULT_ARM, help="Assembly arm")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--views", type=int)
        cmd.add_argument("--steps", type=int)
        cmd.add_argument("--guidance", type=float)
        cmd.add_argument("--no-color-adjust", action="store_true")
        if name == "recover":
            cmd.add_argument("--input", required=True, help="Corpus sample id")

    evaluate = sub.add_parser("eval", parents=[common], help="Render-and-compare evaluation of one arm or baseline")
    evaluate.add_argument("--corpus", type=Path, required=True, help="Corpus directory")
    evaluate.add_argument("--model", type=Path, help="Model directory holding the checkpoints")
    evaluate.add_argument("--arm", default=DEFAULT_ARM, help="Assembly arm")
    evaluate.add_argument("--baseline", choices=sorted(BASELINES), help="Evaluate a baseline instead of a model")
    evaluate.add_argument("--limit", type=int)

    ablate = sub.add_parser("ablate", parents=[common], help="Evaluate the ablation arms")
    ablate.add_argument("--corpus", type=Path, required=True, help="Corpus directory")
    ablate.add_argument("--model", type=Path, required=True, help="Model directory holding the checkpoints")
    ablate.add_argument("--arms", help="Comma-separated arm names, or 'all' for the table arms")
    ablate.add_argument("--limit", type=int)
    ablate.add_argument("--guidance-sweep", action="store_true", help="Also sweep guidance on the default arm")
    ablate.add_argument(
        "--view-check", action="store_true", help="Also compare single half-face views with both on the default arm"
    )
    return parser


def _flag_overrides(args: argparse.Namespace) -> list[str]:
    """Dedicated flags as ``section.key=value`` assignments, applied after ``--set``."""
    values: dict[str, Any] = {}
    command = args.command
    seed = getattr(args, "seed", None)
    if command == "corpus":
        values["corpus.seed"] = seed
    elif command.startswith("train-"):
        section = "train_a" if command == "train-appearance" else "train_s"
        values[f"{section}.seed"] = seed
        values[f"{section}.steps"] = args.steps
        values[f"{section}.attention"] = args.attention
        if getattr(args, "no_landmarks", False):
            values["train_a.landmarks"] = False
        values[f"{section}.direction"] = getattr(args, "direction", None)
    elif command in ("recover", "edit", "interp"):
        values["sample.seed"] = seed
        values["sample.views"] = args.views
        values["sample.steps"] = args.steps
        values["sample.guidance"] = args.guidance
        if args.no_color_adjust:
            values["sample.color_adjust"] = False
    elif command in ("eval", "ablate"):
        values["eval.limit"] = args.limit
        if command == "ablate" and args.arms:
            values["ablate.arms"] = [a.strip() for a in args.arms.split(",") if a.strip()]
    return [f"{key}={json.dumps(value)}" for key, value in values.items() if value is not None]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, [*args.assignments, *_flag_overrides(args)])


def _corpus(args: argparse.Namespace) -> CorpusManifest:
    return load_manifest(args.corpus)


def _sample(manifest: CorpusManifest, sample_id: Optional[str], key: str) -> TrainingSample:
    if not sample_id:
        raise ConfigError("a corpus sample id is required", key)
    try:
        record = manifest.record(sample_id)
    except KeyError:
        missing = manifest.root / sample_id
        raise MissingFileError(f"no sample {sample_id!r} in corpus {manifest.root}", missing) from None
    return load_sample(manifest, record)


def _write_result(run: RunDir, stem: str, result: RecoveryResult) -> None:
    write_raster(run / f"{stem}.uvf", result.texture)
    write_png(run / f"{stem}.png", result.texture)


def cmd_corpus(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = generate_corpus(config.corpus, run.path, threads=threads, log=run.log)
    _logger.info(f"Wrote {len(manifest.records)} samples to {run.path}")


def cmd_train(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    model_dir = args.model or run.path
    model_dir.mkdir(parents=True, exist_ok=True)
    train = train_appearance if args.command == "train-appearance" else train_structure
    result = train(_corpus(args), config, model_dir, log=run.log)
    _logger.info(f"Trained {result.spec.name}; checkpoint {result.checkpoint}")


def _model(args: argparse.Namespace) -> InferenceModel:
    return assemble(resolve_arm(args.arm), args.model)


def _color_adjust(config: RunConfig, model: InferenceModel) -> bool:
    return config.sample.color_adjust and model.color_adjust


def cmd_recover(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = _corpus(args)
    sample = _sample(manifest, args.input, "input")
    model = _model(args)
    request = RecoveryRequest.from_sample(sample, config.sample, color_adjust=_color_adjust(config, model))
    result = model.recover(request, log=run.log)
    _write_result(run, f"{sample.sample_id}_uv", result)
    record = manifest.record(sample.sample_id)
    render = render_recovered(record, result.texture, result.color_adjusted, sample.I_w.shape[0])
    row = {"input": sample.I_w, "T_w": sample.T_w, "recovered": result.texture, "render": render}
    write_contact_sheet(run / f"{sample.sample_id}_sheet.png", [row])


def cmd_edit(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = _corpus(args)
    base = _sample(manifest, config.edit.base, "edit.base")
    layers = []
    for i, layer in enumerate(config.edit.layers):
        source = _sample(manifest, layer.sample_id, f"edit.layers.{i}.sample_id")
        try:
            region = region_mask(layer.regions, source.M_T.shape[0])
        except KeyError as e:
            raise ConfigError(str(e.args[0]), f"edit.layers.{i}.regions") from None
        mask = source.M_T & region
        layers.append((source.T_w * mask[..., None], mask))
    texture, mask = compose_edit(base.T_w * base.M_T[..., None], base.M_T, layers)
    write_png(run / "edit_input.png", texture)
    model = _model(args)
    request = RecoveryRequest.from_sample(base, config.sample, color_adjust=_color_adjust(config, model))
    request = request.model_copy(update={"views": [texture], "masks": [mask]})
    result = model.recover(request, log=run.log)
    _write_result(run, "edit_uv", result)
    write_contact_sheet(run / "edit_sheet.png", [{"input": base.I_w, "T_w": texture, "recovered": result.texture}])


def cmd_interp(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = _corpus(args)
    a = _sample(manifest, config.interp.a, "interp.a")
    b = _sample(manifest, config.interp.b, "interp.b")
    model = _model(args)
    request = RecoveryRequest.from_sample(a, config.sample, color_adjust=_color_adjust(config, model))
    views_b = [v for v, _ in split_views(b.T_w, b.M_T, config.sample.views)] or [b.T_w]
    results = interpolate(model, request, views_b, config.interp.taus, log=run.log)
    rows = []
    for tau, result in zip(config.interp.taus, results):
        _write_result(run, f"interp_{tau:g}", result)
        rows.append({"recovered": result.texture})
    write_contact_sheet(run / "interp_sheet.png", rows, columns=["recovered"])


def cmd_eval(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = _corpus(args)
    if args.baseline:
        model, label = BASELINES[args.baseline](manifest), args.baseline
    else:
        if args.model is None:
            raise ConfigError("--model is required unless --baseline is given", "model")
        model, label = _model(args), args.arm
    report = eval_recovery(manifest, model, config, label=label, out_dir=run.path, log=run.log, threads=threads)
    _logger.info(f"{label}: {report.summary()['mean']}")


def cmd_ablate(args: argparse.Namespace, config: RunConfig, run: RunDir, threads: int) -> None:
    manifest = _corpus(args)
    result = run_ablation_matrix(
        manifest, args.model, config.ablate.arms, config, out_dir=run.path, log=run.log, threads=threads
    )
    _logger.info(f"Ablation table:\n{result.table.to_string(index=False)}")
    needs_default = args.guidance_sweep or args.view_check
    default = assemble(resolve_arm(DEFAULT_ARM), args.model) if needs_default else None
    if args.guidance_sweep:
        run_guidance_sweep(
            manifest,
            default,
            config,
            config.ablate.guidance_sweep,
            out_dir=run / "guidance",
            log=run.log,
            threads=threads,
        )
    if args.view_check:
        views = run_view_check(manifest, default, config, out_dir=run / "views", log=run.log, threads=threads)
        _logger.info(f"View check:\n{views.table.to_string(index=False)}")


COMMANDS: dict[str, Callable[[argparse.Namespace, RunConfig, RunDir, int], None]] = {
    "corpus": cmd_corpus,
    "train-appearance": cmd_train,
    "train-structure": cmd_train,
    "recover": cmd_recover,
    "edit": cmd_edit,
    "interp": cmd_interp,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def _report(error: UvforgeError) -> int:
    line = {"error": error.kind, "code": error.code, "message": str(error), **error.details()}
    print(json.dumps(line, default=str), file=sys.stderr)
    return error.code


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        settings = UvforgeSettings(threads=args.threads)
        threads = settings.threads()
        out = args.out or default_run_dir(config, settings)
        with open_run_dir(out, config, args.command) as run_dir:
            COMMANDS[args.command](args, config, run_dir, threads)
    except UvforgeError as e:
        return _report(e)
    except (ValueError, OSError) as e:
        line = {"error": "error", "code": 1, "message": f"{type(e).__name__}: {e}"}
        print(json.dumps(line), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
