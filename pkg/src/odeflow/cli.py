"""Command-line pipeline: worldgen, train, baseline, eval, analyze, report.

Every command reads one config file, honors ``--seed``/``--out`` overrides,
writes its artifacts atomically under the output directory, and records them
in ``manifest.json`` with content hashes.  Exit codes: 0 success, 1 usage or
input error, 2 runtime failure.

Seed discipline: all randomness flows from the single run seed through
tagged generator splits (training reserves tags 1 and 2; field init uses 3,
the baseline fit 4, evaluation 5).  Repeated runs with the same config and
seed therefore produce byte-identical checkpoints and CSVs; the manifest is
the one file that differs, because it carries wall-clock timestamps.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .baselines import fit_interfacegan, to_constant_field
from .config import ExperimentConfig, parse_config
from .editing import EditModel, load_edit_model, save_edit_model, train_edit_restarts
from .errors import ConfigError, OdeflowError
from .evaluation import cd_curve, read_cd_csv, write_cd_csv
from .fieldflow import AffineField, ConstantField, NetField, NetSpec, init_net_params
from .numerics import Rng
from .report import cd_plot_svg, summary_text
from .spectral import affine_of, default_truncation, eigen_report, write_spectral_csv
from .textio import atomic_write_text, format_sections
from .worlds import world_to_items

__all__ = ["main", "build_field"]

_SVM_TAG = 4
_EVAL_TAG = 5


def build_field(config: ExperimentConfig, rng: Rng):
    """Initial field of the configured kind, parameters drawn from ``rng``."""
    d = config.world.dim
    if config.field_kind == "constant":
        return ConstantField(rng.normal(d) / math.sqrt(d))
    if config.field_kind == "affine":
        return AffineField(rng.normal((d, d)) / math.sqrt(d), np.zeros(d))
    spec = NetSpec(dim=d, depth=config.depth, width=config.net_width)
    return NetField(spec, init_net_params(spec, rng))


def _model_stem(config: ExperimentConfig) -> str:
    kind = config.field_kind
    if kind == "net":
        kind = f"net{config.depth}"
    return f"model-{kind}-attr{config.attribute}"


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _record(out_dir: str, config: ExperimentConfig, paths: list[str]) -> None:
    """Insert or refresh manifest entries for the given files."""
    from .config import format_config

    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest = {"tool": "odeflow", "version": __version__, "files": {}}
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="ascii") as fh:
            manifest = json.load(fh)
        manifest.setdefault("files", {})
    manifest["tool"] = "odeflow"
    manifest["version"] = __version__
    manifest["config"] = format_config(config)
    manifest["updated"] = (
        datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    )
    for path in paths:
        rel = os.path.relpath(path, out_dir)
        manifest["files"][rel] = _sha256(path)
    manifest["files"] = dict(sorted(manifest["files"].items()))
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = parse_config(fh.read())
    else:
        config = parse_config("")
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = config.with_out(args.out)
    os.makedirs(config.out, exist_ok=True)
    return config


def _require(path: str, produced_by: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing input {path!r} (expected from `{produced_by}`)")
    return path


def _cmd_worldgen(args, config: ExperimentConfig) -> int:
    path = os.path.join(config.out, "world.cfg")
    atomic_write_text(path, format_sections([("world", world_to_items(config.world))]))
    _record(config.out, config, [path])
    _say(args, f"wrote {path}")
    return 0


def _cmd_train(args, config: ExperimentConfig) -> int:
    model = train_edit_restarts(
        config.world, config.attribute, lambda rng: build_field(config, rng), config.train
    )
    stem = _model_stem(config)
    ckpt = os.path.join(config.out, f"{stem}.ckpt")
    meta = os.path.join(config.out, f"{stem}.meta")
    save_edit_model(model, ckpt, meta)
    _record(config.out, config, [ckpt, meta])
    final = model.history[-1]
    _say(args, f"trained {stem}: final loss {final[0]:.6g} (edit {final[1]:.6g}, keep {final[2]:.6g})")
    _say(args, f"wrote {ckpt}")
    return 0


def _cmd_baseline(args, config: ExperimentConfig) -> int:
    direction = fit_interfacegan(
        config.world, config.attribute, config.svm, Rng(config.seed).split(_SVM_TAG)
    )
    card = config.world.space.cardinalities[config.attribute]
    model = EditModel(
        field=to_constant_field(direction.direction),
        world=config.world,
        attribute=config.attribute,
        source_label=0,
        target_label=card - 1,
        t_max=config.train.t_max,
        history=np.zeros((0, 3)),
    )
    stem = f"baseline-attr{config.attribute}"
    ckpt = os.path.join(config.out, f"{stem}.ckpt")
    meta = os.path.join(config.out, f"{stem}.meta")
    save_edit_model(model, ckpt, meta)
    _record(config.out, config, [ckpt, meta])
    _say(
        args,
        f"fit {stem}: train acc {direction.train_accuracy:.4g}, "
        f"holdout acc {direction.holdout_accuracy:.4g}",
    )
    _say(args, f"wrote {ckpt}")
    return 0


def _model_paths(config: ExperimentConfig, names: list[str]) -> list[tuple[str, str, str]]:
    """Resolve model names to (stem, checkpoint, meta) under the out dir."""
    out = []
    for name in names:
        if os.sep in name or name.endswith(".ckpt"):
            ckpt = name if name.endswith(".ckpt") else name + ".ckpt"
        else:
            ckpt = os.path.join(config.out, f"{name}.ckpt")
        stem = os.path.splitext(os.path.basename(ckpt))[0]
        meta = os.path.splitext(ckpt)[0] + ".meta"
        out.append((stem, ckpt, meta))
    return out


def _cmd_eval(args, config: ExperimentConfig) -> int:
    written = []
    for stem, ckpt, meta in _model_paths(config, args.models):
        _require(ckpt, "train or baseline")
        _require(meta, "train or baseline")
        model = load_edit_model(ckpt, meta)
        curve = cd_curve(
            model.world,
            model.field,
            model.attribute,
            model.t_max,
            config.eval,
            Rng(config.seed).split(_EVAL_TAG),
            source=model.source_label,
            target=model.target_label,
        )
        path = os.path.join(config.out, f"cd-{stem}.csv")
        write_cd_csv(path, curve)
        written.append(path)
        _say(args, f"wrote {path}")
    _record(config.out, config, written)
    return 0


def _cmd_analyze(args, config: ExperimentConfig) -> int:
    reports = []
    for stem, ckpt, meta in _model_paths(config, args.models):
        _require(ckpt, "train or baseline")
        _require(meta, "train or baseline")
        model = load_edit_model(ckpt, meta)
        a, _ = affine_of(model.field)
        k = config.spectral_k
        if k is None:
            k = default_truncation(model.world.dim)
        reports.append(
            eigen_report(a, attribute=model.attribute, fast_threshold=config.fast_threshold, k=k)
        )
    path = os.path.join(config.out, "spectral.csv")
    write_spectral_csv(path, reports)
    _record(config.out, config, [path])
    _say(args, f"wrote {path}")
    return 0


def _cmd_report(args, config: ExperimentConfig) -> int:
    named = []
    for name in args.curves:
        if os.sep in name or name.endswith(".csv"):
            path = name if name.endswith(".csv") else name + ".csv"
        else:
            path = os.path.join(config.out, f"{name}.csv")
        _require(path, "eval")
        label = os.path.splitext(os.path.basename(path))[0]
        if label.startswith("cd-"):
            label = label[3:]
        named.append((label, read_cd_csv(path)))
    svg_path = os.path.join(config.out, "report.svg")
    txt_path = os.path.join(config.out, "summary.txt")
    atomic_write_text(svg_path, cd_plot_svg(named))
    atomic_write_text(txt_path, summary_text(named, seed=config.seed))
    _record(config.out, config, [svg_path, txt_path])
    _say(args, f"wrote {svg_path}")
    _say(args, f"wrote {txt_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file path (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(
        prog="odeflow",
        description="Train, evaluate, and analyze latent-space edit flows on synthetic worlds.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("worldgen", parents=[common], help="write the resolved world descriptor")
    p.set_defaults(func=_cmd_worldgen)
    p = sub.add_parser("train", parents=[common], help="train the configured field, write a checkpoint")
    p.set_defaults(func=_cmd_train)
    p = sub.add_parser("baseline", parents=[common], help="fit the linear SVM direction, write a checkpoint")
    p.set_defaults(func=_cmd_baseline)
    p = sub.add_parser("eval", parents=[common], help="write a CD-curve CSV per model")
    p.add_argument("models", nargs="+", help="model names or checkpoint paths")
    p.set_defaults(func=_cmd_eval)
    p = sub.add_parser("analyze", parents=[common], help="write spectral summaries of affine models")
    p.add_argument("models", nargs="+", help="model names or checkpoint paths")
    p.set_defaults(func=_cmd_analyze)
    p = sub.add_parser("report", parents=[common], help="render the CD overlay plot and text summary")
    p.add_argument("curves", nargs="+", help="CD csv names or paths")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = _load_config(args)
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"odeflow: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, config)
    except FileNotFoundError as exc:
        print(f"odeflow: {exc}", file=sys.stderr)
        return 1
    except OdeflowError as exc:
        print(f"odeflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
