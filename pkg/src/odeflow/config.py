"""Experiment configuration: schema, defaults, parsing, canonical rendering.

A config file has up to six sections.  Every key is optional; an empty file
yields the documented defaults.

    [world]     variant, dim, beta + variant parameters
    [train]     field kind/architecture, attribute index, optimizer schedule
    [eval]      metric sample counts and grids
    [svm]       linear-baseline fit settings
    [spectral]  truncation k, fast/slow threshold
    [run]       seed, output directory

Unknown sections, unknown keys, duplicate keys, and malformed values are all
rejected; membership and syntax errors carry 1-based line numbers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .baselines import SvmConfig
from .editing import TrainConfig
from .errors import ConfigError, InvalidInputError
from .evaluation import EvalConfig
from .textio import coerce, format_sections, parse_sections
from .worlds import World, make_world, world_to_items

__all__ = ["ExperimentConfig", "parse_config", "default_config", "format_config", "FIELD_KINDS"]

FIELD_KINDS = ("constant", "affine", "net")

_WORLD_KINDS = {
    "variant": "str",
    "dim": "int",
    "beta": "float",
    "blob_center": "float",
    "blob_sigma": "float",
    "radius": "float",
    "shell_sigma": "float",
    "angle_sigma": "float",
    "sectors": "int",
}
_TRAIN_KINDS = {
    "field": "str",
    "depth": "int",
    "width": "int",
    "attribute": "int",
    "iterations": "int",
    "batch_size": "int",
    "t_max": "float",
    "steps": "int",
    "lr": "float",
    "beta1": "float",
    "beta2": "float",
    "eps": "float",
    "restarts": "int",
    "accept_loss": "float",
}
_EVAL_KINDS = {"samples": "int", "tau_grid": "int", "traj_samples": "int", "steps": "int"}
_SVM_KINDS = {"codes": "int", "lam": "float", "epochs": "int", "holdout": "float"}
_SPECTRAL_KINDS = {"k": "int", "fast_threshold": "float"}
_RUN_KINDS = {"seed": "int", "out": "str"}

_SECTION_KINDS = {
    "world": _WORLD_KINDS,
    "train": _TRAIN_KINDS,
    "eval": _EVAL_KINDS,
    "svm": _SVM_KINDS,
    "spectral": _SPECTRAL_KINDS,
    "run": _RUN_KINDS,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete run description with every default resolved."""

    world: World
    train: TrainConfig
    eval: EvalConfig
    svm: SvmConfig
    field_kind: str = "net"
    depth: int = 1
    width: int | None = None  # None means world dimension
    attribute: int = 0
    spectral_k: int | None = None  # None means quarter-dimension rule
    fast_threshold: float = 5.0
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if self.field_kind not in FIELD_KINDS:
            raise InvalidInputError(f"field kind must be one of {FIELD_KINDS}")
        if not (1 <= self.depth <= 3):
            raise InvalidInputError("net depth must be 1, 2, or 3")
        if self.width is not None and self.width < 1:
            raise InvalidInputError("net width must be >= 1")
        if not (0 <= self.attribute < self.world.space.n_attributes):
            raise InvalidInputError("attribute index out of range for the world")
        if self.spectral_k is not None and self.spectral_k < 1:
            raise InvalidInputError("spectral k must be >= 1")
        if self.fast_threshold <= 1.0:
            raise InvalidInputError("fast_threshold must exceed 1")
        if self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")

    @property
    def net_width(self) -> int:
        return self.world.dim if self.width is None else self.width

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(
            self, seed=seed, train=dataclasses.replace(self.train, seed=seed)
        )

    def with_out(self, out: str) -> "ExperimentConfig":
        return dataclasses.replace(self, out=out)


def _typed_section(sections, name: str) -> dict:
    kinds = _SECTION_KINDS[name]
    out = {}
    for key, (raw, line) in sections.get(name, {}).items():
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in section [{name}]", line=line)
        out[key] = coerce(name, key, raw, line, kinds[key])
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text, filling defaults for everything unspecified."""
    sections = parse_sections(text)
    for name, items in sections.items():
        if name not in _SECTION_KINDS:
            lines = [line for (_, line) in items.values()]
            raise ConfigError(f"unknown section [{name}]", line=min(lines) if lines else None)

    world_kv = _typed_section(sections, "world")
    train_kv = _typed_section(sections, "train")
    eval_kv = _typed_section(sections, "eval")
    svm_kv = _typed_section(sections, "svm")
    spectral_kv = _typed_section(sections, "spectral")
    run_kv = _typed_section(sections, "run")

    try:
        variant = world_kv.pop("variant", "blobs")
        world_kv.setdefault("dim", 8)
        world = make_world(variant, **world_kv)

        seed = run_kv.get("seed", 0)
        field_kind = train_kv.pop("field", "net").lower()
        depth = train_kv.pop("depth", 1)
        width = train_kv.pop("width", None)
        attribute = train_kv.pop("attribute", 0)
        train = TrainConfig(seed=seed, **train_kv)
        return ExperimentConfig(
            world=world,
            train=train,
            eval=EvalConfig(**eval_kv),
            svm=SvmConfig(**svm_kv),
            field_kind=field_kind,
            depth=depth,
            width=width,
            attribute=attribute,
            spectral_k=spectral_kv.get("k"),
            fast_threshold=spectral_kv.get("fast_threshold", 5.0),
            seed=seed,
            out=run_kv.get("out", "out"),
        )
    except TypeError as exc:
        # unreachable for schema-checked keys; guards against future drift
        raise ConfigError(str(exc)) from exc
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def default_config() -> ExperimentConfig:
    return parse_config("")


def format_config(config: ExperimentConfig) -> str:
    """Canonical text with every value explicit; parses back to ``config``."""
    train_items = [
        ("field", config.field_kind),
        ("depth", str(config.depth)),
        ("attribute", str(config.attribute)),
        ("iterations", str(config.train.iterations)),
        ("batch_size", str(config.train.batch_size)),
        ("t_max", repr(config.train.t_max)),
        ("steps", str(config.train.steps)),
        ("lr", repr(config.train.lr)),
        ("beta1", repr(config.train.beta1)),
        ("beta2", repr(config.train.beta2)),
        ("eps", repr(config.train.eps)),
        ("restarts", str(config.train.restarts)),
    ]
    if config.train.accept_loss is not None:
        train_items.append(("accept_loss", repr(config.train.accept_loss)))
    if config.width is not None:
        train_items.insert(2, ("width", str(config.width)))
    spectral_items = [("fast_threshold", repr(config.fast_threshold))]
    if config.spectral_k is not None:
        spectral_items.insert(0, ("k", str(config.spectral_k)))
    return format_sections(
        [
            ("world", world_to_items(config.world)),
            ("train", train_items),
            (
                "eval",
                [
                    ("samples", str(config.eval.samples)),
                    ("tau_grid", str(config.eval.tau_grid)),
                    ("traj_samples", str(config.eval.traj_samples)),
                    ("steps", str(config.eval.steps)),
                ],
            ),
            (
                "svm",
                [
                    ("codes", str(config.svm.codes)),
                    ("lam", repr(config.svm.lam)),
                    ("epochs", str(config.svm.epochs)),
                    ("holdout", repr(config.svm.holdout)),
                ],
            ),
            ("spectral", spectral_items),
            ("run", [("seed", str(config.seed)), ("out", config.out)]),
        ]
    )
