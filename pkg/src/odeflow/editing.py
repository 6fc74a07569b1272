"""Training ODE flows to perform attribute edits.

An edit takes attribute i from the source label 0 to the target label
(cardinality_i - 1).  The objective at a sampled horizon T is

    L = L1 + L2
    L1 = cross-entropy of attribute i's logits at w(T) against the target
    L2 = mean over j != i of cross-entropy of attribute j's logits at w(T)
         against the start point's hard labels

so the flow must move the edited attribute while pinning the others.  Each
training sample draws its own horizon T ~ U[T_max/4, T_max]; the spread keeps
the flow useful along the whole trajectory instead of only at one arrival
time.  Gradients come from the discrete adjoint in :mod:`odeflow.fieldflow`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fieldflow, worlds
from .errors import InvalidInputError, TrainingFailedError
from .fieldflow import _FieldBase, integrate, integrate_batch, rk4_backward
from .numerics import AdamState, Rng, adam_step
from .textio import atomic_write_text, format_sections, parse_sections
from .worlds import AttributeSpace, World

__all__ = [
    "TrainConfig",
    "EditModel",
    "make_target",
    "sample_time",
    "cross_entropy",
    "edit_loss",
    "train_edit",
    "train_edit_restarts",
    "compose_edits",
    "save_edit_model",
    "load_edit_model",
]


# Generator tags: train_edit consumes 1 (starts) and 2 (horizons); restart
# initialization draws from tag 3 so it never shares a stream with training.
INIT_TAG = 3
# Loss window used both for restart selection and for reporting: mean total
# loss over the last this-many iterations (or all of them when shorter).
LOSS_TAIL = 200
# Seed offset between restart candidates.  Large and prime so the derived
# seeds of practical runs (small seeds, single-digit restart counts) never
# collide with each other or with other runs' base seeds.
RESTART_SEED_STRIDE = 77_003


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for :func:`train_edit`.

    ``restarts``/``accept_loss`` only matter to :func:`train_edit_restarts`:
    up to ``restarts`` candidates are trained and the lowest-loss one kept,
    stopping early once a candidate's tail loss reaches ``accept_loss``.
    """

    iterations: int = 5000
    batch_size: int = 24
    t_max: float = 12.0
    steps: int = fieldflow.N_STEPS_TRAIN
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    restarts: int = 1
    accept_loss: float | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1 or self.steps < 1:
            raise InvalidInputError("iterations, batch_size, and steps must be >= 1")
        if not (self.t_max > 0 and np.isfinite(self.t_max)):
            raise InvalidInputError("t_max must be positive and finite")
        if self.lr <= 0:
            raise InvalidInputError("learning rate must be positive")
        if self.restarts < 1:
            raise InvalidInputError("restart count must be >= 1")
        if self.accept_loss is not None and not (
            np.isfinite(self.accept_loss) and self.accept_loss > 0
        ):
            raise InvalidInputError("accept_loss must be positive and finite when set")


@dataclass
class EditModel:
    """A trained edit: the field plus everything needed to run and evaluate it."""

    field: _FieldBase
    world: World
    attribute: int
    source_label: int
    target_label: int
    t_max: float
    # rows of (total loss, L1, L2) per iteration; empty for loaded models
    history: np.ndarray = dc_field(default_factory=lambda: np.zeros((0, 3)))

    def tail_loss(self) -> float:
        """Mean total loss over the final LOSS_TAIL iterations (nan if none)."""
        if self.history.shape[0] == 0:
            return float("nan")
        return float(np.mean(self.history[-LOSS_TAIL:, 0]))


def make_target(labels, attribute: int, space: AttributeSpace) -> np.ndarray:
    """Reflect coordinate ``attribute``: label v becomes (cardinality-1) - v.

    For the training convention (source label 0) this lands on the top label;
    for binary attributes it is the flip 1 - v, so applying it twice restores
    the input.
    """
    labels = np.asarray(labels, dtype=np.int64).copy()
    if labels.shape != (space.n_attributes,):
        raise InvalidInputError(f"expected {space.n_attributes} labels, got shape {labels.shape}")
    if not (0 <= attribute < space.n_attributes):
        raise InvalidInputError(f"attribute index {attribute} out of range")
    for j, v in enumerate(labels):
        if not (0 <= v < space.cardinalities[j]):
            raise InvalidInputError(f"label {v} out of range for attribute {j}")
    card = space.cardinalities[attribute]
    labels[attribute] = (card - 1) - labels[attribute]
    return labels


def sample_time(rng: Rng, t_max: float) -> float:
    """Horizon draw: uniform on [t_max/4, t_max]."""
    if not (t_max > 0 and np.isfinite(t_max)):
        raise InvalidInputError("t_max must be positive and finite")
    return float(rng.uniform(t_max / 4.0, t_max))


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Natural-log cross-entropy of a logit vector against a hard label."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or not (0 <= label < z.shape[0]):
        raise InvalidInputError("bad logits/label for cross_entropy")
    zmax = np.max(z)
    return float(zmax + np.log(np.sum(np.exp(z - zmax))) - z[label])


def _batch_loss_terms(world: World, endpoints: np.ndarray, attribute: int, start_labels: np.ndarray):
    """Per-sample (L1, L2) and the logit cotangents of the mean total loss."""
    m = endpoints.shape[0]
    n_attr = world.space.n_attributes
    target = world.space.cardinalities[attribute] - 1
    logits = worlds.soft_logits(world, endpoints)
    cots = []
    l1 = np.zeros(m)
    l2 = np.zeros(m)
    for j, z in enumerate(logits):
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        lse = zmax[:, 0] + np.log(ez.sum(axis=1))
        p = ez / ez.sum(axis=1, keepdims=True)
        if j == attribute:
            picked = z[np.arange(m), target]
            l1 += lse - picked
            weight = 1.0
            labels_j = np.full(m, target)
        else:
            labels_j = start_labels[:, j]
            picked = z[np.arange(m), labels_j]
            l2 += (lse - picked) / max(n_attr - 1, 1)
            weight = 1.0 / max(n_attr - 1, 1)
        cot = weight * p
        cot[np.arange(m), labels_j] -= weight
        cots.append(cot / m)  # mean over the batch
    if n_attr == 1:
        l2[:] = 0.0
    return l1, l2, cots


def edit_loss(world: World, field: _FieldBase, w0, t: float, attribute: int, n_steps: int | None = None):
    """Loss terms for a single start: returns (total, l1, l2).

    Start labels for the pinning term come from the start point itself.
    """
    if not (0 <= attribute < world.space.n_attributes):
        raise InvalidInputError(f"attribute index {attribute} out of range")
    w0 = np.asarray(w0, dtype=np.float64)
    steps = fieldflow.N_STEPS_TRAIN if n_steps is None else int(n_steps)
    endpoint = integrate(field, w0, t, steps).endpoint
    start_labels = worlds.hard_labels(world, w0[None, :])
    l1, l2, _ = _batch_loss_terms(world, endpoint[None, :], attribute, start_labels)
    return float(l1[0] + l2[0]), float(l1[0]), float(l2[0])


def train_edit(world: World, attribute: int, init_field: _FieldBase, config: TrainConfig) -> EditModel:
    """Fit a field so its flow performs the (0 -> top label) edit of ``attribute``.

    Deterministic for a fixed config: starts, horizons, and initialization all
    derive from ``config.seed``.  Raises :class:`TrainingFailedError` with the
    iteration index if the loss or gradient goes non-finite.
    """
    if not (0 <= attribute < world.space.n_attributes):
        raise InvalidInputError(f"attribute index {attribute} out of range")
    if init_field.dim != world.dim:
        raise InvalidInputError("field dimension does not match world dimension")

    root = Rng(config.seed)
    rng_starts = root.split(1)
    rng_times = root.split(2)

    field = init_field
    params = field.params
    adam = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    history = np.zeros((config.iterations, 3))
    source = 0
    target = world.space.cardinalities[attribute] - 1

    for it in range(config.iterations):
        starts = worlds.sample_latent(world, rng_starts, condition=(attribute, source), m=config.batch_size)
        horizons = rng_times.uniform(config.t_max / 4.0, config.t_max, config.batch_size)
        start_labels = worlds.hard_labels(world, starts)

        states, stages = integrate_batch(field, starts, horizons, config.steps, keep_stages=True)
        endpoints = states[-1]
        l1, l2, cots = _batch_loss_terms(world, endpoints, attribute, start_labels)
        total = float(np.mean(l1 + l2))
        if not np.isfinite(total):
            raise TrainingFailedError("non-finite training loss", iteration=it)
        history[it] = (total, float(np.mean(l1)), float(np.mean(l2)))

        end_cot = worlds.soft_logits_vjp(world, endpoints, cots)
        h = (horizons / config.steps)[:, None]
        grad_params, _ = rk4_backward(field, stages, h, end_cot)
        if not np.all(np.isfinite(grad_params)):
            raise TrainingFailedError("non-finite gradient", iteration=it)
        params = adam_step(adam, params, grad_params)
        field = field.with_params(params)

    return EditModel(
        field=field,
        world=world,
        attribute=attribute,
        source_label=source,
        target_label=target,
        t_max=config.t_max,
        history=history,
    )


def train_edit_restarts(world: World, attribute: int, init_fn, config: TrainConfig) -> EditModel:
    """Train up to ``config.restarts`` candidates and keep the lowest-loss one.

    The loss landscape has optima of very different quality, and which basin
    gradient descent lands in depends on the initialization.  Candidate r
    trains under seed ``config.seed + r * RESTART_SEED_STRIDE`` with an
    initial field drawn by ``init_fn(rng)`` from that seed's stream, so the
    whole search is a pure function of the config.  Selection compares the
    mean total loss over each candidate's final iterations and never touches
    evaluation metrics, so it cannot overfit the benchmark.  When
    ``config.accept_loss`` is set the search stops at the first candidate at
    or below it; candidate 0 reproduces ``train_edit`` under the same config.
    """
    best = None
    best_loss = np.inf
    for r in range(config.restarts):
        sub = dataclasses.replace(config, seed=config.seed + r * RESTART_SEED_STRIDE)
        field0 = init_fn(Rng(sub.seed).split(INIT_TAG))
        model = train_edit(world, attribute, field0, sub)
        loss = model.tail_loss()
        if loss < best_loss:
            best, best_loss = model, loss
        if config.accept_loss is not None and loss <= config.accept_loss:
            break
    return best


def compose_edits(models: list[EditModel], w0, times: list[float], n_steps: int = fieldflow.N_STEPS_EVAL) -> np.ndarray:
    """Apply edits sequentially: each model integrates from the previous endpoint.

    All models must belong to the same world.  Empty input returns the start.
    """
    w = np.asarray(w0, dtype=np.float64).copy()
    if len(models) != len(times):
        raise InvalidInputError("need one time per model")
    if not models:
        return w
    world = models[0].world
    for model in models[1:]:
        if model.world != world:
            raise InvalidInputError("compose_edits requires models from the same world")
    for model, t in zip(models, times):
        w = integrate(model.field, w, t, n_steps).endpoint
    return w


# persistence: fieldflow checkpoint + sidecar metadata in the config format


def save_edit_model(model: EditModel, checkpoint_path, meta_path) -> None:
    fieldflow.write_checkpoint(checkpoint_path, model.field)
    meta = format_sections(
        [
            ("world", [(k, v) for k, v in worlds.world_to_items(model.world)]),
            (
                "edit",
                [
                    ("attribute", str(model.attribute)),
                    ("source", str(model.source_label)),
                    ("target", str(model.target_label)),
                    ("t_max", repr(float(model.t_max))),
                ],
            ),
        ]
    )
    atomic_write_text(meta_path, meta)


def load_edit_model(checkpoint_path, meta_path) -> EditModel:
    field = fieldflow.read_checkpoint(checkpoint_path)
    with open(meta_path, "r", encoding="ascii") as fh:
        sections = parse_sections(fh.read())
    if set(sections) != {"world", "edit"}:
        raise InvalidInputError("model metadata needs exactly [world] and [edit] sections")
    world = worlds.world_from_items([(k, v) for k, (v, _) in sections["world"].items()])
    edit = {k: v for k, (v, _) in sections["edit"].items()}
    required = {"attribute", "source", "target", "t_max"}
    if set(edit) != required:
        raise InvalidInputError(f"model metadata [edit] must have keys {sorted(required)}")
    attribute = int(edit["attribute"])
    model = EditModel(
        field=field,
        world=world,
        attribute=attribute,
        source_label=int(edit["source"]),
        target_label=int(edit["target"]),
        t_max=float(edit["t_max"]),
    )
    if field.dim != world.dim:
        raise InvalidInputError("checkpoint dimension does not match world dimension")
    if not (0 <= attribute < world.space.n_attributes):
        raise InvalidInputError("model attribute index out of range for its world")
    return model
