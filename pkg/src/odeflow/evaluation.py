"""Control and disentanglement metrics along edit trajectories.

For an edit of attribute i evaluated at prefix time tau:

* Control C(tau): fraction of source-conditioned starts whose hard label at
  w(tau) equals the target.
* Disentanglement D(tau): mean over nuisance attributes j != i of the
  normalized entropy of the hard labels visited along the prefix [0, tau]
  (traj_samples + 1 evenly spaced reads from the stored trajectory, entropy
  in nats divided by ln(cardinality_j)).  D is 0 exactly when every nuisance
  label holds steady along the prefix, and D(0) = 0 by construction.

A CD curve samples both on a shared tau grid using one trajectory per start,
integrated once to the full horizon and read at prefixes.  The linear-edit
oracle brute-forces translations over a direction grid in the active plane
and an alpha grid, scoring control only; it certifies what the best possible
translation can reach, independent of how a direction might be fitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import worlds
from .errors import InvalidInputError, UndefinedMetricError
from .fieldflow import _FieldBase, integrate, integrate_batch
from .numerics import Rng
from .textio import atomic_write_text
from .worlds import World

__all__ = [
    "EvalConfig",
    "CDCurve",
    "control_at",
    "disentanglement_at",
    "cd_curve",
    "OracleResult",
    "best_linear_oracle",
    "write_cd_csv",
    "read_cd_csv",
]


@dataclass(frozen=True)
class EvalConfig:
    """Metric sampling settings.

    ``steps`` defaults to a multiple of ``tau_grid`` so every grid time lands
    exactly on a stored trajectory sample.
    """

    samples: int = 1024
    tau_grid: int = 48
    traj_samples: int = 64
    steps: int = 240

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidInputError("samples must be >= 1")
        if self.tau_grid < 1:
            raise InvalidInputError("tau_grid must be >= 1")
        if self.traj_samples < 1:
            raise InvalidInputError("traj_samples must be >= 1")
        if self.steps < self.tau_grid:
            raise InvalidInputError("steps must be >= tau_grid")


@dataclass(frozen=True)
class CDCurve:
    """Metric values on an ascending tau grid starting at 0."""

    taus: np.ndarray
    control: np.ndarray
    disentanglement: np.ndarray
    n_samples: int
    attribute: int | None = None
    target: int | None = None

    def __post_init__(self):
        k = self.taus.shape[0]
        if self.control.shape != (k,) or self.disentanglement.shape != (k,):
            raise InvalidInputError("curve arrays must share one length")
        if k < 1 or self.taus[0] != 0.0 or np.any(np.diff(self.taus) <= 0):
            raise InvalidInputError("tau grid must ascend from 0")
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")


def _check_attribute(world: World, attribute: int) -> int:
    if not (0 <= attribute < world.space.n_attributes):
        raise InvalidInputError(f"attribute index {attribute} out of range")
    return int(attribute)


def _entropy_rows(labels: np.ndarray, cardinality: int) -> np.ndarray:
    """Normalized label entropy per column of a (reads, m) label array."""
    reads = labels.shape[0]
    h = np.zeros(labels.shape[1])
    for c in range(cardinality):
        p = np.count_nonzero(labels == c, axis=0) / reads
        nz = p > 0
        h[nz] -= p[nz] * np.log(p[nz])
    return h / math.log(cardinality)


def _prefix_indices(end_index: int, reads: int) -> np.ndarray:
    """Evenly spaced stored-sample indices covering [0, end_index]."""
    return np.rint(np.linspace(0.0, end_index, reads)).astype(int)


def control_at(
    world: World, field: _FieldBase, w0, tau: float, attribute: int, target: int, n_steps: int = 240
) -> int:
    """Indicator that the edited attribute reads the target label at w(tau)."""
    i = _check_attribute(world, attribute)
    if not (0 <= target < world.space.cardinalities[i]):
        raise InvalidInputError(f"target label {target} out of range for attribute {i}")
    if tau < 0 or not np.isfinite(tau):
        raise UndefinedMetricError("tau must be finite and >= 0")
    w0 = np.asarray(w0, dtype=np.float64)
    state = w0 if tau == 0.0 else integrate(field, w0, tau, n_steps).endpoint
    return int(worlds.hard_regress(world, state)[i] == target)


def disentanglement_at(
    world: World,
    field: _FieldBase,
    w0,
    tau: float,
    attribute: int,
    traj_samples: int = 64,
    n_steps: int = 240,
) -> float:
    """Normalized visited-label entropy of the nuisance attributes on [0, tau]."""
    i = _check_attribute(world, attribute)
    if world.space.n_attributes < 2:
        raise UndefinedMetricError("disentanglement needs at least one nuisance attribute")
    if tau < 0 or not np.isfinite(tau):
        raise UndefinedMetricError("tau must be finite and >= 0")
    if tau == 0.0:
        return 0.0
    traj = integrate(field, np.asarray(w0, dtype=np.float64), tau, n_steps)
    idx = _prefix_indices(n_steps, traj_samples + 1)
    points = traj.states[idx]
    labels = worlds.hard_labels(world, points)
    total = 0.0
    for j, card in enumerate(world.space.cardinalities):
        if j == i:
            continue
        total += float(_entropy_rows(labels[:, j][:, None], card)[0])
    return total / (world.space.n_attributes - 1)


def cd_curve(
    world: World,
    field: _FieldBase,
    attribute: int,
    t_max: float,
    config: EvalConfig,
    rng: Rng,
    source: int = 0,
    target: int | None = None,
) -> CDCurve:
    """Control/disentanglement curve over a shared tau grid.

    Draws source-conditioned starts once, integrates each to t_max once, and
    reads every prefix from the stored trajectory, so points along the curve
    are perfectly correlated across tau (paired samples).  ``target`` defaults
    to the label the edit convention pairs with source 0.
    """
    i = _check_attribute(world, attribute)
    if world.space.n_attributes < 2:
        raise UndefinedMetricError("disentanglement needs at least one nuisance attribute")
    if not (t_max > 0 and np.isfinite(t_max)):
        raise InvalidInputError("t_max must be positive and finite")
    card = world.space.cardinalities[i]
    if target is None:
        target = card - 1 - source
    if not (0 <= source < card and 0 <= target < card):
        raise InvalidInputError("source/target labels out of range")
    m = config.samples
    starts = worlds.sample_latent(world, rng, condition=(i, source), m=m)
    states, _ = integrate_batch(field, starts, t_max, config.steps)

    n_read = config.steps + 1
    flat = states.reshape(n_read * m, world.dim)
    labels = worlds.hard_labels(world, flat).reshape(n_read, m, world.space.n_attributes)

    taus = np.linspace(0.0, t_max, config.tau_grid + 1)
    grid_idx = np.rint(np.linspace(0.0, config.steps, config.tau_grid + 1)).astype(int)
    control = np.zeros(config.tau_grid + 1)
    disent = np.zeros(config.tau_grid + 1)
    nuisance = [j for j in range(world.space.n_attributes) if j != i]
    for k, idx in enumerate(grid_idx):
        control[k] = float(np.mean(labels[idx, :, i] == target))
        if idx == 0:
            disent[k] = 0.0
            continue
        reads = _prefix_indices(idx, config.traj_samples + 1)
        acc = 0.0
        for j in nuisance:
            acc += float(np.mean(_entropy_rows(labels[reads, :, j], world.space.cardinalities[j])))
        disent[k] = acc / len(nuisance)
    return CDCurve(
        taus=taus,
        control=control,
        disentanglement=disent,
        n_samples=m,
        attribute=i,
        target=target,
    )


@dataclass(frozen=True)
class OracleResult:
    """Brute-force translation sweep: control for every (direction, alpha)."""

    directions: np.ndarray  # (n_directions, dim) unit vectors in the active plane
    alphas: np.ndarray  # (n_alphas,) shift magnitudes in (0, t_max]
    control: np.ndarray  # (n_directions, n_alphas) mean control
    best_direction_index: int
    best_alpha_index: int

    @property
    def best_direction(self) -> np.ndarray:
        return self.directions[self.best_direction_index]

    @property
    def best_alpha(self) -> float:
        return float(self.alphas[self.best_alpha_index])

    @property
    def best_control(self) -> float:
        return float(self.control[self.best_direction_index, self.best_alpha_index])

    @property
    def per_direction_best(self) -> np.ndarray:
        return self.control.max(axis=1)


def best_linear_oracle(
    world: World,
    attribute: int,
    t_max: float,
    config: EvalConfig,
    rng: Rng,
    n_directions: int = 360,
    n_alphas: int = 64,
) -> OracleResult:
    """Exhaustive translation baseline over the active attribute plane.

    Sweeps ``n_directions`` uniformly spaced unit directions and ``n_alphas``
    uniformly spaced shift sizes in (0, t_max], scoring mean control over one
    shared set of source-conditioned starts.  The best entry maximizes
    control, breaking ties by smaller alpha and then by grid order.
    """
    i = _check_attribute(world, attribute)
    if n_directions < 1 or n_alphas < 1:
        raise InvalidInputError("direction and alpha grids must be non-empty")
    if not (t_max > 0 and np.isfinite(t_max)):
        raise InvalidInputError("t_max must be positive and finite")
    target = world.space.cardinalities[i] - 1
    m = config.samples
    starts = worlds.sample_latent(world, rng, condition=(i, 0), m=m)

    angles = 2.0 * math.pi * np.arange(n_directions) / n_directions
    directions = np.zeros((n_directions, world.dim))
    directions[:, 0] = np.cos(angles)
    directions[:, 1] = np.sin(angles)
    alphas = t_max * np.arange(1, n_alphas + 1) / n_alphas

    control = np.zeros((n_directions, n_alphas))
    for g in range(n_directions):
        shifted = starts[None, :, :] + alphas[:, None, None] * directions[g][None, None, :]
        flat = shifted.reshape(n_alphas * m, world.dim)
        lab = worlds.hard_labels(world, flat)[:, i].reshape(n_alphas, m)
        control[g] = np.mean(lab == target, axis=1)

    best = control.max()
    dir_idx, alpha_idx = np.nonzero(control == best)
    order = np.lexsort((dir_idx, alpha_idx))
    pick = order[0]
    return OracleResult(
        directions=directions,
        alphas=alphas,
        control=control,
        best_direction_index=int(dir_idx[pick]),
        best_alpha_index=int(alpha_idx[pick]),
    )


# CSV persistence

_CD_HEADER = "tau,control,disentanglement,n_samples"


def write_cd_csv(path, curve: CDCurve) -> None:
    """CSV with 9-significant-digit floats; value-identical after a round trip."""
    lines = [_CD_HEADER]
    for k in range(curve.taus.shape[0]):
        lines.append(
            f"{curve.taus[k]:.9g},{curve.control[k]:.9g},{curve.disentanglement[k]:.9g},{curve.n_samples}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_cd_csv(path) -> CDCurve:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _CD_HEADER:
        raise InvalidInputError(f"bad CD csv header, expected {_CD_HEADER!r}")
    taus, control, disent, counts = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise InvalidInputError(f"bad CD csv row {ln!r}")
        try:
            taus.append(float(parts[0]))
            control.append(float(parts[1]))
            disent.append(float(parts[2]))
            counts.append(int(parts[3]))
        except ValueError as exc:
            raise InvalidInputError(f"bad CD csv row {ln!r}") from exc
    if not taus or len(set(counts)) != 1:
        raise InvalidInputError("CD csv must be non-empty with a constant n_samples")
    return CDCurve(
        taus=np.array(taus),
        control=np.array(control),
        disentanglement=np.array(disent),
        n_samples=counts[0],
    )
