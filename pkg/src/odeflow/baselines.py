"""Linear-shift baselines: SVM attribute directions and conditioned variants.

The classic linear recipe: pseudo-label latent codes with the world's own
regressor, fit a soft-margin linear SVM, and use the (normalized) weight
vector as an edit direction applied by plain translation w0 + alpha * n.
A direction can be conditioned on others by projecting it onto their
orthogonal complement.  ``to_constant_field`` adapts any direction to the
flow machinery so both method families share one evaluation pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProjectionError,
    InsufficientDataError,
    InvalidInputError,
)
from .fieldflow import ConstantField
from .numerics import Rng
from .worlds import World, hard_labels, sample_latent

__all__ = [
    "SvmConfig",
    "LinearDirection",
    "fit_interfacegan",
    "condition_direction",
    "linear_shift",
    "to_constant_field",
]


@dataclass(frozen=True)
class SvmConfig:
    """Settings for the SVM direction fit."""

    codes: int = 20_000
    lam: float = 1e-3
    epochs: int = 50
    holdout: float = 0.2

    def __post_init__(self):
        if self.codes < 2:
            raise InvalidInputError("need at least two codes")
        if self.lam <= 0:
            raise InvalidInputError("regularization strength must be positive")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if not (0.0 < self.holdout < 1.0):
            raise InvalidInputError("holdout fraction must be in (0, 1)")


@dataclass(frozen=True)
class LinearDirection:
    """A unit edit direction with its fit diagnostics.

    ``direction`` points toward the target label (positive SVM side), the
    fitted bias is kept for diagnostics only and plays no role in edits.
    """

    direction: np.ndarray
    bias: float
    attribute: int
    train_accuracy: float
    holdout_accuracy: float


def fit_interfacegan(world: World, attribute: int, config: SvmConfig, rng: Rng) -> LinearDirection:
    """Fit a linear SVM direction for one attribute from pseudo-labeled codes.

    Codes are drawn from the base density and labeled by the world regressor;
    only the extreme labels 0 and cardinality-1 are kept (binary treatment of
    multi-class attributes).  The solver is the deterministic epoch-ordered
    Pegasos subgradient scheme: samples visited in draw order each epoch,
    learning rate 1/(lam * t), bias unregularized.  The first 80% of kept
    codes train, the rest score the holdout accuracy.
    """
    if not (0 <= attribute < world.space.n_attributes):
        raise InvalidInputError(f"attribute index {attribute} out of range")
    card = world.space.cardinalities[attribute]
    codes = sample_latent(world, rng, m=config.codes)
    labels = hard_labels(world, codes)[:, attribute]
    keep = (labels == 0) | (labels == card - 1)
    x = codes[keep]
    y = np.where(labels[keep] == card - 1, 1.0, -1.0)
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n_pos < 10 or n_neg < 10:
        raise InsufficientDataError(
            f"need >= 10 codes per class, got {n_neg} source / {n_pos} target"
        )

    n_train = max(2, int(round((1.0 - config.holdout) * x.shape[0])))
    n_train = min(n_train, x.shape[0] - 1)
    xt, yt = x[:n_train], y[:n_train]
    xh, yh = x[n_train:], y[n_train:]

    v = np.zeros(world.dim)
    b = 0.0
    t = 0
    for _ in range(config.epochs):
        for idx in range(n_train):
            t += 1
            eta = 1.0 / (config.lam * t)
            decay = 1.0 - eta * config.lam
            if yt[idx] * (xt[idx] @ v + b) < 1.0:
                v = decay * v + eta * yt[idx] * xt[idx]
                b = b + eta * yt[idx]
            else:
                v = decay * v

    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise DegenerateProjectionError("SVM weight vector collapsed to zero")
    direction = v / norm

    def accuracy(px, py):
        if px.shape[0] == 0:
            return float("nan")
        return float(np.mean(np.sign(px @ v + b) == py))

    return LinearDirection(
        direction=direction,
        bias=float(b),
        attribute=attribute,
        train_accuracy=accuracy(xt, yt),
        holdout_accuracy=accuracy(xh, yh),
    )


def condition_direction(direction: np.ndarray, others: list[np.ndarray]) -> np.ndarray:
    """Project ``direction`` onto the orthogonal complement of ``others``.

    The conditioning directions are orthonormalized in order first; a residual
    below 1e-10 anywhere (dependent conditioners, or a direction inside their
    span) raises :class:`DegenerateProjectionError`.  Result is unit length.
    """
    d = np.asarray(direction, dtype=np.float64).copy()
    if d.ndim != 1 or not np.all(np.isfinite(d)):
        raise InvalidInputError("direction must be a finite vector")
    basis = []
    for k, other in enumerate(others):
        q = np.asarray(other, dtype=np.float64).copy()
        if q.shape != d.shape or not np.all(np.isfinite(q)):
            raise InvalidInputError(f"conditioning direction {k} has bad shape or values")
        for e in basis:
            q -= (q @ e) * e
        norm = float(np.linalg.norm(q))
        if norm < 1e-10:
            raise DegenerateProjectionError(f"conditioning direction {k} is dependent on the others")
        basis.append(q / norm)
    for e in basis:
        d -= (d @ e) * e
    norm = float(np.linalg.norm(d))
    if norm < 1e-10:
        raise DegenerateProjectionError("direction lies in the span of the conditioning set")
    return d / norm


def linear_shift(w0, direction, alpha: float) -> np.ndarray:
    """Translate a latent point: w0 + alpha * direction."""
    w = np.asarray(w0, dtype=np.float64)
    n = np.asarray(direction, dtype=np.float64)
    if w.shape != n.shape or w.ndim != 1:
        raise InvalidInputError("w0 and direction must be matching vectors")
    if not np.isfinite(alpha):
        raise InvalidInputError("alpha must be finite")
    return w + float(alpha) * n


def to_constant_field(direction) -> ConstantField:
    """Wrap a direction as a constant field so flows and shifts share pipelines."""
    return ConstantField(direction)
