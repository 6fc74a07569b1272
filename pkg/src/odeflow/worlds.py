"""Synthetic latent worlds: base densities plus closed-form attribute regressors.

A world stands in for the generator+regressor pair of a real image pipeline:
latent points carry N discrete attributes, each read off by a closed-form
logit function that is differentiable almost everywhere.  Four variants:

* ``blobs``  - both attributes are coordinate signs; linearly separable by
  construction, the easy baseline case.  Coordinate 0 is a two-component
  Gaussian mixture so the edited attribute has visibly separated modes.
* ``xor``    - eight angular bumps on a thin shell of radius R; the edited
  attribute is the *parity* of the 45-degree sector (sign of -cos 4theta),
  the polar form of a product-sign label.  The four label-0 bumps sit on the
  coordinate axes, 90 degrees apart, so a translation bounded by R cannot
  swing them all into the diagonal sectors (parking one strands another),
  while an in-plane rotation by 45 degrees maps them there exactly.  The
  nuisance attribute is a radius band split at the shell median, which a
  rotation preserves point by point.
* ``ring``   - edited attribute is a radius band (inside/outside radius r);
  nuisance is an angular sector index, which every translation disturbs
  (angles drift toward the shift direction) while a radial flow does not.
* ``wheel``  - K angular sectors as the edited attribute plus a radius band
  nuisance; exercises cardinalities above 2.

All attribute geometry lives in the "active plane", coordinates 0 and 1;
remaining coordinates are inert standard-normal padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnsatisfiableConditionError
from .numerics import Rng

__all__ = [
    "AttributeSpace",
    "World",
    "make_world",
    "soft_regress",
    "soft_regress_vjp",
    "hard_regress",
    "sample_latent",
    "world_to_items",
    "world_from_items",
]

VARIANTS = ("blobs", "xor", "ring", "wheel")

# Median radius of a 2-D standard normal: balances radius-band labels.
DEFAULT_RADIUS = 1.177
# xor shell geometry.  The shell radius doubles as the radius-band split, so
# both parity and radius labels are balanced by construction.  The radius must
# comfortably exceed the largest shift the linear baselines may take (12), or
# a bounded translation could drag the whole spoke pattern across one sector.
XOR_SHELL_RADIUS = 12.0
XOR_SHELL_SIGMA = 0.5
XOR_ANGLE_SIGMA = 0.18
# Number of alternating-parity spokes; the parity logit uses cos(SPOKES/2 * theta).
XOR_SPOKES = 8

# Consecutive-rejection budget for conditioned sampling.
_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class AttributeSpace:
    """Cardinalities of the discrete attribute vector."""

    cardinalities: tuple[int, ...]

    def __post_init__(self):
        if len(self.cardinalities) == 0:
            raise InvalidInputError("attribute space must have at least one attribute")
        if any(int(c) < 2 for c in self.cardinalities):
            raise InvalidInputError("every attribute needs cardinality >= 2")

    @property
    def n_attributes(self) -> int:
        return len(self.cardinalities)


@dataclass(frozen=True)
class World:
    """Immutable world descriptor.  Build through :func:`make_world`."""

    variant: str
    dim: int
    beta: float
    # variant-specific parameters; unused ones stay at their defaults
    blob_center: float = 2.0
    blob_sigma: float = 0.7
    radius: float = DEFAULT_RADIUS
    shell_sigma: float = XOR_SHELL_SIGMA
    angle_sigma: float = XOR_ANGLE_SIGMA
    sectors: int = 6
    attribute_names: tuple[str, ...] = field(default="", repr=False)
    space: AttributeSpace = field(default=None, repr=False)

    def sector_centers(self, k: int) -> np.ndarray:
        return (np.arange(k) + 0.5) * (2.0 * math.pi / k)


def make_world(
    variant: str,
    dim: int = 2,
    beta: float = 5.0,
    *,
    blob_center: float = 2.0,
    blob_sigma: float = 0.7,
    radius: float | None = None,
    shell_sigma: float = XOR_SHELL_SIGMA,
    angle_sigma: float = XOR_ANGLE_SIGMA,
    sectors: int = 6,
) -> World:
    """Construct a catalog world after validating its parameters."""
    variant = str(variant).lower()
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown world variant {variant!r}, expected one of {VARIANTS}")
    dim = int(dim)
    if dim < 2:
        raise InvalidInputError("world dimension must be >= 2 (attributes live in the first two coordinates)")
    if not (math.isfinite(beta) and beta > 0):
        raise InvalidInputError("beta must be positive and finite")
    if radius is None:
        radius = XOR_SHELL_RADIUS if variant == "xor" else DEFAULT_RADIUS
    if blob_sigma <= 0 or shell_sigma <= 0 or angle_sigma <= 0 or radius <= 0:
        raise InvalidInputError("scale parameters must be positive")
    sectors = int(sectors)
    if sectors < 2:
        raise InvalidInputError("sector count must be >= 2")

    if variant == "blobs":
        names, cards = ("sign-1", "sign-2"), (2, 2)
    elif variant == "xor":
        names, cards = ("sector-parity", "radius-band"), (2, 2)
    elif variant == "ring":
        # nuisance sector count is fixed at 4: coarse enough that labels are
        # stable under metric sampling, fine enough that translations entangle
        names, cards = ("radius-band", "sector"), (2, 4)
    else:
        names, cards = ("sector", "radius-band"), (sectors, 2)

    return World(
        variant=variant,
        dim=dim,
        beta=float(beta),
        blob_center=float(blob_center),
        blob_sigma=float(blob_sigma),
        radius=float(radius),
        shell_sigma=float(shell_sigma),
        angle_sigma=float(angle_sigma),
        sectors=sectors,
        attribute_names=names,
        space=AttributeSpace(cards),
    )


def _check_points(world: World, w: np.ndarray) -> np.ndarray:
    p = np.asarray(w, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != world.dim:
        raise InvalidInputError(f"expected points of dimension {world.dim}, got shape {np.shape(w)}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("latent points must be finite")
    return p


def _angles(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle in [0, 2pi) and radius of the active-plane projection."""
    theta = np.arctan2(p[:, 1], p[:, 0]) % (2.0 * math.pi)
    rho = np.hypot(p[:, 0], p[:, 1])
    return theta, rho


def _sector_logits(world: World, p: np.ndarray, k: int) -> np.ndarray:
    theta, _ = _angles(p)
    centers = world.sector_centers(k)
    return world.beta * np.cos(theta[:, None] - centers[None, :])


def soft_logits(world: World, points: np.ndarray) -> list[np.ndarray]:
    """Batched logits: one (m, cardinality) array per attribute."""
    p = _check_points(world, points)
    b = world.beta
    zero = np.zeros(p.shape[0])
    if world.variant == "blobs":
        return [
            np.stack([zero, b * p[:, 0]], axis=1),
            np.stack([zero, b * p[:, 1]], axis=1),
        ]
    if world.variant == "xor":
        theta, rho = _angles(p)
        half = XOR_SPOKES // 2
        return [
            np.stack([zero, -b * np.cos(half * theta)], axis=1),
            np.stack([zero, b * (rho - world.radius)], axis=1),
        ]
    if world.variant == "ring":
        _, rho = _angles(p)
        return [
            np.stack([zero, b * (rho - world.radius)], axis=1),
            _sector_logits(world, p, world.space.cardinalities[1]),
        ]
    # wheel
    _, rho = _angles(p)
    return [
        _sector_logits(world, p, world.sectors),
        np.stack([zero, b * (rho - world.radius)], axis=1),
    ]


def soft_logits_vjp(world: World, points: np.ndarray, cotangents: list[np.ndarray]) -> np.ndarray:
    """Pull logit cotangents back to latent space: returns (m, dim) gradients.

    ``cotangents[j]`` has shape (m, cardinality_j).  Non-differentiable sets
    (the active-plane origin for angular/radial logits) get gradient zero.
    """
    p = _check_points(world, points)
    m = p.shape[0]
    if len(cotangents) != world.space.n_attributes:
        raise InvalidInputError("need one cotangent array per attribute")
    cots = []
    for j, c in enumerate(cotangents):
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (m, world.space.cardinalities[j]):
            raise InvalidInputError(
                f"cotangent {j} must have shape {(m, world.space.cardinalities[j])}, got {c.shape}"
            )
        cots.append(c)
    grad = np.zeros_like(p)
    b = world.beta

    def add_sector(cot: np.ndarray, k: int):
        theta, rho = _angles(p)
        centers = world.sector_centers(k)
        # d logit_k / d theta = -b sin(theta - c_k); d theta/dw = (-y, x)/rho^2
        dtheta = -b * np.sum(cot * np.sin(theta[:, None] - centers[None, :]), axis=1)
        safe = rho > 0
        inv2 = np.zeros(m)
        inv2[safe] = 1.0 / (rho[safe] ** 2)
        grad[:, 0] += dtheta * (-p[:, 1]) * inv2
        grad[:, 1] += dtheta * p[:, 0] * inv2

    def add_radius(cot: np.ndarray):
        _, rho = _angles(p)
        safe = rho > 0
        inv = np.zeros(m)
        inv[safe] = 1.0 / rho[safe]
        grad[:, 0] += cot[:, 1] * b * p[:, 0] * inv
        grad[:, 1] += cot[:, 1] * b * p[:, 1] * inv

    if world.variant == "blobs":
        grad[:, 0] += b * cots[0][:, 1]
        grad[:, 1] += b * cots[1][:, 1]
    elif world.variant == "xor":
        theta, rho = _angles(p)
        half = XOR_SPOKES // 2
        # d logit_1 / d theta = half * b * sin(half*theta); d theta/dw = (-y, x)/rho^2
        dtheta = cots[0][:, 1] * half * b * np.sin(half * theta)
        safe = rho > 0
        inv2 = np.zeros(m)
        inv2[safe] = 1.0 / (rho[safe] ** 2)
        grad[:, 0] += dtheta * (-p[:, 1]) * inv2
        grad[:, 1] += dtheta * p[:, 0] * inv2
        add_radius(cots[1])
    elif world.variant == "ring":
        add_radius(cots[0])
        add_sector(cots[1], world.space.cardinalities[1])
    else:
        add_sector(cots[0], world.sectors)
        add_radius(cots[1])
    return grad


def hard_labels(world: World, points: np.ndarray) -> np.ndarray:
    """Batched hard labels, shape (m, n_attributes).

    Per attribute the label is the argmax of the soft logits; ties resolve to
    the smallest index (numpy argmax convention).
    """
    logits = soft_logits(world, points)
    return np.stack([np.argmax(l, axis=1) for l in logits], axis=1)


# single-point wrappers


def soft_regress(world: World, w) -> list[np.ndarray]:
    """Logit vector per attribute for a single latent point."""
    return [l[0] for l in soft_logits(world, w)]


def soft_regress_vjp(world: World, w, cotangents: list[np.ndarray]) -> np.ndarray:
    """Gradient of <cotangents, logits(w)> with respect to w."""
    cots = [np.asarray(c, dtype=np.float64)[None, :] for c in cotangents]
    return soft_logits_vjp(world, w, cots)[0]


def hard_regress(world: World, w) -> np.ndarray:
    """Hard label vector for a single latent point."""
    return hard_labels(world, w)[0]


def _base_batch(world: World, rng: Rng, m: int) -> np.ndarray:
    out = rng.normal((m, world.dim))
    if world.variant == "blobs":
        comp = rng.integers(0, 2, m) * 2 - 1
        out[:, 0] = comp * world.blob_center + world.blob_sigma * rng.normal(m)
    elif world.variant == "xor":
        spoke = rng.integers(0, XOR_SPOKES, m)
        theta = spoke * (2.0 * math.pi / XOR_SPOKES) + world.angle_sigma * rng.normal(m)
        rho = world.radius + world.shell_sigma * rng.normal(m)
        out[:, 0] = rho * np.cos(theta)
        out[:, 1] = rho * np.sin(theta)
    return out


def sample_latent(world: World, rng: Rng, condition: tuple[int, int] | None = None, m: int | None = None):
    """Draw latent points from the base density, optionally label-conditioned.

    ``condition=(i, v)`` keeps only points whose hard label at attribute i is
    v, via rejection sampling.  Raises after 10000 consecutive rejections.
    Returns shape (dim,) when ``m`` is None, else (m, dim) in draw order.
    """
    single = m is None
    count = 1 if single else int(m)
    if count < 1:
        raise InvalidInputError("sample count must be >= 1")
    if condition is None:
        out = _base_batch(world, rng, count)
        return out[0] if single else out

    i, v = int(condition[0]), int(condition[1])
    if not (0 <= i < world.space.n_attributes):
        raise InvalidInputError(f"attribute index {i} out of range")
    if not (0 <= v < world.space.cardinalities[i]):
        raise InvalidInputError(f"label {v} out of range for attribute {i}")

    accepted = []
    got = 0
    consecutive = 0
    while got < count:
        chunk = max(64, 2 * (count - got))
        draws = _base_batch(world, rng, chunk)
        ok = hard_labels(world, draws)[:, i] == v
        # enforce the consecutive-rejection budget in draw order
        for start in range(chunk):
            if ok[start]:
                consecutive = 0
            else:
                consecutive += 1
                if consecutive >= _MAX_REJECTIONS:
                    raise UnsatisfiableConditionError(
                        f"no sample with attribute {i} = {v} after {_MAX_REJECTIONS} consecutive rejections"
                    )
        take = draws[ok][: count - got]
        accepted.append(take)
        got += take.shape[0]
    out = np.concatenate(accepted, axis=0)
    return out[0] if single else out


# descriptor serialization (config-format key/value items)

_COMMON_KEYS = ("variant", "dim", "beta")
_VARIANT_KEYS = {
    "blobs": ("blob_center", "blob_sigma"),
    "xor": ("radius", "shell_sigma", "angle_sigma"),
    "ring": ("radius",),
    "wheel": ("sectors", "radius"),
}


def world_to_items(world: World) -> list[tuple[str, str]]:
    """Flatten a world descriptor to ordered key/value pairs."""
    items = [("variant", world.variant), ("dim", str(world.dim)), ("beta", repr(world.beta))]
    for key in _VARIANT_KEYS[world.variant]:
        val = getattr(world, key)
        items.append((key, str(val) if isinstance(val, int) else repr(val)))
    return items


def world_from_items(items: list[tuple[str, str]]) -> World:
    """Rebuild a world from key/value pairs, rejecting unknown keys."""
    table = {}
    for key, value in items:
        if key in table:
            raise InvalidInputError(f"duplicate world key {key!r}")
        table[key] = value
    if "variant" not in table:
        raise InvalidInputError("world descriptor needs a 'variant' key")
    variant = table.pop("variant").lower()
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown world variant {variant!r}")
    allowed = set(_COMMON_KEYS[1:]) | set(_VARIANT_KEYS[variant])
    kwargs = {}
    for key, value in table.items():
        if key not in allowed:
            raise InvalidInputError(f"unknown world key {key!r} for variant {variant!r}")
        try:
            kwargs[key] = int(value) if key in ("dim", "sectors") else float(value)
        except ValueError as exc:
            raise InvalidInputError(f"bad value for world key {key!r}: {value!r}") from exc
    return make_world(variant, **kwargs)
