"""Trainable vector fields and unit-speed ODE trajectories.

The edit dynamics are dw/dt = f(w) / max(||f(w)||, EPS_NORM), so the flow
moves at unit speed wherever the raw field is healthy and time equals arc
length.  Integration is classical fixed-step RK4.  Gradients follow the
discretize-then-differentiate rule: the forward pass stores every RK4 stage
input and the backward pass runs reverse-mode through the exact discrete
recursion, so the returned gradient is the true gradient of the discrete
endpoint, not an approximation of the continuous adjoint.

Field kinds:

* constant - f(w) = theta, a pure direction
* affine   - f(w) = A w + b
* net      - MLP of depth 1..3 with LeakyReLU(0.2) hidden activations and a
  linear final layer; depth 1 is exactly affine

All batched operations take (m, dim) arrays and reduce in row order, so
results are deterministic for a fixed input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CheckpointFormatError,
    IntegrationDivergedError,
    InvalidInputError,
)
from .numerics import Rng

__all__ = [
    "EPS_NORM",
    "N_STEPS_EVAL",
    "N_STEPS_TRAIN",
    "NetSpec",
    "ConstantField",
    "AffineField",
    "NetField",
    "init_net_params",
    "net_forward",
    "net_vjp",
    "velocity",
    "Trajectory",
    "integrate",
    "integrate_batch",
    "rk4_backward",
    "adjoint_grad",
    "adjoint_batch",
    "write_checkpoint",
    "read_checkpoint",
    "stationary_warning_count",
    "reset_stationary_warnings",
]

EPS_NORM = 1e-8
N_STEPS_EVAL = 256
N_STEPS_TRAIN = 64
LEAKY_ALPHA = 0.2

# Diagnostic counter: bumped whenever a velocity evaluation sees a raw field
# norm below EPS_NORM.  Plain module state; not safe across threads.
_stationary_warnings = 0


def stationary_warning_count() -> int:
    return _stationary_warnings


def reset_stationary_warnings() -> None:
    global _stationary_warnings
    _stationary_warnings = 0


def _bump_stationary(n: int) -> None:
    global _stationary_warnings
    if n:
        _stationary_warnings += int(n)


@dataclass(frozen=True)
class NetSpec:
    """Shape of an MLP field: depth linear layers, hidden width, LeakyReLU slope."""

    dim: int
    depth: int
    width: int
    alpha: float = LEAKY_ALPHA

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("net dim must be >= 1")
        if self.depth not in (1, 2, 3):
            raise InvalidInputError("net depth must be 1, 2, or 3")
        if self.depth > 1 and self.width < 1:
            raise InvalidInputError("hidden width must be >= 1 for depth > 1")
        if not (0.0 <= self.alpha < 1.0):
            raise InvalidInputError("leaky slope must be in [0, 1)")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) per linear layer, in forward order."""
        d, h = self.dim, self.width
        if self.depth == 1:
            return [(d, d)]
        if self.depth == 2:
            return [(h, d), (d, h)]
        return [(h, d), (h, h), (d, h)]

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


def init_net_params(spec: NetSpec, rng: Rng) -> np.ndarray:
    """Weights ~ N(0, 1/fan_in), zero biases, flattened in layer order."""
    parts = []
    for out, fan_in in spec.layer_shapes():
        w = rng.normal((out, fan_in)) / math.sqrt(fan_in)
        parts.append(w.ravel())
        parts.append(np.zeros(out))
    return np.concatenate(parts)


def _unpack_net(spec: NetSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.param_count,):
        raise InvalidInputError(f"expected {spec.param_count} net parameters, got shape {params.shape}")
    layers = []
    pos = 0
    for out, fan_in in spec.layer_shapes():
        w = params[pos : pos + out * fan_in].reshape(out, fan_in)
        pos += out * fan_in
        b = params[pos : pos + out]
        pos += out
        layers.append((w, b))
    return layers


def _net_forward_cached(spec: NetSpec, params: np.ndarray, x: np.ndarray):
    """Forward pass keeping hidden pre-activations for the backward pass."""
    layers = _unpack_net(spec, params)
    a = x
    acts = [a]
    pres = []
    for idx, (w, b) in enumerate(layers):
        z = a @ w.T + b
        if idx < len(layers) - 1:
            pres.append(z)
            a = np.where(z > 0.0, z, spec.alpha * z)
            acts.append(a)
        else:
            a = z
    return a, (layers, acts, pres)


def _net_vjp_cached(spec: NetSpec, cache, bar_f: np.ndarray):
    layers, acts, pres = cache
    grads = [None] * len(layers)
    bar = bar_f
    for idx in range(len(layers) - 1, -1, -1):
        w, _ = layers[idx]
        if idx < len(layers) - 1:
            z = pres[idx]
            bar = bar * np.where(z > 0.0, 1.0, spec.alpha)
        g_w = bar.T @ acts[idx]
        g_b = bar.sum(axis=0)
        grads[idx] = (g_w, g_b)
        bar = bar @ w
    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return bar, flat


def net_forward(spec: NetSpec, params: np.ndarray, x) -> np.ndarray:
    """Raw MLP output for a single point (dim,) or a batch (m, dim)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    out, _ = _net_forward_cached(spec, params, arr[None, :] if single else arr)
    return out[0] if single else out


def net_vjp(spec: NetSpec, params: np.ndarray, x, cotangent) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode products (grad_x, grad_params) for <cotangent, net(x)>."""
    arr = np.asarray(x, dtype=np.float64)
    cot = np.asarray(cotangent, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr, cot = arr[None, :], cot[None, :]
    _, cache = _net_forward_cached(spec, params, arr)
    bar_x, flat = _net_vjp_cached(spec, cache, cot)
    return (bar_x[0] if single else bar_x), flat


class _FieldBase:
    """Shared surface of the three field kinds."""

    kind: str
    dim: int

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    def with_params(self, params: np.ndarray):
        raise NotImplementedError

    def raw_cached(self, x: np.ndarray):
        """Batched raw field values plus whatever the backward pass needs."""
        raise NotImplementedError

    def raw_vjp(self, x: np.ndarray, cache, bar_f: np.ndarray):
        """(grad_x per row, grad_params summed over rows)."""
        raise NotImplementedError

    def raw(self, x: np.ndarray) -> np.ndarray:
        return self.raw_cached(np.asarray(x, dtype=np.float64))[0]


class ConstantField(_FieldBase):
    kind = "constant"

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=np.float64).copy()
        if self.theta.ndim != 1 or not np.all(np.isfinite(self.theta)):
            raise InvalidInputError("constant field needs a finite 1-D theta")
        self.dim = self.theta.shape[0]

    @property
    def params(self) -> np.ndarray:
        return self.theta.copy()

    def with_params(self, params) -> "ConstantField":
        return ConstantField(params)

    def raw_cached(self, x):
        return np.broadcast_to(self.theta, x.shape).copy(), None

    def raw_vjp(self, x, cache, bar_f):
        return np.zeros_like(x), bar_f.sum(axis=0)


class AffineField(_FieldBase):
    kind = "affine"

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=np.float64).copy()
        self.b = np.asarray(b, dtype=np.float64).copy()
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise InvalidInputError("affine field needs a square matrix")
        if self.b.shape != (self.a.shape[0],):
            raise InvalidInputError("affine offset shape mismatch")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise InvalidInputError("affine field parameters must be finite")
        self.dim = self.b.shape[0]

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b])

    def with_params(self, params) -> "AffineField":
        params = np.asarray(params, dtype=np.float64)
        d = self.dim
        if params.shape != (d * d + d,):
            raise InvalidInputError("affine parameter vector has wrong length")
        return AffineField(params[: d * d].reshape(d, d), params[d * d :])

    def raw_cached(self, x):
        return x @ self.a.T + self.b, None

    def raw_vjp(self, x, cache, bar_f):
        grad_x = bar_f @ self.a
        grad_params = np.concatenate([(bar_f.T @ x).ravel(), bar_f.sum(axis=0)])
        return grad_x, grad_params


class NetField(_FieldBase):
    kind = "net"

    def __init__(self, spec: NetSpec, params):
        self.spec = spec
        self._params = np.asarray(params, dtype=np.float64).copy()
        if self._params.shape != (spec.param_count,):
            raise InvalidInputError("net parameter vector has wrong length")
        if not np.all(np.isfinite(self._params)):
            raise InvalidInputError("net parameters must be finite")
        self.dim = spec.dim

    @property
    def params(self) -> np.ndarray:
        return self._params.copy()

    def with_params(self, params) -> "NetField":
        return NetField(self.spec, params)

    def raw_cached(self, x):
        return _net_forward_cached(self.spec, self._params, x)

    def raw_vjp(self, x, cache, bar_f):
        if cache is None:
            _, cache = _net_forward_cached(self.spec, self._params, x)
        return _net_vjp_cached(self.spec, cache, bar_f)


def _normalized(field: _FieldBase, x: np.ndarray):
    """Unit-speed velocity for a batch, with raw values kept for the vjp."""
    f, cache = field.raw_cached(x)
    norms = np.sqrt(np.sum(f * f, axis=1, keepdims=True))
    small = norms < EPS_NORM
    _bump_stationary(np.count_nonzero(small))
    denom = np.where(small, EPS_NORM, norms)
    return f / denom, (f, norms, denom, cache)


def _normalized_vjp(field: _FieldBase, x: np.ndarray, cache, bar_g: np.ndarray):
    """Pull a cotangent on g = f/max(||f||, eps) back to (x, params)."""
    f, norms, denom, inner = cache
    g = f / denom
    healthy = norms >= EPS_NORM
    # healthy rows: d(f/||f||) = (I - g g^T)/||f||; frozen rows: d(f/eps) = I/eps
    dot = np.sum(g * bar_g, axis=1, keepdims=True)
    bar_f = np.where(healthy, (bar_g - g * dot) / denom, bar_g / EPS_NORM)
    return field.raw_vjp(x, inner, bar_f)


def velocity(field: _FieldBase, w) -> np.ndarray:
    """Normalized velocity at a single point."""
    x = np.asarray(w, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != field.dim:
        raise InvalidInputError(f"expected a point of dimension {field.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("point must be finite")
    g, _ = _normalized(field, x[None, :])
    return g[0]


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled path: times[k] pairs with states[k]; times[0] = 0."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.ndim != 2 or self.times.shape[0] != self.states.shape[0]:
            raise InvalidInputError("trajectory arrays are inconsistent")
        if self.times.shape[0] < 2:
            raise InvalidInputError("a trajectory needs at least two samples")

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def polyline_length(self) -> float:
        diffs = np.diff(self.states, axis=0)
        return float(np.sum(np.sqrt(np.sum(diffs * diffs, axis=1))))

    def state_at_index(self, k: int) -> np.ndarray:
        return self.states[k]

    def nearest_index(self, t: float) -> int:
        """Index of the stored sample closest to time t."""
        horizon = float(self.times[-1])
        if not (0.0 <= t <= horizon * (1.0 + 1e-12)):
            raise InvalidInputError(f"time {t} outside [0, {horizon}]")
        n = self.times.shape[0] - 1
        return int(round(t / horizon * n)) if horizon > 0 else 0


def _check_integration_args(field: _FieldBase, n_steps: int):
    n = int(n_steps)
    if n < 1:
        raise InvalidInputError("n_steps must be >= 1")
    return n


def _check_horizons(t, m: int) -> np.ndarray:
    horizons = np.asarray(t, dtype=np.float64)
    if horizons.ndim == 0:
        horizons = np.full(m, float(horizons))
    if horizons.shape != (m,):
        raise InvalidInputError("time horizon must be a scalar or one value per row")
    if not np.all(np.isfinite(horizons)) or np.any(horizons <= 0.0):
        raise InvalidInputError("time horizons must be positive and finite")
    return horizons


def integrate_batch(field: _FieldBase, w0: np.ndarray, t, n_steps: int, keep_stages: bool = False):
    """RK4 on the normalized field for a batch of starts.

    Returns (states, stages): states has shape (n_steps+1, m, dim); stages is
    the list of per-step stage inputs (x1, x2, x3, x4) when requested (these
    feed the adjoint), else None.  Each row may use its own horizon.
    """
    x = np.asarray(w0, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != field.dim:
        raise InvalidInputError(f"expected starts of shape (m, {field.dim})")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("starts must be finite")
    n = _check_integration_args(field, n_steps)
    m = x.shape[0]
    horizons = _check_horizons(t, m)
    h = (horizons / n)[:, None]

    states = np.empty((n + 1, m, field.dim))
    states[0] = x
    stages = [] if keep_stages else None
    w = x
    for step in range(n):
        x1 = w
        k1, _ = _normalized(field, x1)
        x2 = w + 0.5 * h * k1
        k2, _ = _normalized(field, x2)
        x3 = w + 0.5 * h * k2
        k3, _ = _normalized(field, x3)
        x4 = w + h * k3
        k4, _ = _normalized(field, x4)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise IntegrationDivergedError(f"non-finite state at step {step + 1}")
        states[step + 1] = w
        if keep_stages:
            stages.append((x1, x2, x3, x4))
    return states, stages


def integrate(field: _FieldBase, w0, t: float, n_steps: int = N_STEPS_EVAL) -> Trajectory:
    """Integrate a single start over [0, t]; returns the sampled trajectory."""
    x = np.asarray(w0, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("w0 must be a single point; use integrate_batch for batches")
    states, _ = integrate_batch(field, x[None, :], t, n_steps)
    n = int(n_steps)
    times = np.linspace(0.0, float(t), n + 1)
    return Trajectory(times=times, states=states[:, 0, :])


def rk4_backward(field: _FieldBase, stages, h: np.ndarray, cotangent: np.ndarray):
    """Reverse sweep through stored RK4 stages.

    ``stages`` comes from ``integrate_batch(..., keep_stages=True)`` and ``h``
    is the per-row step (m, 1).  Returns the gradient of
    sum_rows <cotangent_row, endpoint_row> as (grad_params, grad_starts); the
    parameter gradient is summed over rows, so weight samples by scaling their
    cotangent rows.
    """
    cot = np.asarray(cotangent, dtype=np.float64)
    if not np.all(np.isfinite(cot)):
        raise InvalidInputError("cotangent must be finite")
    n = len(stages)
    grad_params = np.zeros(field.params.shape[0])
    a = cot.copy()
    for step in range(n - 1, -1, -1):
        x1, x2, x3, x4 = stages[step]
        bar_k1 = (h / 6.0) * a
        bar_k2 = (h / 3.0) * a
        bar_k3 = (h / 3.0) * a
        bar_k4 = (h / 6.0) * a

        g4, cache4 = _normalized(field, x4)
        bx4, bp4 = _normalized_vjp(field, x4, cache4, bar_k4)
        bar_k3 = bar_k3 + h * bx4

        _, cache3 = _normalized(field, x3)
        bx3, bp3 = _normalized_vjp(field, x3, cache3, bar_k3)
        bar_k2 = bar_k2 + 0.5 * h * bx3

        _, cache2 = _normalized(field, x2)
        bx2, bp2 = _normalized_vjp(field, x2, cache2, bar_k2)
        bar_k1 = bar_k1 + 0.5 * h * bx2

        _, cache1 = _normalized(field, x1)
        bx1, bp1 = _normalized_vjp(field, x1, cache1, bar_k1)

        a = a + bx1 + bx2 + bx3 + bx4
        grad_params += bp1 + bp2 + bp3 + bp4
    return grad_params, a


def adjoint_batch(field: _FieldBase, w0: np.ndarray, t, n_steps: int, cotangent: np.ndarray):
    """Endpoint gradient for a batch: forward with stored stages, then reverse."""
    x = np.asarray(w0, dtype=np.float64)
    cot = np.asarray(cotangent, dtype=np.float64)
    if cot.shape != x.shape:
        raise InvalidInputError("cotangent must match the start batch shape")
    n = int(n_steps)
    horizons = _check_horizons(t, x.shape[0])
    h = (horizons / n)[:, None]
    _, stages = integrate_batch(field, x, t, n, keep_stages=True)
    return rk4_backward(field, stages, h, cot)


def adjoint_grad(field: _FieldBase, w0, t: float, n_steps: int, cotangent):
    """Single-trajectory endpoint gradient: returns (grad_params, grad_w0)."""
    x = np.asarray(w0, dtype=np.float64)
    c = np.asarray(cotangent, dtype=np.float64)
    if x.ndim != 1 or c.ndim != 1:
        raise InvalidInputError("w0 and cotangent must be single points")
    gp, gx = adjoint_batch(field, x[None, :], t, n_steps, c[None, :])
    return gp, gx[0]


# checkpoint persistence

_CHECKPOINT_HEADER = "odeflow-checkpoint v1"


def write_checkpoint(path, field: _FieldBase) -> None:
    """Serialize a field as line-oriented text with 17-significant-digit params."""
    if field.kind == "net":
        depth, width = field.spec.depth, field.spec.width
    else:
        depth, width = 0, 0
    lines = [
        _CHECKPOINT_HEADER,
        f"kind {field.kind}",
        f"dim {field.dim}",
        f"depth {depth}",
        f"width {width}",
    ]
    lines.extend(f"{p:.17g}" for p in field.params)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_checkpoint(path) -> _FieldBase:
    """Parse a checkpoint; inverse of :func:`write_checkpoint`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _CHECKPOINT_HEADER:
        raise CheckpointFormatError(f"bad checkpoint header, expected {_CHECKPOINT_HEADER!r}")
    header = {}
    for ln in lines[1:5]:
        parts = ln.split()
        if len(parts) != 2:
            raise CheckpointFormatError(f"malformed header line {ln!r}")
        header[parts[0]] = parts[1]
    for key in ("kind", "dim", "depth", "width"):
        if key not in header:
            raise CheckpointFormatError(f"missing checkpoint field {key!r}")
    kind = header["kind"]
    try:
        dim, depth, width = int(header["dim"]), int(header["depth"]), int(header["width"])
    except ValueError as exc:
        raise CheckpointFormatError("non-integer checkpoint header field") from exc
    try:
        params = np.array([float(ln) for ln in lines[5:] if ln], dtype=np.float64)
    except ValueError as exc:
        raise CheckpointFormatError("malformed parameter line") from exc
    if not np.all(np.isfinite(params)):
        raise CheckpointFormatError("checkpoint parameters must be finite")

    if kind == "constant":
        expected = dim
        if params.shape[0] != expected:
            raise CheckpointFormatError(f"expected {expected} parameters, got {params.shape[0]}")
        return ConstantField(params)
    if kind == "affine":
        expected = dim * dim + dim
        if params.shape[0] != expected:
            raise CheckpointFormatError(f"expected {expected} parameters, got {params.shape[0]}")
        return AffineField(params[: dim * dim].reshape(dim, dim), params[dim * dim :])
    if kind == "net":
        try:
            spec = NetSpec(dim=dim, depth=depth, width=width)
        except InvalidInputError as exc:
            raise CheckpointFormatError(str(exc)) from exc
        if params.shape[0] != spec.param_count:
            raise CheckpointFormatError(f"expected {spec.param_count} parameters, got {params.shape[0]}")
        return NetField(spec, params)
    raise CheckpointFormatError(f"unknown field kind {kind!r}")
