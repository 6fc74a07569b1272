"""Deterministic numerical substrate: RNG, dense decompositions, Adam.

All floating point work in the package is float64.  Decompositions are backed
by LAPACK through numpy/scipy; both are deterministic for a fixed build, which
is the reproducibility contract the rest of the package relies on (same seed,
same machine, same bytes out).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, TrainingFailedError

__all__ = [
    "Rng",
    "SvdResult",
    "svd",
    "eig",
    "mat_exp_apply",
    "AdamState",
    "adam_step",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-D finite float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise InvalidInputError(f"{name} must be 2-D and non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


def as_vector(v, name: str = "vector") -> np.ndarray:
    m = np.asarray(v, dtype=np.float64)
    if m.ndim != 1 or m.shape[0] == 0:
        raise InvalidInputError(f"{name} must be 1-D and non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


class Rng:
    """Seeded random stream (PCG64).

    A 64-bit seed fully determines the stream: two instances built from the
    same seed produce bit-identical draws in the same call order.  ``split``
    derives an independent child stream from (seed, tag) without consuming
    state from the parent, so components can be reordered without changing
    each other's draws.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            raise InvalidInputError("seed must be non-negative")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def split(self, tag: int) -> "Rng":
        """Child stream keyed by an integer tag; parent state is untouched."""
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=(int(tag),)))
        )
        return child

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size=size)

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD A = u @ diag(values) @ vt with values sorted descending."""

    u: np.ndarray
    values: np.ndarray
    vt: np.ndarray


def svd(a) -> SvdResult:
    """Singular value decomposition of a dense matrix.

    Returns singular values in descending order with orthonormal factors;
    reconstruction and orthonormality hold to 1e-10 for conditioned inputs.
    """
    m = as_matrix(a)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u=u, values=s, vt=vt)


def eig(a) -> np.ndarray:
    """Eigenvalues of a square matrix, sorted by descending magnitude.

    Complex pairs are kept as complex values.  Sort ties broken by real part
    then imaginary part so the order is deterministic.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"eig requires a square matrix, got {m.shape}")
    vals = np.linalg.eigvals(m)
    order = np.lexsort((vals.imag, vals.real, -np.abs(vals)))
    return vals[order]


def mat_exp_apply(a, t: float, w) -> np.ndarray:
    """Return exp(t*A) @ w via scaling-and-squaring (Pade core).

    Serves as the closed-form oracle for linear-field integration; accurate to
    well under 1e-10 relative for ||t*A|| <= 10.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"mat_exp_apply requires a square matrix, got {m.shape}")
    v = as_vector(w)
    if v.shape[0] != m.shape[0]:
        raise InvalidInputError("dimension mismatch between matrix and vector")
    if not np.isfinite(t):
        raise InvalidInputError("t must be finite")
    return scipy.linalg.expm(float(t) * m) @ v


@dataclass
class AdamState:
    """Bias-corrected Adam state over a flat parameter vector."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Advance one Adam step in place on ``state``; returns updated params.

    update = lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments.
    A fresh state therefore moves each coordinate by ~lr in the gradient's
    sign direction.  Non-finite gradients abort with the current step index.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.ndim != 1:
        raise InvalidInputError("params and grads must be matching 1-D arrays")
    if not np.all(np.isfinite(grads)):
        raise TrainingFailedError("non-finite gradient in adam_step", iteration=state.step)
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    if state.m.shape != params.shape:
        raise InvalidInputError("AdamState was initialized for a different parameter size")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
