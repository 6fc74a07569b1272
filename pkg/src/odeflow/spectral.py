"""Spectral summaries of learned fields.

Depth-1 fields are affine before normalization, f(w) = A w + b, so the
Jacobian A carries the whole local structure: eigenvalue magnitudes split the
space into fast (|lambda| above a threshold) and slow (below its reciprocal)
subspaces, and the entropy of the renormalized top-k singular values measures
how many directions the field genuinely mixes.  A rank-correlation helper
supports comparing orderings of attributes under different difficulty scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    UndefinedCorrelationError,
    UnsupportedAnalysisError,
    ZeroMatrixError,
)
from .fieldflow import AffineField, NetField, _FieldBase, _unpack_net
from .numerics import as_matrix, eig, svd
from .textio import atomic_write_text

__all__ = [
    "SpectralReport",
    "affine_of",
    "singular_entropy",
    "default_truncation",
    "eigen_report",
    "spearman",
    "write_spectral_csv",
    "read_spectral_csv",
]

DEFAULT_FAST_THRESHOLD = 5.0
N_CSV_EIGS = 8


@dataclass(frozen=True)
class SpectralReport:
    """Spectral summary of one trained attribute field."""

    attribute: int
    eig_magnitudes: np.ndarray  # descending
    n_fast: int
    n_slow: int
    fast_threshold: float
    h_svd: float
    k: int
    singular_values: np.ndarray  # the top-k values the entropy used

    def __post_init__(self):
        if self.k != self.singular_values.shape[0]:
            raise InvalidInputError("k must match the retained singular values")
        if not (-1e-12 <= self.h_svd <= math.log(self.k) + 1e-12):
            raise InvalidInputError("singular entropy outside [0, ln k]")


def affine_of(field: _FieldBase) -> tuple[np.ndarray, np.ndarray]:
    """Raw affine parameters (A, b) of a field that is affine by construction.

    Only AFFINE fields and depth-1 nets qualify; anything else has no single
    Jacobian and is rejected.  Normalization is ignored: it rescales speed,
    not direction, so the spectrum of A is the meaningful object.
    """
    if isinstance(field, AffineField):
        return field.a.copy(), field.b.copy()
    if isinstance(field, NetField):
        if field.spec.depth != 1:
            raise UnsupportedAnalysisError(
                f"depth-{field.spec.depth} net has no global affine form"
            )
        w, b = _unpack_net(field.spec, field.params)[0]
        return w.copy(), b.copy()
    raise UnsupportedAnalysisError(f"no affine form for {type(field).__name__}")


def default_truncation(dim: int) -> int:
    """Quarter of the dimension, rounded up, floored at 1."""
    return max(1, math.ceil(dim / 4))


def singular_entropy(a, k: int | None = None) -> float:
    """Entropy of the renormalized top-k singular values, in nats.

    0 for rank-1 (all mass on one value), ln k for a uniform spectrum.
    """
    a = as_matrix(a, "a")
    if k is None:
        k = default_truncation(min(a.shape))
    if not (1 <= k <= min(a.shape)):
        raise InvalidInputError(f"k={k} outside [1, {min(a.shape)}]")
    sigma = svd(a).values[:k]
    total = float(np.sum(sigma))
    if total == 0.0:
        raise ZeroMatrixError("all singular values vanish")
    tilde = sigma / total
    nz = tilde > 0
    return float(-np.sum(tilde[nz] * np.log(tilde[nz])))


def eigen_report(
    a,
    attribute: int = 0,
    fast_threshold: float = DEFAULT_FAST_THRESHOLD,
    k: int | None = None,
) -> SpectralReport:
    """Full spectral summary of a square matrix.

    Complex eigenvalues are summarized by magnitude; the fast/slow split
    counts |lambda| > fast_threshold and |lambda| < 1/fast_threshold.
    """
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError("eigen_report needs a square matrix")
    if not (fast_threshold > 1.0):
        raise InvalidInputError("fast_threshold must exceed 1")
    mags = np.abs(eig(a))
    if k is None:
        k = default_truncation(a.shape[0])
    sigma = svd(a).values[:k]
    total = float(np.sum(sigma))
    if total == 0.0:
        raise ZeroMatrixError("all singular values vanish")
    tilde = sigma / total
    nz = tilde > 0
    h = float(-np.sum(tilde[nz] * np.log(tilde[nz])))
    return SpectralReport(
        attribute=attribute,
        eig_magnitudes=mags,
        n_fast=int(np.count_nonzero(mags > fast_threshold)),
        n_slow=int(np.count_nonzero(mags < 1.0 / fast_threshold)),
        fast_threshold=float(fast_threshold),
        h_svd=h,
        k=int(k),
        singular_values=sigma,
    )


def _average_ranks(xs: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties replaced by the mean rank of the tied block."""
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(xs.shape[0])
    i = 0
    while i < xs.shape[0]:
        j = i
        while j + 1 < xs.shape[0] and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Rank correlation: Pearson correlation of average ranks."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.shape[0] < 2:
        raise InvalidInputError("spearman needs two equal-length vectors of length >= 2")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = float(np.dot(dx, dx))
    vy = float(np.dot(dy, dy))
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("constant input has no rank variance")
    return float(np.dot(dx, dy) / math.sqrt(vx * vy))


# CSV persistence

_SPECTRAL_HEADER = "attribute,h_svd,k," + ",".join(
    f"top_eig_{i + 1}" for i in range(N_CSV_EIGS)
)


def write_spectral_csv(path, reports: list[SpectralReport]) -> None:
    """One row per report; eigenvalue columns padded with 0 past the spectrum."""
    lines = [_SPECTRAL_HEADER]
    for r in reports:
        eigs = list(r.eig_magnitudes[:N_CSV_EIGS])
        eigs += [0.0] * (N_CSV_EIGS - len(eigs))
        cells = [str(r.attribute), f"{r.h_svd:.9g}", str(r.k)]
        cells += [f"{e:.9g}" for e in eigs]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_spectral_csv(path) -> list[dict]:
    """Rows as plain dicts; the file does not carry full report state."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _SPECTRAL_HEADER:
        raise InvalidInputError("bad spectral csv header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3 + N_CSV_EIGS:
            raise InvalidInputError(f"bad spectral csv row {ln!r}")
        try:
            rows.append(
                {
                    "attribute": int(parts[0]),
                    "h_svd": float(parts[1]),
                    "k": int(parts[2]),
                    "top_eigs": [float(p) for p in parts[3:]],
                }
            )
        except ValueError as exc:
            raise InvalidInputError(f"bad spectral csv row {ln!r}") from exc
    return rows
