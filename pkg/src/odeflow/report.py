"""Plot and summary rendering for evaluation results.

The CD plot is a parametric curve per method, (C(tau), D(tau)) traced from
tau = 0, drawn inside a fixed unit-square frame.  SVG keeps the output
textual and deterministic; coordinates are printed with 6 significant digits
so repeated runs emit identical bytes.
"""

from __future__ import annotations

from .errors import InvalidInputError
from .evaluation import CDCurve

__all__ = ["cd_plot_svg", "summary_text", "curve_summary"]

_MARGIN = 64.0
_PLOT = 480.0
_SIZE = _PLOT + 2 * _MARGIN

_PALETTE = (
    "#1b6ca8",
    "#c2452d",
    "#3a8a3e",
    "#7b4fa6",
    "#b07c1f",
    "#3c8a8a",
    "#a6436f",
    "#5a5a5a",
)


def _x(c: float) -> float:
    return _MARGIN + c * _PLOT


def _y(d: float) -> float:
    return _MARGIN + (1.0 - d) * _PLOT


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def cd_plot_svg(named_curves: list[tuple[str, CDCurve]], title: str = "Control vs Disentanglement") -> str:
    """Overlay CD curves in one unit-square plot; returns the SVG text."""
    if not named_curves:
        raise InvalidInputError("no curves to plot")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(_SIZE)}" height="{_fmt(_SIZE)}" '
        f'viewBox="0 0 {_fmt(_SIZE)} {_fmt(_SIZE)}">',
        f'<rect x="0" y="0" width="{_fmt(_SIZE)}" height="{_fmt(_SIZE)}" fill="white"/>',
        f'<rect x="{_fmt(_MARGIN)}" y="{_fmt(_MARGIN)}" width="{_fmt(_PLOT)}" height="{_fmt(_PLOT)}" '
        'fill="none" stroke="#222222" stroke-width="1"/>',
        f'<text x="{_fmt(_SIZE / 2)}" y="{_fmt(_MARGIN / 2)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<text x="{_fmt(_SIZE / 2)}" y="{_fmt(_SIZE - 12.0)}" text-anchor="middle" '
        'font-family="sans-serif" font-size="13">control C(&#964;)</text>',
        f'<text x="16" y="{_fmt(_SIZE / 2)}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {_fmt(_SIZE / 2)})">disentanglement D(&#964;)</text>',
    ]
    for k in range(5):
        v = k / 4.0
        parts.append(
            f'<line x1="{_fmt(_x(v))}" y1="{_fmt(_MARGIN + _PLOT)}" x2="{_fmt(_x(v))}" '
            f'y2="{_fmt(_MARGIN + _PLOT + 6)}" stroke="#222222" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(_x(v))}" y="{_fmt(_MARGIN + _PLOT + 22)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{v:g}</text>'
        )
        parts.append(
            f'<line x1="{_fmt(_MARGIN - 6)}" y1="{_fmt(_y(v))}" x2="{_fmt(_MARGIN)}" '
            f'y2="{_fmt(_y(v))}" stroke="#222222" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(_MARGIN - 10)}" y="{_fmt(_y(v) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v:g}</text>'
        )
    for idx, (label, curve) in enumerate(named_curves):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(
            f"{_fmt(_x(float(c)))},{_fmt(_y(float(d))) }"
            for c, d in zip(curve.control, curve.disentanglement)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        c0, d0 = float(curve.control[0]), float(curve.disentanglement[0])
        parts.append(
            f'<circle cx="{_fmt(_x(c0))}" cy="{_fmt(_y(d0))}" r="4" fill="{color}"/>'
        )
        ly = _MARGIN + 18.0 + 18.0 * idx
        parts.append(
            f'<line x1="{_fmt(_MARGIN + 12)}" y1="{_fmt(ly - 4)}" x2="{_fmt(_MARGIN + 40)}" '
            f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_fmt(_MARGIN + 46)}" y="{_fmt(ly)}" font-family="sans-serif" '
            f'font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curve_summary(curve: CDCurve) -> dict:
    """Headline numbers for one curve.

    ``tau_star`` is the smallest grid tau with C >= 0.9, or None; ``d_star``
    is D there.  ``best_control`` maximizes C, earliest tau winning ties.
    """
    best_idx = int(curve.control.argmax())
    out = {
        "best_control": float(curve.control[best_idx]),
        "best_control_tau": float(curve.taus[best_idx]),
        "d_at_best_control": float(curve.disentanglement[best_idx]),
        "final_control": float(curve.control[-1]),
        "final_disentanglement": float(curve.disentanglement[-1]),
        "tau_star": None,
        "d_star": None,
    }
    hits = [k for k in range(curve.taus.shape[0]) if curve.control[k] >= 0.9]
    if hits:
        out["tau_star"] = float(curve.taus[hits[0]])
        out["d_star"] = float(curve.disentanglement[hits[0]])
    return out


def summary_text(named_curves: list[tuple[str, CDCurve]], seed: int | None = None) -> str:
    """Plain-text digest of the same curves the plot shows."""
    if not named_curves:
        raise InvalidInputError("no curves to summarize")
    width = max(len(label) for label, _ in named_curves)
    lines = ["cd-curve summary"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    lines.append("")
    for label, curve in named_curves:
        s = curve_summary(curve)
        star = (
            f"tau*={s['tau_star']:.4g} D(tau*)={s['d_star']:.4g}"
            if s["tau_star"] is not None
            else "control never reaches 0.9"
        )
        lines.append(
            f"{label.ljust(width)}  n={curve.n_samples}  "
            f"bestC={s['best_control']:.4g} at tau={s['best_control_tau']:.4g} "
            f"(D={s['d_at_best_control']:.4g})  "
            f"final C={s['final_control']:.4g} D={s['final_disentanglement']:.4g}  {star}"
        )
    return "\n".join(lines) + "\n"
