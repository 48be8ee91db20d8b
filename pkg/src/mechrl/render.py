"""Rendering: SVG snapshots of frame models and matplotlib report figures.

SVG output draws one polyline per element; a solved displacement field
adds a deformed overlay whose exaggeration factor is chosen so the
largest displacement renders as a tenth of the model width (recorded in
the SVG metadata block). Deformed ligaments are interpolated with the
beam shape functions, so bent walls render as curves.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fea import DisplacementField
from .lattice import FrameModel

SVG_NS = "http://www.w3.org/2000/svg"


def _deformed_points(model: FrameModel, field: DisplacementField, scale: float, points_per_element: int):
    """Per-element polyline points of the exaggerated deformed shape."""
    xs = np.linspace(0.0, 1.0, max(2, points_per_element))
    h1 = 1 - 3 * xs**2 + 2 * xs**3
    h2 = xs - 2 * xs**2 + xs**3
    h3 = 3 * xs**2 - 2 * xs**3
    h4 = -(xs**2) + xs**3
    out = []
    for e in model.elements:
        pi, pj = model.nodes[e.i], model.nodes[e.j]
        d = pj - pi
        L = float(np.hypot(*d))
        c, s = d / L
        ui, uj = field.values[e.i], field.values[e.j]
        axial_i = c * ui[0] + s * ui[1]
        axial_j = c * uj[0] + s * uj[1]
        trans_i = -s * ui[0] + c * ui[1]
        trans_j = -s * uj[0] + c * uj[1]
        axial = axial_i * (1 - xs) + axial_j * xs
        trans = h1 * trans_i + h2 * L * ui[2] + h3 * trans_j + h4 * L * uj[2]
        base = pi[None, :] + xs[:, None] * d[None, :]
        ux = c * axial - s * trans
        uy = s * axial + c * trans
        out.append(base + scale * np.column_stack([ux, uy]))
    return out


def autoscale_factor(model: FrameModel, field: DisplacementField, fraction: float = 0.1) -> float:
    """Exaggeration making the peak displacement ``fraction`` of the model
    width (1.0 for an all-zero field)."""
    width = float(np.ptp(model.nodes[:, 0])) or 1.0
    peak = float(np.max(np.hypot(field.values[:, 0], field.values[:, 1])))
    if peak == 0.0:
        return 1.0
    return fraction * width / peak


def model_svg(
    model: FrameModel,
    field: DisplacementField | None = None,
    scale: float | None = None,
    points_per_element: int = 8,
    stroke_width: float = 0.6,
) -> str:
    """SVG document with one polyline per element (plus a deformed overlay
    when a field is given)."""
    if model.n_nodes == 0:
        return f'<svg xmlns="{SVG_NS}" viewBox="0 0 1 1"/>'
    if field is not None and scale is None:
        scale = autoscale_factor(model, field)

    pts_all = [model.nodes]
    deformed = None
    if field is not None:
        deformed = _deformed_points(model, field, scale, points_per_element)
        pts_all.extend(deformed)
    stacked = np.vstack(pts_all)
    margin = 0.05 * max(np.ptp(stacked[:, 0]), np.ptp(stacked[:, 1]), 1.0)
    xmin, ymin = stacked.min(axis=0) - margin
    xmax, ymax = stacked.max(axis=0) + margin

    def fmt(points):
        # SVG y grows downward; mirror about the vertical midline
        return " ".join(f"{x:.4f},{(ymax + ymin) - y:.4f}" for x, y in points)

    lines = [
        f'<svg xmlns="{SVG_NS}" viewBox="{xmin:.4f} {ymin:.4f} {xmax - xmin:.4f} {ymax - ymin:.4f}">',
        f"<metadata>{json.dumps({'deformation_scale': scale})}</metadata>",
        f'<g id="undeformed" fill="none" stroke="#8a8a8a" stroke-width="{stroke_width}">',
    ]
    for e in model.elements:
        lines.append(f'<polyline points="{fmt([model.nodes[e.i], model.nodes[e.j]])}"/>')
    lines.append("</g>")
    if deformed is not None:
        lines.append(f'<g id="deformed" fill="none" stroke="#c02020" stroke-width="{stroke_width}">')
        for pts in deformed:
            lines.append(f'<polyline points="{fmt(pts)}"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Report figures


def save_learning_curve_figure(rows: list[dict], path) -> None:
    """Reward / moving-average / disconnection traces of a training run."""
    episodes = [r["episode"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(episodes, [r["reward"] for r in rows], lw=0.6, alpha=0.5, label="episode reward")
    ax.plot(episodes, [r["moving_avg"] for r in rows], lw=1.8, label="moving average")
    ax.set_xlabel("episode")
    ax.set_ylabel("terminal reward")
    if any(r["disconnections"] for r in rows):
        twin = ax.twinx()
        twin.plot(episodes, [r["disconnections"] for r in rows], lw=0.8, color="tab:red", alpha=0.6)
        twin.set_ylabel("disconnected hinges", color="tab:red")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_characterization_figure(results: dict, path) -> None:
    """Grouped bars of corner displacement magnitude per cell and load."""
    kinds = list(results)
    load_names = sorted({name for r in results.values() for name in r})
    x = np.arange(len(kinds), dtype=float)
    width = 0.8 / len(load_names)
    fig, ax = plt.subplots(figsize=(8, 4))
    for k, load in enumerate(load_names):
        mags = [results[kind][load].umag if load in results[kind] else 0.0 for kind in kinds]
        ax.bar(x + k * width, mags, width, label=load)
    ax.set_yscale("log")
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([k.code for k in kinds])
    ax.set_ylabel("|u| at probe corner (mm)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_reward_histogram(rewards, path, title: str = "rollout rewards") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(rewards, bins=min(40, max(5, len(rewards) // 10)), color="#4878a8")
    ax.set_xlabel("terminal reward")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
