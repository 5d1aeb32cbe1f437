"""Figure rendering for CLI reports.

Each function takes already-computed results and writes one PNG next to
the delimited output.  Rendering is optional (the --plot flag); the CSV
and JSON files remain the primary outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def render_phase_diagram(rows, axis_names, out_path):
    """Colored grid of winning-support labels from sweep rows.

    rows: list of dicts with the two axis values, 'support_mask' and
    'boundary' keys, as produced by the sweep command.
    """
    xs = sorted({r[axis_names[0]] for r in rows})
    ys = sorted({r[axis_names[1]] for r in rows})
    labels = sorted({r["support_mask"] for r in rows})
    lut = {m: k for k, m in enumerate(labels)}
    img = np.full((len(ys), len(xs)), np.nan)
    xi = {v: k for k, v in enumerate(xs)}
    yi = {v: k for k, v in enumerate(ys)}
    for r in rows:
        img[yi[r[axis_names[1]]], xi[r[axis_names[0]]]] = lut[r["support_mask"]]
    fig, ax = plt.subplots(figsize=(6.5, 5))
    mesh = ax.pcolormesh(xs, ys, img, cmap="tab10", vmin=-0.5, vmax=9.5, shading="nearest")
    cbar = fig.colorbar(mesh, ax=ax, ticks=range(len(labels)))
    cbar.ax.set_yticklabels(labels)
    cbar.set_label("winning support mask")
    ax.set_xlabel(axis_names[0])
    ax.set_ylabel(axis_names[1])
    ax.set_title("ground-state phase diagram")
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)


def render_beta_hat_curve(points, out_path):
    """beta against beta_hat with the diagonal for reference."""
    betas = [pt["beta"] for pt in points]
    hats = [pt["beta_hat"] for pt in points]
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(betas, hats, "o-", ms=3, label="beta_hat")
    ax.plot(betas, betas, "--", color="gray", lw=1, label="beta")
    ax.set_xlabel("beta")
    ax.set_ylabel("beta_hat")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)


def render_scalar_profile(gs, out_path):
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(gs.r, gs.u, lw=1.5)
    ax.set_xlabel("r")
    ax.set_ylabel("u")
    ax.set_title(f"scalar ground state: p={gs.p}, N={gs.N}, omega={gs.omega}")
    ax.set_xlim(0, min(gs.r[-1], 15 / np.sqrt(gs.omega)))
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)


def render_field_components(result, out_path):
    x = result.field.grid.x
    U = result.field.values
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for i in range(U.shape[0]):
        ax.plot(x, U[i], lw=1.2, label=f"u_{i+1}")
    ax.set_xlabel("x")
    ax.set_ylabel("u_i")
    ax.set_title("constrained minimizer components")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
