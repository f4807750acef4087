"""Figure rendering: log-log error-vs-DOFs plots with slope triangles,
velocity stream plots, pressure maps, and difference-magnitude maps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import (
    FieldDump,
    load_field_dump,
    load_table,
    pressure_difference,
    velocity_difference,
)

__all__ = ["plot_convergence", "plot_fields", "plot_enrichment_map"]


def _slope_triangle(ax, x, y, slope, factor=2.0, color="black"):
    """Annotate a decaying log-log slope below the anchor point (x, y)."""
    x2 = x * factor
    y2 = y * factor ** (-slope)
    ax.plot([x, x2, x2, x], [y, y, y2, y], color=color, linewidth=0.8)
    ax.annotate(
        f"{slope:g}",
        xy=(x2 * 1.08, np.sqrt(y * y2)),
        fontsize=9,
        ha="left",
        va="center",
        color=color,
    )


def plot_convergence(
    tables,
    labels=None,
    *,
    x_column="DOFs",
    y_column="EnergyError",
    slope=None,
    slope_anchor=0.6,
    out_path="convergence.png",
    title=None,
):
    """Log-log plot of one error column against DOFs, one series per
    table, with an optional slope triangle."""
    loaded = [load_table(t) for t in tables]
    if labels is None:
        labels = [Path(t).stem for t in tables]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    for table, label in zip(loaded, labels):
        ax.loglog(table.column(x_column), table.column(y_column), "o-", label=label)
    if slope is not None:
        ref = loaded[-1]
        xs = ref.column(x_column)
        ys = ref.column(y_column)
        idx = max(0, int(slope_anchor * (len(xs) - 1)) - 1)
        _slope_triangle(ax, xs[idx], 0.5 * ys[idx], slope)
    ax.set_xlabel(x_column)
    ax.set_ylabel(y_column)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def _masked(dump: FieldDump, values) -> np.ma.MaskedArray:
    return np.ma.masked_where(dump.mask == 0, values)


def plot_fields(path, other_path=None, *, out_prefix="fields", streams_density=1.2):
    """Render a field dump: velocity stream plot and pressure map; with a
    second dump, also the velocity and pressure difference-magnitude maps.
    Returns the written paths (masked cylinder interiors stay blank)."""
    dump = load_field_dump(path)
    written = []

    # streamplot wants strictly increasing axes: the dump grid is x-major
    x = dump.x[:, 0]
    y = dump.y[0, :]
    ux = np.where(dump.mask == 1, dump.u[..., 0], np.nan)
    uy = np.where(dump.mask == 1, dump.u[..., 1], np.nan)

    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    speed = _masked(dump, np.hypot(dump.u[..., 0], dump.u[..., 1]))
    pc = ax.pcolormesh(dump.x, dump.y, speed, shading="nearest", cmap="viridis")
    ax.streamplot(y, x, uy.T, ux.T, density=streams_density, color="white", linewidth=0.6)
    fig.colorbar(pc, ax=ax, label="|u|")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    stream_path = Path(f"{out_prefix}_stream.png")
    fig.tight_layout()
    fig.savefig(stream_path, dpi=150)
    plt.close(fig)
    written.append(stream_path)

    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    pc = ax.pcolormesh(dump.x, dump.y, _masked(dump, dump.p), shading="nearest", cmap="coolwarm")
    fig.colorbar(pc, ax=ax, label="p")
    ax.set_aspect("equal")
    pressure_path = Path(f"{out_prefix}_pressure.png")
    fig.tight_layout()
    fig.savefig(pressure_path, dpi=150)
    plt.close(fig)
    written.append(pressure_path)

    if other_path is not None:
        other = load_field_dump(other_path)
        for name, delta in (
            ("udiff", velocity_difference(dump, other)),
            ("pdiff", pressure_difference(dump, other)),
        ):
            fig, ax = plt.subplots(figsize=(4.8, 4.4))
            pc = ax.pcolormesh(dump.x, dump.y, _masked(dump, delta), shading="nearest", cmap="magma")
            fig.colorbar(pc, ax=ax, label="difference magnitude")
            ax.set_aspect("equal")
            diff_path = Path(f"{out_prefix}_{name}.png")
            fig.tight_layout()
            fig.savefig(diff_path, dpi=150)
            plt.close(fig)
            written.append(diff_path)
    return written


def plot_enrichment_map(path, *, out_path="enrichment.png"):
    """Scatter of element centroids coloured by enrichment dimension."""
    with open(path) as fh:
        header = fh.readline().split()
        if header != ["x", "y", "dim"]:
            raise ValueError(f"{path}: not an enrichment map (header {header})")
        data = np.loadtxt(fh, ndmin=2)
    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    dims = data[:, 2].astype(int)
    sc = ax.scatter(data[:, 0], data[:, 1], c=dims, s=14, marker="s", cmap="viridis")
    fig.colorbar(sc, ax=ax, label="enrichment dimension", ticks=range(dims.max() + 1))
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)
