"""CSV, manifest, and SVG figure output for simulation runs.

Numbers are serialized in shortest round-trip decimal form, so parsing a CSV
back recovers bit-identical floats and re-running a config reproduces
byte-identical files. Figures are rendered with a fixed hash salt and no
embedded date so the SVGs are reproducible too.
"""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ctcfit"

import matplotlib.pyplot as plt
import numpy as np

from .simulate import SimSnapshot

TRAJECTORY_HEADER = ["iteration", "t", "class", "y", "y_pseudo"]
METRICS_HEADER = ["iteration", "loss", "nonblank_mass_fraction", "blank_argmax_fraction"]


def format_float(value: float) -> str:
    """Shortest decimal string that parses back to exactly the same float."""
    return repr(float(value))


def write_trajectory_csv(path, snapshots: Iterable[SimSnapshot]) -> None:
    """One row per snapshot per frame per class: output and target values."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRAJECTORY_HEADER)
        for snap in snapshots:
            frames, num_classes = snap.probs.shape
            for t in range(frames):
                for k in range(num_classes):
                    writer.writerow(
                        [
                            snap.iteration,
                            t,
                            k,
                            format_float(snap.probs[t, k]),
                            format_float(snap.pseudo_gt[t, k]),
                        ]
                    )


def read_trajectory_csv(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Parse back into {iteration: (probs, pseudo_gt)} with exact float values."""
    cells: dict[int, dict[tuple[int, int], tuple[float, float]]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header}")
        for row in reader:
            iteration, t, k = int(row[0]), int(row[1]), int(row[2])
            cells.setdefault(iteration, {})[(t, k)] = (float(row[3]), float(row[4]))
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for iteration, entries in cells.items():
        frames = max(t for t, _ in entries) + 1
        num_classes = max(k for _, k in entries) + 1
        probs = np.empty((frames, num_classes))
        pseudo = np.empty((frames, num_classes))
        for (t, k), (y, y_pseudo) in entries.items():
            probs[t, k] = y
            pseudo[t, k] = y_pseudo
        out[iteration] = (probs, pseudo)
    return out


def write_metrics_csv(path, snapshots: Iterable[SimSnapshot]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_HEADER)
        for snap in snapshots:
            writer.writerow(
                [
                    snap.iteration,
                    format_float(snap.loss),
                    format_float(snap.nonblank_mass_fraction),
                    format_float(snap.blank_argmax_fraction),
                ]
            )


def read_metrics_csv(path) -> list[dict[str, float]]:
    rows = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        for row in reader:
            rows.append(
                {
                    "iteration": int(row[0]),
                    "loss": float(row[1]),
                    "nonblank_mass_fraction": float(row[2]),
                    "blank_argmax_fraction": float(row[3]),
                }
            )
    return rows


def write_manifest(path, entries: Sequence[tuple[str, str]]) -> None:
    """Flat key=value manifest; order is preserved as given."""
    with open(path, "w") as handle:
        for key, value in entries:
            handle.write(f"{key}={value}\n")


def _class_label(names: Sequence[str] | None, index: int, blank: int) -> str:
    if names is not None and index < len(names):
        return names[index]
    return "blank" if index == blank else f"class {index}"


def render_snapshot_figure(
    snapshot: SimSnapshot,
    blank_index: int,
    out_path,
    class_names: Sequence[str] | None = None,
) -> None:
    """Per-frame distributions at one iteration: solid output, dashed target."""
    frames, num_classes = snapshot.probs.shape
    x = np.arange(frames)
    fig, ax = plt.subplots(figsize=(8.0, 3.2))
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for k in range(num_classes):
        color = "0.45" if k == blank_index else cycle[k % len(cycle)]
        label = _class_label(class_names, k, blank_index)
        ax.plot(x, snapshot.probs[:, k], color=color, lw=1.4, label=label)
        ax.plot(x, snapshot.pseudo_gt[:, k], color=color, lw=1.0, ls="--")
    ax.set_xlim(0, frames - 1)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("frame")
    ax.set_ylabel("probability")
    ax.set_title(f"iteration {snapshot.iteration} (loss {snapshot.loss:.4g}); solid: output, dashed: target")
    ax.legend(loc="upper right", fontsize=8, ncol=min(num_classes, 4))
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_metrics_figure(metrics: Sequence[dict[str, float]], out_path) -> None:
    """Loss (log scale) and the two blank-balance fractions over iterations."""
    iterations = [m["iteration"] for m in metrics]
    fig, (ax_loss, ax_frac) = plt.subplots(2, 1, sharex=True, figsize=(8.0, 5.0))
    ax_loss.plot(iterations, [m["loss"] for m in metrics], color="tab:red")
    ax_loss.set_ylabel("loss")
    if all(m["loss"] > 0 for m in metrics):
        ax_loss.set_yscale("log")
    ax_frac.plot(
        iterations,
        [m["nonblank_mass_fraction"] for m in metrics],
        label="non-blank mass fraction",
    )
    ax_frac.plot(
        iterations,
        [m["blank_argmax_fraction"] for m in metrics],
        label="blank argmax fraction",
    )
    ax_frac.set_ylim(-0.02, 1.02)
    ax_frac.set_xlabel("iteration")
    ax_frac.set_ylabel("fraction")
    ax_frac.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def snapshot_figure_name(iteration: int) -> str:
    return f"snapshot_{iteration:06d}.svg"


__all__ = [
    "METRICS_HEADER",
    "TRAJECTORY_HEADER",
    "format_float",
    "read_metrics_csv",
    "read_trajectory_csv",
    "render_metrics_figure",
    "render_snapshot_figure",
    "snapshot_figure_name",
    "write_manifest",
    "write_metrics_csv",
    "write_trajectory_csv",
]
