"""Figure construction for run directories: one function per figure kind.

Everything here draws from the files a run directory already contains; no
metric is ever recomputed. Styling is fixed (no timestamps, fixed sizes and
palette) so rendering the same inputs twice gives identical image bytes.
"""

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import schema  # noqa: E402
from .schema import SchemaError  # noqa: E402

KINDS = ("convergence", "config-space", "landscape", "density", "baselines", "ablations")

DPI = 150
# one stable color per curve index; method colors for the baseline figure
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
METHOD_COLORS = {"sa": "#d62728", "ga": "#2ca02c", "de": "#9467bd"}
GRADIENT_COLOR = "#1f77b4"


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: a figure kind, its input directories, the output path."""

    kind: str
    runs: tuple
    out: Path
    ref: Path = None  # optional flat metrics JSON for reference lines

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.runs:
            raise ValueError("at least one --run directory is required")
        object.__setattr__(self, "runs", tuple(Path(r) for r in self.runs))
        object.__setattr__(self, "out", Path(self.out))
        if self.ref is not None:
            object.__setattr__(self, "ref", Path(self.ref))


def wrap360(deg):
    """Angles folded into [0, 360)."""
    return np.asarray(deg, dtype=np.float64) % 360.0


# ---------------------------------------------------------------------------
# data preparation (pure, unit-testable)


def config_space_points(run_dir) -> dict:
    """Initial/final/reference (RAAN, MA) scatter data for a plane/phase run.

    Works for runs whose decision vector is one shared RAAN per plane plus one
    mean anomaly per satellite (slot names raan_plane*/ma_sat*); the initial
    layout comes from the config snapshot's resolved vector, the final one
    from elements.json, and the reference lattice is the equispaced pattern
    with unit inter-plane phasing.
    """
    cfg = schema.read_config(run_dir)
    resolved = cfg.get("resolved", {})
    slot_names = resolved.get("slot_names")
    theta0 = resolved.get("theta0")
    if not slot_names or theta0 is None:
        raise SchemaError(f"{Path(run_dir) / 'config.yaml'}: missing keys "
                          "['resolved.slot_names', 'resolved.theta0']")
    raan_slots = [i for i, n in enumerate(slot_names) if n.startswith("raan_plane")]
    ma_slots = [i for i, n in enumerate(slot_names) if n.startswith("ma_sat")]
    planes = len(raan_slots)
    if planes == 0 or not ma_slots or len(ma_slots) % planes:
        raise SchemaError("config-space needs a plane/phase layout "
                          "(raan_plane*/ma_sat* slots)")
    per_plane = len(ma_slots) // planes

    theta0 = np.asarray(theta0, dtype=np.float64)
    init_raan = wrap360(np.degrees(theta0[raan_slots]))
    init_ma = wrap360(np.degrees(theta0[ma_slots]))
    init_raan = np.repeat(init_raan, per_plane)

    sats = schema.read_satellites(run_dir)
    final_raan = wrap360([s["raan_deg"] for s in sats])
    final_ma = wrap360([s["ma_deg"] for s in sats])

    total = planes * per_plane
    ref_raan = []
    ref_ma = []
    for p in range(planes):
        for s in range(per_plane):
            ref_raan.append((p * 360.0 / planes) % 360.0)
            ref_ma.append((s * 360.0 / per_plane + p * 360.0 / total) % 360.0)
    return {
        "initial": (init_raan, init_ma),
        "final": (final_raan, final_ma),
        "reference": (np.asarray(ref_raan), np.asarray(ref_ma)),
    }


def grid_from_long(x, y, z):
    """(x_axis, y_axis, Z[ny, nx]) from long-format columns on a full grid."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x_axis = np.unique(x)
    y_axis = np.unique(y)
    if x_axis.size * y_axis.size != z.size:
        raise SchemaError(
            f"grid is not dense: {x_axis.size} x {y_axis.size} axes vs {z.size} rows")
    order = np.lexsort((x, y))
    return x_axis, y_axis, z[order].reshape(y_axis.size, x_axis.size)


def bestsofar_curve(suite_dir, method, summary) -> tuple:
    """(evals, best-so-far revisit) of the method's best seed."""
    best_dir = Path(suite_dir) / summary["methods"][method]["best"]["dir"]
    cols = schema.read_bestsofar(best_dir)
    return cols["evals"], cols["best_hard_revisit_min"]


# ---------------------------------------------------------------------------
# figure kinds


def fig_convergence(spec: FigureSpec):
    fig, (ax_cov, ax_rev) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    for i, run in enumerate(spec.runs):
        cols = schema.read_trace(run)
        label = schema.experiment_name(run)
        color = PALETTE[i % len(PALETTE)]
        it = cols["iter"]
        ax_cov.plot(it, 100.0 * cols["hard_coverage"], color=color, lw=1.4, label=label)
        ax_rev.plot(it, cols["hard_revisit_min"], color=color, lw=1.4, label=label)
        soft_cov = cols["soft_coverage"]
        if np.isfinite(soft_cov).any():
            ax_cov.plot(it, 100.0 * soft_cov, color=color, lw=0.9, ls=":", alpha=0.7)
            ax_rev.plot(it, cols["soft_revisit_min"], color=color, lw=0.9, ls=":", alpha=0.7)
    if spec.ref is not None:
        ref = schema.read_ref_metrics(spec.ref)
        ax_cov.axhline(100.0 * ref["hard_coverage"], color="k", ls="--", lw=1.0,
                       label="reference")
        ax_rev.axhline(ref["hard_revisit_min"], color="k", ls="--", lw=1.0)
    ax_cov.set_ylabel("hard coverage [%]")
    ax_rev.set_ylabel("hard max revisit [min]")
    ax_rev.set_xlabel("iteration")
    ax_cov.legend(loc="best", fontsize=8)
    for ax in (ax_cov, ax_rev):
        ax.grid(alpha=0.3)
    return fig


def fig_config_space(spec: FigureSpec):
    pts = config_space_points(spec.runs[0])
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    rr, rm = pts["reference"]
    ax.scatter(rr, rm, marker="*", s=110, c="#f0c419", edgecolors="k",
               linewidths=0.4, label="reference slots", zorder=2)
    ir, im = pts["initial"]
    ax.scatter(ir, im, facecolors="none", edgecolors="#1f77b4", s=45,
               label="initial", zorder=3)
    fr, fm = pts["final"]
    ax.scatter(fr, fm, c="#d62728", s=28, label="final", zorder=4)
    ax.set_xlim(0.0, 360.0)
    ax.set_ylim(0.0, 360.0)
    ax.set_xticks(np.arange(0, 361, 60))
    ax.set_yticks(np.arange(0, 361, 60))
    ax.set_xlabel("RAAN [deg]")
    ax.set_ylabel("mean anomaly [deg]")
    ax.set_title(schema.experiment_name(spec.runs[0]))
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def fig_landscape(spec: FigureSpec):
    dir_ = spec.runs[0]
    cols = schema.read_landscape(dir_)
    x_axis, y_axis, Z = grid_from_long(cols["x_deg"], cols["y_deg"], cols["hard_loss"])
    fig, ax = plt.subplots(figsize=(6.4, 5.4))
    mesh = ax.pcolormesh(x_axis, y_axis, Z, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="hard loss")
    traj_path = Path(dir_) / "landscape_traj.csv"
    if traj_path.is_file():
        traj = schema.read_landscape_traj(dir_)
        tx, ty = traj["x_deg"], traj["y_deg"]
        # split the overlay where the path wraps across the 0/360 seam
        jump = np.where((np.abs(np.diff(tx)) > 180.0) | (np.abs(np.diff(ty)) > 180.0))[0]
        for seg in np.split(np.arange(tx.size), jump + 1):
            ax.plot(tx[seg], ty[seg], color="w", lw=1.2, zorder=3)
        ax.plot(tx[-1], ty[-1], marker="*", ms=14, color="#f0c419",
                markeredgecolor="k", markeredgewidth=0.5, zorder=4)
    ax.set_xlabel("first axis [deg]")
    ax.set_ylabel("second axis [deg]")
    return fig


def fig_density(spec: FigureSpec):
    cols = schema.read_density(spec.runs[0])
    fig, ax = plt.subplots(figsize=(8.0, 4.2))
    try:
        lon_axis, lat_axis, Z = grid_from_long(
            cols["lon_deg"], cols["lat_deg"], cols["covered_steps"])
    except SchemaError:
        # scattered target sets (e.g. regional point lists) are not a grid
        sc = ax.scatter(cols["lon_deg"], cols["lat_deg"], c=cols["covered_steps"],
                        s=14, cmap="magma", edgecolors="none")
        fig.colorbar(sc, ax=ax, label="covered steps")
    else:
        mesh = ax.pcolormesh(lon_axis, lat_axis, Z, shading="nearest", cmap="magma")
        fig.colorbar(mesh, ax=ax, label="covered steps")
    ax.set_xlabel("longitude [deg]")
    ax.set_ylabel("latitude [deg]")
    return fig


def fig_baselines(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    drew = False
    for run in spec.runs:
        if (Path(run) / "summary.json").is_file():
            summary = schema.read_summary(run)
            n_seeds = summary.get("n_seeds")
            for method in summary["methods"]:
                ev, rev = bestsofar_curve(run, method, summary)
                label = f"{method} (best of {n_seeds})" if n_seeds else method
                ax.plot(ev, rev, color=METHOD_COLORS.get(method, "#7f7f7f"),
                        lw=1.4, label=label)
                drew = True
        else:
            cols = schema.read_trace(run)
            rev = np.minimum.accumulate(cols["hard_revisit_min"])
            ax.plot(cols["evals"], rev, color=GRADIENT_COLOR, lw=1.6,
                    label=schema.experiment_name(run))
            drew = True
    if not drew:
        raise SchemaError("baselines figure got no usable inputs")
    ax.set_xlabel("objective evaluations")
    ax.set_ylabel("best hard max revisit so far [min]")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return fig


def fig_ablations(spec: FigureSpec):
    labels = []
    covs = []
    revs = []
    for run in spec.runs:
        final = schema.read_metrics(run)["final"]
        labels.append(schema.experiment_name(run))
        covs.append(100.0 * final["hard_coverage"])
        revs.append(final["hard_revisit_min"])
    x = np.arange(len(labels))
    fig, (ax_cov, ax_rev) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax_cov.bar(x, covs, color="#1f77b4")
    ax_cov.set_ylabel("final hard coverage [%]")
    ax_rev.bar(x, revs, color="#d62728")
    ax_rev.set_ylabel("final hard max revisit [min]")
    for ax in (ax_cov, ax_rev):
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.grid(alpha=0.3, axis="y")
    return fig


_BUILDERS = {
    "convergence": fig_convergence,
    "config-space": fig_config_space,
    "landscape": fig_landscape,
    "density": fig_density,
    "baselines": fig_baselines,
    "ablations": fig_ablations,
}


def render(spec: FigureSpec) -> Path:
    """Draw the requested figure and write it to spec.out."""
    fig = _BUILDERS[spec.kind](spec)
    fig.tight_layout()
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=DPI)
    plt.close(fig)
    return spec.out
