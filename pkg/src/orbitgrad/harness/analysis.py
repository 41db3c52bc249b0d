"""Loss-surface slices, iterate PCA, and the relaxation-parameter sweep."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from orbitgrad import autodiff as ad
from orbitgrad.earthgeo import GroundTargetSet, SimWindow, elevation_series
from orbitgrad.metrics import (
    coverage_fraction,
    leaky_gaps,
    noisy_or,
    smooth_max,
    soft_visibility,
    weighted_mean,
)
from orbitgrad.objective import DesignProblem, ParamSpec
from orbitgrad.orbits import positions_array
from orbitgrad.earthgeo import inertial_to_ecef

# calibration solutions are always handled in this order
TIER_NAMES = ("near_uniform", "moderate", "clustered", "two_cluster")

TAU_COV_GRID = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)
TAU_REV_GRID = (0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
BETA_GRID = (3.0, 5.0, 7.5, 10.0, 15.0, 20.0)
LAM_GRID = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# 2-D loss landscape over two periodic slots


@dataclass
class LandscapeGrid:
    x_name: str
    y_name: str
    x_deg: np.ndarray  # (R,)
    y_deg: np.ndarray  # (R,)
    relaxed: np.ndarray  # (R, R) indexed [iy, ix]
    hard: np.ndarray
    hard_coverage: np.ndarray
    hard_revisit_min: np.ndarray


def slot_index(spec: ParamSpec, name_or_index) -> int:
    if isinstance(name_or_index, str):
        try:
            return spec.slot_names.index(name_or_index)
        except ValueError:
            raise ValueError(f"spec has no slot named {name_or_index!r}") from None
    i = int(name_or_index)
    if not 0 <= i < spec.n_slots:
        raise ValueError(f"slot index {i} out of range for {spec.n_slots} slots")
    return i


def landscape_grid(spec: ParamSpec, problem: DesignProblem, theta_base,
                   x_slot, y_slot, resolution: int = 65,
                   lo_deg: float = 0.0, hi_deg: float = 360.0) -> LandscapeGrid:
    """Relaxed and exact losses on a 2-D angular slice through theta_base."""
    xi = slot_index(spec, x_slot)
    yi = slot_index(spec, y_slot)
    if xi == yi:
        raise ValueError("landscape axes must be two different slots")
    for i in (xi, yi):
        if spec.slots[i].kind != "periodic":
            raise ValueError(f"slot {spec.slots[i].name!r} is not an angle")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")

    axis_deg = np.linspace(lo_deg, hi_deg, resolution)
    base = np.asarray(theta_base, dtype=np.float64).copy()
    lam = problem.relax.lam
    shape = (resolution, resolution)
    relaxed = np.empty(shape)
    hard = np.empty(shape)
    cov = np.empty(shape)
    rev = np.empty(shape)
    for iy, ydeg in enumerate(axis_deg):
        for ix, xdeg in enumerate(axis_deg):
            th = base.copy()
            th[xi] = math.radians(xdeg)
            th[yi] = math.radians(ydeg)
            loss, aux = problem.relaxed_loss(th, spec)
            hm = problem.hard_eval(aux.positions_ecef)
            relaxed[iy, ix] = float(ad.value(loss))
            hard[iy, ix] = -hm.coverage + lam * hm.revisit_min
            cov[iy, ix] = hm.coverage
            rev[iy, ix] = hm.revisit_min
    return LandscapeGrid(spec.slots[xi].name, spec.slots[yi].name,
                         axis_deg, axis_deg.copy(), relaxed, hard, cov, rev)


def write_landscape(grid: LandscapeGrid, path) -> None:
    with open(path, "w") as fh:
        fh.write("x_deg,y_deg,relaxed_loss,hard_loss,hard_coverage,hard_revisit_min\n")
        for iy in range(grid.y_deg.size):
            for ix in range(grid.x_deg.size):
                fh.write(
                    f"{grid.x_deg[ix]:.17g},{grid.y_deg[iy]:.17g},"
                    f"{grid.relaxed[iy, ix]:.17g},{grid.hard[iy, ix]:.17g},"
                    f"{grid.hard_coverage[iy, ix]:.17g},{grid.hard_revisit_min[iy, ix]:.17g}\n"
                )


def write_landscape_traj(iters, thetas, xi: int, yi: int, path) -> None:
    """Optimizer path projected onto the two landscape axes, degrees."""
    with open(path, "w") as fh:
        fh.write("iter,x_deg,y_deg\n")
        for it, th in zip(iters, thetas):
            x = math.degrees(float(th[xi])) % 360.0
            y = math.degrees(float(th[yi])) % 360.0
            fh.write(f"{it},{x:.17g},{y:.17g}\n")


# ---------------------------------------------------------------------------
# PCA slice through an optimization trajectory


@dataclass
class PCASlice:
    u_axis: np.ndarray  # (R,) coords along the first component
    v_axis: np.ndarray
    relaxed: np.ndarray  # (R, R) indexed [iv, iu]
    hard: np.ndarray
    hard_coverage: np.ndarray
    hard_revisit_min: np.ndarray
    u_traj: np.ndarray  # (m,)
    v_traj: np.ndarray
    iters: np.ndarray
    mean: np.ndarray  # (n,)
    components: np.ndarray  # (2, n) orthonormal
    explained: np.ndarray  # variance fractions, all components


def pca_slice(iters, thetas, spec: ParamSpec, problem: DesignProblem,
              resolution: int = 21, margin: float = 0.2) -> PCASlice:
    """Evaluate the loss on the plane of the two leading iterate directions."""
    X = np.asarray(thetas, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need at least 3 iterates for a PCA slice")
    if np.unique(X, axis=0).shape[0] < 3:
        raise ValueError("iterates are not distinct enough for a PCA slice")
    mean = X.mean(axis=0)
    D = X - mean
    _, svals, vt = np.linalg.svd(D, full_matrices=False)
    if svals[0] <= 0.0:
        raise ValueError("iterates are all identical")
    total = float(np.sum(svals**2))
    explained = svals**2 / total
    comps = vt[:2]

    u = D @ comps[0]
    v = D @ comps[1] if comps.shape[0] > 1 else np.zeros_like(u)
    if comps.shape[0] < 2:
        # a 2-point-rank trajectory still gets a plane: any unit vector
        # orthogonal to PC1 works and carries zero variance
        comps = np.vstack([comps, _any_orthonormal(comps[0])])

    def bbox(w):
        lo, hi = float(np.min(w)), float(np.max(w))
        span = hi - lo
        if span < 1e-9:
            span = max(1.0, 0.1 * (float(np.max(u)) - float(np.min(u))))
            lo, hi = -0.5 * span, 0.5 * span
        pad = margin * span
        return lo - pad, hi + pad

    ulo, uhi = bbox(u)
    vlo, vhi = bbox(v)
    u_axis = np.linspace(ulo, uhi, resolution)
    v_axis = np.linspace(vlo, vhi, resolution)

    lam = problem.relax.lam
    shape = (resolution, resolution)
    relaxed = np.empty(shape)
    hard = np.empty(shape)
    cov = np.empty(shape)
    rev = np.empty(shape)
    for iv, vv in enumerate(v_axis):
        for iu, uu in enumerate(u_axis):
            th = mean + uu * comps[0] + vv * comps[1]
            loss, aux = problem.relaxed_loss(th, spec)
            hm = problem.hard_eval(aux.positions_ecef)
            relaxed[iv, iu] = float(ad.value(loss))
            hard[iv, iu] = -hm.coverage + lam * hm.revisit_min
            cov[iv, iu] = hm.coverage
            rev[iv, iu] = hm.revisit_min
    return PCASlice(u_axis, v_axis, relaxed, hard, cov, rev,
                    u, v, np.asarray(iters, dtype=np.int64), mean, comps, explained)


def _any_orthonormal(w: np.ndarray) -> np.ndarray:
    e = np.zeros_like(w)
    e[int(np.argmin(np.abs(w)))] = 1.0
    e -= (e @ w) * w
    return e / np.linalg.norm(e)


def write_pca(sl: PCASlice, outdir) -> None:
    outdir = Path(outdir)
    with open(outdir / "pca_grid.csv", "w") as fh:
        fh.write("u,v,relaxed_loss,hard_loss,hard_coverage,hard_revisit_min\n")
        for iv in range(sl.v_axis.size):
            for iu in range(sl.u_axis.size):
                fh.write(
                    f"{sl.u_axis[iu]:.17g},{sl.v_axis[iv]:.17g},"
                    f"{sl.relaxed[iv, iu]:.17g},{sl.hard[iv, iu]:.17g},"
                    f"{sl.hard_coverage[iv, iu]:.17g},{sl.hard_revisit_min[iv, iu]:.17g}\n"
                )
    with open(outdir / "pca_traj.csv", "w") as fh:
        fh.write("iter,u,v\n")
        for it, uu, vv in zip(sl.iters, sl.u_traj, sl.v_traj):
            fh.write(f"{it},{uu:.17g},{vv:.17g}\n")
    meta = {
        "explained_variance_ratio": [float(x) for x in sl.explained],
        "mean": [float(x) for x in sl.mean],
        "components": [[float(x) for x in c] for c in sl.components],
        "n_iterates": int(sl.iters.size),
    }
    with open(outdir / "pca_meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# relaxation-parameter sweep over hand-ranked calibration solutions


def rank_validity(losses):
    """(valid, margin) for one cell: both good losses below both poor ones.

    losses is ordered as TIER_NAMES; margin is min(poor) - max(good), so a
    cell is valid exactly when its margin is positive.
    """
    lhs = max(losses[0], losses[1])
    rhs = min(losses[2], losses[3])
    return lhs < rhs, rhs - lhs


def hyperparam_grid(thetas, spec: ParamSpec, targets: GroundTargetSet,
                    window: SimWindow, alpha_min_deg: float = 10.0,
                    tau_cov_grid=TAU_COV_GRID, tau_rev_grid=TAU_REV_GRID,
                    beta_grid=BETA_GRID, lam_grid=LAM_GRID) -> list:
    """Relaxed loss of four reference solutions across the parameter grid.

    thetas holds one decision vector per tier, ordered as TIER_NAMES: two
    layouts known to be good followed by two known to be poor.  A grid cell
    is valid when the relaxation ranks every good layout strictly below
    every poor one; margin is the gap between the groups (positive = valid).

    The sweep factorizes: elevations are computed once per solution, each
    tau reuses them, and each (tau_rev, beta) pair reuses the gap series,
    so the full grid costs a handful of propagations rather than one per row.
    """
    if len(thetas) != len(TIER_NAMES):
        raise ValueError(f"need {len(TIER_NAMES)} solutions, got {len(thetas)}")

    weight = targets.weight
    covs = []  # per solution: {tau_cov: coverage}
    revs = []  # per solution: {(tau_rev, beta): revisit}
    for theta in thetas:
        els = spec.unpack([float(v) for v in theta])
        pos = positions_array(els, window.times_s)
        xe, ye, ze = inertial_to_ecef(
            pos[:, :, 0], pos[:, :, 1], pos[:, :, 2], window.gmst_rad
        )
        alphas = [elevation_series(xe[i], ye[i], ze[i], targets)
                  for i in range(len(els))]

        def or_coverage(tau):
            return noisy_or([soft_visibility(a, alpha_min_deg, tau) for a in alphas])

        covs.append({t: float(coverage_fraction(or_coverage(t), weight))
                     for t in tau_cov_grid})
        rv = {}
        for t in tau_rev_grid:
            gaps = leaky_gaps(or_coverage(t), window.dt_min)
            for b in beta_grid:
                worst = smooth_max(gaps, b, axis=-1)
                rv[(t, b)] = float(weighted_mean(worst, weight))
        revs.append(rv)

    rows = []
    for tc in tau_cov_grid:
        for tr in tau_rev_grid:
            for b in beta_grid:
                for lam in lam_grid:
                    losses = [-covs[s][tc] + lam * revs[s][(tr, b)]
                              for s in range(len(TIER_NAMES))]
                    valid, margin = rank_validity(losses)
                    rows.append(
                        {
                            "tau_cov_deg": tc,
                            "tau_rev_deg": tr,
                            "beta_min": b,
                            "lam": lam,
                            **{f"loss_{name}": losses[s]
                               for s, name in enumerate(TIER_NAMES)},
                            "valid": valid,
                            "margin": margin,
                        }
                    )
    return rows


def select_hyperparams(rows):
    """Coarsest valid cell: max tau_cov, then tau_rev, then ranking margin."""
    valid = [r for r in rows if r["valid"]]
    if not valid:
        return None
    return max(valid, key=lambda r: (r["tau_cov_deg"], r["tau_rev_deg"], r["margin"]))


def write_hyperparam_rows(rows, path) -> None:
    names = ["tau_cov_deg", "tau_rev_deg", "beta_min", "lam"]
    names += [f"loss_{n}" for n in TIER_NAMES] + ["valid", "margin"]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for r in rows:
            vals = [f"{r[n]:.17g}" for n in names[:4]]
            vals += [f"{r[f'loss_{n}']:.17g}" for n in TIER_NAMES]
            vals += [str(int(r["valid"])), f"{r['margin']:.17g}"]
            fh.write(",".join(vals) + "\n")
