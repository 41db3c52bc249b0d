"""Resolve configs into problems, execute runs, and write run directories.

A run directory is the unit of exchange with downstream tooling:

    config.yaml    snapshot sufficient to reproduce the run bit-exactly
    trace.csv      iter, evals, loss, soft/hard coverage and revisit per row
    thetas.csv     thinned parameter iterates (gradient runs)
    elements.json  final orbital elements per satellite + plane ids
    metrics.json   initial and final hard+soft metrics
    density.csv    per-target visibility counts (when requested)
    bestsofar.csv  evaluation-indexed best fitness (baseline runs)
"""

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from orbitgrad.constants import R_EARTH
from orbitgrad.earthgeo import GroundTargetSet, SimWindow, latlon_grid, load_targets
from orbitgrad.harness.config import (
    ExperimentConfig,
    save_config,
    seed_stream,
    stream_seed,
)
from orbitgrad.metrics import HardMetrics, RelaxConfig, hard_metrics
from orbitgrad.objective import (
    DesignProblem,
    ParamSpec,
    SatRecipe,
    invert_interval,
    phase_pair_spec,
    relaxed_loss,
    two_plane_shape_spec,
    walker_share_spec,
)
from orbitgrad.optim import AdamWConfig, BaselineConfig, RunTrace, run_de, run_ga, run_gradient, run_sa
from orbitgrad.orbits import ElementSet

TRACE_COLUMNS = ("iter", "evals", "loss", "soft_coverage", "soft_revisit_min",
                 "hard_coverage", "hard_revisit_min")


@dataclass
class MetricsReport:
    """Exact and relaxed metrics of one constellation, no optimization."""

    hard_coverage: float
    hard_revisit_min: float
    soft_coverage: float
    soft_revisit_min: float

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# config resolution


def resolve_spec(model: dict) -> ParamSpec:
    kind = model.get("kind")
    if kind == "phase_pair":
        return phase_pair_spec(
            alt_km=model.get("alt_km", 550.0),
            inc_deg=model.get("inc_deg", 60.0),
            raan_deg=model.get("raan_deg", 0.0),
        )
    if kind == "walker_share":
        return walker_share_spec(
            planes=model.get("planes", 6),
            per_plane=model.get("per_plane", 4),
            alt_km=model.get("alt_km", 550.0),
            inc_deg=model.get("inc_deg", 60.0),
        )
    if kind == "two_plane_shape":
        return two_plane_shape_spec(
            per_plane=model.get("per_plane", 2),
            inc_bounds_deg=tuple(model.get("inc_bounds_deg", (30.0, 90.0))),
            rp_bounds_km=tuple(model.get("rp_bounds_km", (400.0, 600.0))),
            excess_max_km=model.get("excess_max_km", 1500.0),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def resolve_targets(targets: dict) -> GroundTargetSet:
    kind = targets.get("kind")
    if kind == "grid":
        return latlon_grid(targets.get("n_lat", 36), targets.get("n_lon", 72),
                           targets.get("lat_max_deg", 70.0))
    if kind == "csv":
        path = targets["path"]
        if isinstance(path, str) and path.startswith("builtin:"):
            name = path[len("builtin:"):]
            path = resources.files("orbitgrad").joinpath(f"data/{name}.csv")
        return load_targets(path)
    raise ValueError(f"unknown target kind {kind!r}")


def resolve_window(window: dict, master_seed: int) -> SimWindow:
    offset = 0.0
    if window.get("gmst_randomize", False):
        offset = float(seed_stream(master_seed, "gmst").uniform(0.0, 2.0 * math.pi))
    return SimWindow(
        epoch=datetime.fromisoformat(window.get("epoch", "2024-01-01T00:00:00")),
        horizon_s=float(window.get("horizon_s", 86400.0)),
        steps=int(window.get("steps", 240)),
        gmst_offset=offset,
    )


def resolve_relax(relax: dict) -> RelaxConfig:
    return RelaxConfig(**relax)


def _slot_by_name(spec: ParamSpec, name: str):
    for slot in spec.slots:
        if slot.name == name:
            return slot
    raise ValueError(f"spec has no slot named {name!r}")


def resolve_init(init: dict, spec: ParamSpec, master_seed: int) -> np.ndarray:
    """Initial decision vector from an init recipe (seeded recipes included)."""
    kind = init.get("kind")
    n = spec.n_slots
    if kind == "explicit":
        theta = np.asarray(init["theta"], dtype=np.float64)
    elif kind == "angles_deg":
        if any(s.kind != "periodic" for s in spec.slots):
            raise ValueError("angles_deg init requires an all-periodic spec")
        theta = np.radians(np.asarray(init["values_deg"], dtype=np.float64))
    elif kind == "raan_ma_random":
        raans = np.radians(np.asarray(init["raan_deg"], dtype=np.float64))
        n_ma = n - raans.size
        if n_ma <= 0:
            raise ValueError("raan_ma_random init has more planes than slots")
        legacy = np.random.RandomState(int(init.get("ma_seed", 42)))
        mas = np.radians(legacy.uniform(0.0, 360.0, n_ma))
        theta = np.concatenate([raans, mas])
    elif kind == "random_raan_ma":
        n_raan = sum(1 for s in spec.slots if s.name.startswith("raan"))
        n_ma = sum(1 for s in spec.slots if s.name.startswith("ma"))
        if n_raan + n_ma != n:
            raise ValueError("random_raan_ma init needs a raan/ma-only spec")
        raans = seed_stream(master_seed, "raan").uniform(0.0, 2.0 * math.pi, n_raan)
        mas = seed_stream(master_seed, "ma").uniform(0.0, 2.0 * math.pi, n_ma)
        theta = np.concatenate([raans, mas])
    elif kind == "two_plane":
        raan = np.radians(np.asarray(init["raan_deg"], dtype=np.float64))
        argp = np.radians(np.asarray(init.get("argp_deg", [0.0, 0.0]), dtype=np.float64))
        ma_base = np.radians(np.asarray(init.get("ma_base_deg", [0.0, 0.0]), dtype=np.float64))
        inc_theta = float(init.get("inc_theta", 0.0))
        exc_theta = float(init.get("excess_theta", -7.0))
        alt = float(init.get("alt_km", 550.0))
        parts = []
        for p in range(2):
            rp_slot = _slot_by_name(spec, f"perigee_plane{p}")
            rp_theta = invert_interval(alt, rp_slot.lo, rp_slot.hi)
            parts += [inc_theta, raan[p], argp[p], rp_theta, exc_theta, ma_base[p]]
        theta = np.asarray(parts, dtype=np.float64)
    else:
        raise ValueError(f"unknown init kind {kind!r}")
    if theta.shape != (n,):
        raise ValueError(f"init resolves to {theta.shape}, spec has {n} slots")
    return theta


def build_problem(cfg: ExperimentConfig):
    """Resolve a config into (spec, theta0, problem)."""
    spec = resolve_spec(cfg.model)
    theta0 = resolve_init(cfg.init, spec, cfg.seed)
    problem = DesignProblem(
        targets=resolve_targets(cfg.targets),
        window=resolve_window(cfg.window, cfg.seed),
        relax=resolve_relax(cfg.relax),
        cov_weight=cfg.cov_weight,
    )
    return spec, theta0, problem


# ---------------------------------------------------------------------------
# constellation evaluation (no optimization)


def fixed_spec(elements) -> ParamSpec:
    """A zero-slot spec pinning every element, for specless evaluation."""
    sats = []
    for el in elements:
        el = el.as_floats()
        sats.append(
            SatRecipe(
                shape=("fixed_ae", el.a, el.e),
                inc=("fixed", el.inc),
                raan=("fixed", el.raan),
                argp=("fixed", el.argp),
                ma=("fixed", el.ma),
            )
        )
    return ParamSpec(slots=[], sats=sats)


def _eval_elements(elements, targets, window, relax):
    _, aux = relaxed_loss([], fixed_spec(elements), targets, window, relax)
    hm = hard_metrics(aux.positions_ecef, targets, relax.alpha_min_deg, window.dt_min)
    report = MetricsReport(hm.coverage, hm.revisit_min, aux.soft_coverage, aux.soft_revisit_min)
    return report, hm


def eval_constellation(elements, targets: GroundTargetSet, window: SimWindow,
                       relax: RelaxConfig) -> MetricsReport:
    """Hard and soft metrics of a fixed element list over one window."""
    report, _ = _eval_elements(elements, targets, window, relax)
    return report


# ---------------------------------------------------------------------------
# run-directory serialization


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_trace(points, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for p in points:
            fh.write(
                f"{p.iter},{p.evals},{_fmt(p.loss)},{_fmt(p.soft_coverage)},"
                f"{_fmt(p.soft_revisit_min)},{_fmt(p.hard_coverage)},{_fmt(p.hard_revisit_min)}\n"
            )


def read_trace(run_dir) -> dict:
    """Trace columns as float arrays (iter/evals as int64)."""
    path = Path(run_dir) / "trace.csv"
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {header} in {path}")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    cols = {name: raw[:, i] for i, name in enumerate(TRACE_COLUMNS)}
    cols["iter"] = cols["iter"].astype(np.int64)
    cols["evals"] = cols["evals"].astype(np.int64)
    return cols


def write_thetas(iters, thetas, path) -> None:
    n = len(thetas[0]) if len(thetas) else 0
    with open(path, "w") as fh:
        fh.write("iter," + ",".join(f"theta_{i}" for i in range(n)) + "\n")
        for it, th in zip(iters, thetas):
            fh.write(str(it) + "," + ",".join(_fmt(v) for v in th) + "\n")


def read_thetas(run_dir):
    path = Path(run_dir) / "thetas.csv"
    with path.open() as fh:
        fh.readline()
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    return raw[:, 0].astype(np.int64), raw[:, 1:]


def _plane_ids_from_spec(spec: ParamSpec) -> list:
    keys = []
    ids = []
    for rec in spec.sats:
        if rec.raan not in keys:
            keys.append(rec.raan)
        ids.append(keys.index(rec.raan))
    return ids


def _plane_ids_from_values(raans) -> list:
    keys = []
    ids = []
    for r in raans:
        r = float(r)
        if r not in keys:
            keys.append(r)
        ids.append(keys.index(r))
    return ids


def element_records(elements, plane_ids) -> list:
    recs = []
    for el, plane in zip(elements, plane_ids):
        el = el.as_floats()
        recs.append(
            {
                "a_km": el.a,
                "e": el.e,
                "inc_deg": math.degrees(el.inc) % 360.0,
                "raan_deg": math.degrees(el.raan) % 360.0,
                "argp_deg": math.degrees(el.argp) % 360.0,
                "ma_deg": math.degrees(el.ma) % 360.0,
                "perigee_km": el.a * (1.0 - el.e) - R_EARTH,
                "apogee_km": el.a * (1.0 + el.e) - R_EARTH,
                "plane": plane,
            }
        )
    return recs


def write_elements(spec: ParamSpec, theta, path) -> None:
    els = spec.unpack(list(theta))
    doc = {
        "satellites": element_records(els, _plane_ids_from_spec(spec)),
        "theta": [float(v) for v in theta],
        "slot_names": spec.slot_names,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_element_sets(elements, path) -> None:
    """Elements JSON for a bare constellation (no decision vector)."""
    raans = [float(el.as_floats().raan) for el in elements]
    doc = {"satellites": element_records(elements, _plane_ids_from_values(raans))}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def elements_from_json(path) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    sats = doc.get("satellites")
    if not sats:
        raise ValueError(f"{path} has no satellites")
    els = []
    for s in sats:
        missing = [k for k in ("a_km", "e", "inc_deg", "raan_deg", "argp_deg", "ma_deg") if k not in s]
        if missing:
            raise ValueError(f"satellite record missing {missing}")
        els.append(
            ElementSet(
                a=float(s["a_km"]),
                e=float(s["e"]),
                inc=math.radians(float(s["inc_deg"])),
                raan=math.radians(float(s["raan_deg"])),
                argp=math.radians(float(s["argp_deg"])),
                ma=math.radians(float(s["ma_deg"])),
            )
        )
    return els


def write_density(targets: GroundTargetSet, hm: HardMetrics, path) -> None:
    lat = np.degrees(targets.lat)
    lon = np.degrees(targets.lon)
    with open(path, "w") as fh:
        fh.write("lat_deg,lon_deg,weight,covered_steps\n")
        for j in range(targets.size):
            fh.write(f"{_fmt(lat[j])},{_fmt(lon[j])},{_fmt(targets.weight[j])},{int(hm.covered_steps[j])}\n")


def write_bestsofar(points, path) -> None:
    best = math.inf
    cov = math.nan
    rev = math.nan
    with open(path, "w") as fh:
        fh.write("evals,best_loss,best_hard_coverage,best_hard_revisit_min\n")
        for p in points:
            if p.loss < best:
                best, cov, rev = p.loss, p.hard_coverage, p.hard_revisit_min
            fh.write(f"{p.evals},{_fmt(best)},{_fmt(cov)},{_fmt(rev)}\n")


# ---------------------------------------------------------------------------
# experiment execution


def _run_optimizer(cfg: ExperimentConfig, spec, theta0, problem) -> RunTrace:
    opt = cfg.optimizer
    method = opt.get("method", "gradient")
    if method == "gradient":
        acfg = AdamWConfig(
            lr=float(opt.get("lr", 1e-2)),
            weight_decay=float(opt.get("weight_decay", 0.0)),
            iters=int(opt["iters"]),
        )
        return run_gradient(theta0, spec, problem, acfg)
    if method in ("sa", "ga", "de"):
        seed = opt.get("seed")
        if seed is None:
            seed = stream_seed(cfg.seed, "opt")
        bcfg = BaselineConfig(method=method, budget=int(opt.get("budget", 4050)), seed=int(seed))
        runner = {"sa": run_sa, "ga": run_ga, "de": run_de}[method]
        return runner(theta0, spec, problem, bcfg)
    raise ValueError(f"unknown optimizer method {method!r}")


def run_experiment(cfg: ExperimentConfig, out=None) -> Path:
    """Execute one configured run and write its run directory."""
    outdir = Path(out if out is not None else (cfg.out or f"runs/{cfg.experiment}"))
    outdir.mkdir(parents=True, exist_ok=True)
    spec, theta0, problem = build_problem(cfg)

    trace = _run_optimizer(cfg, spec, theta0, problem)
    theta_f = np.asarray(trace.final_theta, dtype=np.float64)

    init_report, _ = _eval_elements(spec.unpack(list(theta0)), problem.targets, problem.window, problem.relax)
    final_report, final_hard = _eval_elements(spec.unpack(list(theta_f)), problem.targets, problem.window, problem.relax)

    save_config(
        cfg.with_overrides(out=str(outdir)),
        outdir / "config.yaml",
        resolved={
            "theta0": [float(v) for v in theta0],
            "gmst_offset_rad": float(problem.window.gmst_offset),
            "slot_names": spec.slot_names,
        },
    )
    write_trace(trace.points, outdir / "trace.csv")
    if trace.thetas:
        write_thetas(trace.theta_iters, trace.thetas, outdir / "thetas.csv")
    else:
        write_bestsofar(trace.points, outdir / "bestsofar.csv")
    write_elements(spec, theta_f, outdir / "elements.json")
    with open(outdir / "metrics.json", "w") as fh:
        json.dump({"initial": init_report.to_dict(), "final": final_report.to_dict()}, fh, indent=1)
        fh.write("\n")
    if cfg.density:
        write_density(problem.targets, final_hard, outdir / "density.csv")
    return outdir


def run_baseline_suite(cfg: ExperimentConfig, out=None) -> Path:
    """SA/GA/DE, several seeds each, one run directory per run plus a summary.

    Every run warm-starts from the config's initial point; per-run optimizer
    seeds derive from the master seed so the suite is reproducible as a unit.
    """
    outdir = Path(out if out is not None else (cfg.out or f"runs/{cfg.experiment}"))
    outdir.mkdir(parents=True, exist_ok=True)
    opt = cfg.optimizer
    methods = list(opt.get("methods", ["sa", "ga", "de"]))
    n_seeds = int(opt.get("n_seeds", 5))
    budget = int(opt.get("budget", 4050))

    summary = {"budget": budget, "n_seeds": n_seeds, "methods": {}}
    for mi, method in enumerate(methods):
        rows = []
        for k in range(n_seeds):
            sub = cfg.with_overrides(
                experiment=f"{cfg.experiment}-{method}-s{k}",
                optimizer={"method": method, "budget": budget,
                           "seed": stream_seed(cfg.seed, "opt", mi, k)},
                density=False,
                out=None,
            )
            rd = run_experiment(sub, outdir / f"{method}_seed{k}")
            with open(rd / "metrics.json") as fh:
                final = json.load(fh)["final"]
            cols = read_trace(rd)
            rows.append(
                {
                    "seed_index": k,
                    "dir": rd.name,
                    "loss": float(np.min(cols["loss"])),
                    "hard_coverage": final["hard_coverage"],
                    "hard_revisit_min": final["hard_revisit_min"],
                }
            )
        best = min(rows, key=lambda r: r["loss"])
        covs = [r["hard_coverage"] for r in rows]
        revs = [r["hard_revisit_min"] for r in rows]
        summary["methods"][method] = {
            "runs": rows,
            "best": dict(best),
            "coverage_range": [min(covs), max(covs)],
            "revisit_range": [min(revs), max(revs)],
        }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    return outdir
