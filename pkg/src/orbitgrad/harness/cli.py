"""Command-line front end: runs, evaluation, and analysis artifacts."""

import argparse
import json
import sys
from pathlib import Path

from orbitgrad.harness import analysis, config as hconfig, runs
from orbitgrad.harness.config import PRESET_NAMES, load_config, preset, resolve_threads
from orbitgrad.harness.walker import walker_generate


def _common(p: argparse.ArgumentParser, with_preset: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help="output directory or file")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: ORBITGRAD_THREADS or 1)")
    if with_preset:
        p.add_argument("--preset", choices=PRESET_NAMES, default=None,
                       help="named experiment instead of a config file")


def _load_cfg(args) -> hconfig.ExperimentConfig:
    if args.preset is not None and args.config is not None:
        raise ValueError("give a config file or --preset, not both")
    if args.preset is not None:
        cfg = preset(args.preset, seed=args.seed if args.seed is not None else 0,
                     ci=getattr(args, "ci", False))
    elif args.config is not None:
        if getattr(args, "ci", False):
            raise ValueError("--ci applies to presets only")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
    else:
        raise ValueError("need a config file or --preset")
    cfg = cfg.with_overrides(threads=resolve_threads(args.threads))
    if args.out is not None:
        cfg = cfg.with_overrides(out=args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    if args.iters is not None:
        if cfg.optimizer.get("method", "gradient") != "gradient":
            raise ValueError("--iters applies to gradient configs only")
        cfg = cfg.with_overrides(optimizer={**cfg.optimizer, "iters": args.iters})
    if args.density:
        cfg = cfg.with_overrides(density=True)
    if cfg.optimizer.get("method") == "suite":
        out = runs.run_baseline_suite(cfg, args.out)
    else:
        out = runs.run_experiment(cfg, args.out)
    print(out)
    return 0


def _cmd_baselines(args) -> int:
    cfg = _load_cfg(args)
    opt = dict(cfg.optimizer)
    if opt.get("method") != "suite":
        opt = {"method": "suite", "budget": opt.get("budget", 4050),
               "n_seeds": 5, "methods": ["sa", "ga", "de"]}
    if args.budget is not None:
        opt["budget"] = args.budget
    if args.n_seeds is not None:
        opt["n_seeds"] = args.n_seeds
    if args.methods is not None:
        opt["methods"] = args.methods.split(",")
    cfg = cfg.with_overrides(optimizer=opt, density=False)
    out = runs.run_baseline_suite(cfg, args.out)
    print(out)
    return 0


def _cmd_eval(args) -> int:
    if (args.walker is None) == (args.run is None):
        raise ValueError("give exactly one of --walker T/P/F or --run <dir>")
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or "exp2", seed=args.seed or 0)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    targets = runs.resolve_targets(cfg.targets)
    window = runs.resolve_window(cfg.window, cfg.seed)
    relax = runs.resolve_relax(cfg.relax)
    if args.walker is not None:
        total, planes, phasing = (int(v) for v in args.walker.split("/"))
        els = walker_generate(total, planes, phasing,
                              inc_deg=args.inc_deg, alt_km=args.alt_km)
    else:
        els = runs.elements_from_json(Path(args.run) / "elements.json")
    report = runs.eval_constellation(els, targets, window, relax)
    text = json.dumps(report.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_walker(args) -> int:
    els = walker_generate(args.total, args.planes, args.phasing,
                          inc_deg=args.inc_deg, alt_km=args.alt_km,
                          raan0_deg=args.raan0_deg)
    out = Path(args.out or "walker_elements.json")
    runs.write_element_sets(els, out)
    print(out)
    return 0


def _cmd_landscape(args) -> int:
    cfg = _load_cfg(args)
    spec, theta0, problem = runs.build_problem(cfg)
    grid = analysis.landscape_grid(spec, problem, theta0, args.x_slot, args.y_slot,
                                   resolution=args.resolution)
    outdir = Path(args.out or (cfg.out or f"runs/{cfg.experiment}-landscape"))
    outdir.mkdir(parents=True, exist_ok=True)
    analysis.write_landscape(grid, outdir / "landscape.csv")
    if args.traj is not None:
        iters, thetas = runs.read_thetas(args.traj)
        xi = analysis.slot_index(spec, args.x_slot)
        yi = analysis.slot_index(spec, args.y_slot)
        analysis.write_landscape_traj(iters, thetas, xi, yi,
                                      outdir / "landscape_traj.csv")
    print(outdir)
    return 0


def _cmd_pca(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / "config.yaml")
    spec, _, problem = runs.build_problem(cfg)
    iters, thetas = runs.read_thetas(run_dir)
    sl = analysis.pca_slice(iters, thetas, spec, problem,
                            resolution=args.resolution)
    outdir = Path(args.out or run_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    analysis.write_pca(sl, outdir)
    print(outdir)
    return 0


def _cmd_gridsearch(args) -> int:
    cfg = _load_cfg(args)
    if len(args.run) != len(analysis.TIER_NAMES):
        raise ValueError(
            f"--run must appear {len(analysis.TIER_NAMES)} times, in this order: "
            + ", ".join(analysis.TIER_NAMES)
        )
    spec, _, problem = runs.build_problem(cfg)
    thetas = []
    for rd in args.run:
        with open(Path(rd) / "elements.json") as fh:
            doc = json.load(fh)
        if "theta" not in doc:
            raise ValueError(f"{rd} has no decision vector in elements.json")
        thetas.append(doc["theta"])
    rows = analysis.hyperparam_grid(thetas, spec, problem.targets, problem.window,
                                    alpha_min_deg=problem.relax.alpha_min_deg)
    best = analysis.select_hyperparams(rows)
    outdir = Path(args.out or (cfg.out or f"runs/{cfg.experiment}-grid"))
    outdir.mkdir(parents=True, exist_ok=True)
    analysis.write_hyperparam_rows(rows, outdir / "hyperparam_grid.csv")
    selection = {
        "n_rows": len(rows),
        "n_valid": sum(1 for r in rows if r["valid"]),
        "selected": best,
    }
    with open(outdir / "selection.json", "w") as fh:
        json.dump(selection, fh, indent=1)
        fh.write("\n")
    print(outdir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitgrad",
                                 description="constellation design runs and analysis")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one configured optimization run")
    p.add_argument("config", nargs="?", default=None, help="config file path")
    _common(p, with_preset=True)
    p.add_argument("--iters", type=int, default=None, help="gradient iteration override")
    p.add_argument("--ci", action="store_true", help="reduced preset for quick checks")
    p.add_argument("--density", action="store_true", help="also write density.csv")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("baselines", help="SA/GA/DE suite, several seeds each")
    p.add_argument("config", nargs="?", default=None)
    _common(p, with_preset=True)
    p.add_argument("--ci", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--n-seeds", type=int, default=None)
    p.add_argument("--methods", default=None, help="comma list, e.g. sa,ga")
    p.set_defaults(func=_cmd_baselines)

    p = sub.add_parser("eval", help="hard+soft metrics of a fixed constellation")
    _common(p)
    p.add_argument("--preset", choices=PRESET_NAMES, default=None,
                   help="testbed preset (default exp2)")
    p.add_argument("--config", default=None, help="testbed config file")
    p.add_argument("--walker", default=None, metavar="T/P/F",
                   help="evaluate a generated pattern, e.g. 24/6/1")
    p.add_argument("--run", default=None, help="run directory with elements.json")
    p.add_argument("--alt-km", type=float, default=550.0)
    p.add_argument("--inc-deg", type=float, default=60.0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("walker", help="write a symmetric pattern as elements JSON")
    p.add_argument("total", type=int)
    p.add_argument("planes", type=int)
    p.add_argument("phasing", type=int)
    _common(p)
    p.add_argument("--alt-km", type=float, default=550.0)
    p.add_argument("--inc-deg", type=float, default=60.0)
    p.add_argument("--raan0-deg", type=float, default=0.0)
    p.set_defaults(func=_cmd_walker)

    p = sub.add_parser("landscape", help="2-D loss slice over two angle slots")
    p.add_argument("config", nargs="?", default=None)
    _common(p, with_preset=True)
    p.add_argument("--ci", action="store_true", help="reduced preset for quick checks")
    p.add_argument("--x-slot", default="ma_sat0")
    p.add_argument("--y-slot", default="ma_sat1")
    p.add_argument("--resolution", type=int, default=65)
    p.add_argument("--traj", default=None, help="run directory for an overlay path")
    p.set_defaults(func=_cmd_landscape)

    p = sub.add_parser("pca", help="loss on the top-2 iterate directions of a run")
    p.add_argument("run_dir")
    _common(p)
    p.add_argument("--resolution", type=int, default=21)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("gridsearch", help="relaxation-parameter sweep over 4 solutions")
    p.add_argument("config", nargs="?", default=None)
    _common(p, with_preset=True)
    p.add_argument("--ci", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--run", action="append", default=[],
                   help="solution run directory; repeat 4x in tier order")
    p.set_defaults(func=_cmd_gridsearch)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
