"""Command-line entry point: ``agora {run,rates,export-plots,validate}``.

Exit codes: 0 ok, 2 invalid configuration, 3 modelling assumption
violated, 4 missing input, 5 numeric failure. Errors are printed to
stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AgoraError, ConfigError, MissingInputError
from .io import config_hash, dump_json, read_metric, trace_dir, write_csv, write_trace
from .rates import empirical_decay_rate, rate_report
from .scenarios import PRESETS
from .simulation import VARIANTS, Scenario, describe, resolve_model, run_many, static_weights

log = logging.getLogger("agora")


def parse_seeds(spec: str) -> list[int]:
    """``"1..50"`` (inclusive range), ``"3,5,8"`` or a mix like ``"1..3,10"``."""
    seeds = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("seed list is empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be unique")
    return seeds


def load_scenario(ref: str, engine: str | None = None) -> Scenario:
    """Load a JSON scenario file, or a preset via ``preset:NAME``."""
    if ref.startswith("preset:"):
        name = ref.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}", presets=sorted(PRESETS))
        scenario = PRESETS[name]()
    else:
        scenario = Scenario.load(ref)
    if engine is not None:
        scenario = scenario.replace(engine=engine)
    return scenario


def _set_path(obj: dict, dotted: str, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        obj = obj[k]
    obj[keys[-1]] = value


def _finite_rates(scenario: Scenario):
    if scenario.engine != "finite" or scenario.model.get("kind") == "grid_regression":
        raise ConfigError("rate analysis needs a finite-label, finite-parameter scenario")
    w = static_weights(scenario)
    model = resolve_model(scenario, w.n_agents)
    return rate_report(model.agents, w, scenario.batch_size, labels=model.labels)


def _run_chunk(args):
    scenario_dict, seeds, variants = args
    scenario = Scenario.from_dict(scenario_dict)
    return run_many(scenario, seeds, variants=variants, keep_snapshots=False)


def _final_metrics(trace) -> dict:
    return {name: values[-1].tolist() for name, values in sorted(trace.metrics.items())}


def _aggregate(per_seed: dict, variants) -> dict:
    agg = {}
    for v in variants:
        names = sorted(next(iter(per_seed.values()))[v].keys())
        agg[v] = {}
        for name in names:
            arr = np.array([per_seed[s][v][name] for s in per_seed])  # (seeds, agents)
            agg[v][name] = {"mean": float(arr.mean()), "std": float(arr.std()),
                            "per_agent_mean": arr.mean(axis=0).tolist()}
    return agg


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario, args.engine)
    if args.rounds is not None:
        scenario = scenario.replace(rounds=args.rounds)
    seeds = parse_seeds(args.seeds) if args.seeds else [scenario.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    describe(scenario)  # validate before doing any work
    variants = VARIANTS if args.baselines else ("cooperative",)
    jobs = max(1, args.jobs)
    chunks = [seeds[i::jobs] for i in range(jobs) if seeds[i::jobs]]
    if args.snapshots or len(chunks) == 1:
        results = [run_many(scenario, seeds, variants=variants, keep_snapshots=args.snapshots)]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(_run_chunk, [(scenario.to_dict(), c, variants) for c in chunks]))
    traces = {v: {} for v in variants}
    for res in results:
        for v in variants:
            for tr in res[v]:
                traces[v][tr.seed] = tr
    per_seed = {}
    for seed in seeds:
        per_seed[str(seed)] = {}
        for v in variants:
            tr = traces[v][seed]
            write_trace(out, tr, snapshots=args.snapshots)
            per_seed[str(seed)][v] = _final_metrics(tr)
    summary = {
        "scenario": scenario.name,
        "engine": scenario.engine,
        "rounds": scenario.rounds,
        "seeds": seeds,
        "variants": list(variants),
        "per_seed": per_seed,
        "aggregate": _aggregate(per_seed, variants),
    }
    try:
        summary["rates"] = _finite_rates(scenario).to_dict()
    except (ConfigError, AgoraError):
        pass
    dump_json(out / "summary.json", summary)
    scenario.save(out / "scenario.json")
    dump_json(out / "provenance.json", {
        "config_sha256": config_hash(scenario.to_dict()),
        "seeds": seeds,
        "variants": list(variants),
        "artifact_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": datetime.now(timezone.utc).isoformat(),
    })
    print(json.dumps({"out": str(out), "seeds": len(seeds), "variants": list(variants)}))
    return 0


def cmd_rates(args) -> int:
    base = load_scenario(args.scenario)
    rows = []
    if args.sweep:
        key, values = args.sweep.split("=", 1)
        for raw in values.split(","):
            value = json.loads(raw)
            obj = copy.deepcopy(base.to_dict())
            _set_path(obj, key, value)
            rows.append((value, _finite_rates(Scenario.from_dict(obj))))
    else:
        rows.append((None, _finite_rates(base)))
    reports = []
    for value, rep in rows:
        d = rep.to_dict()
        if value is not None:
            d["sweep"] = {args.sweep.split("=", 1)[0]: value}
        reports.append(d)
    if args.json:
        print(json.dumps(reports if args.sweep else reports[0], indent=2))
    else:
        header = f"{'sweep':>8} {'K(Theta)':>12} {'argmin':>16} {'lambda_max':>11} {'gap':>8} {'mixing':>9}"
        print(header)
        for value, rep in rows:
            lab = rep.labels or range(rep.divergences.shape[-1])
            pair = "-" if rep.argmin is None else f"{lab[rep.argmin[0]]}->{lab[rep.argmin[1]]}"
            k = "inf" if math.isinf(rep.k_theta) else f"{rep.k_theta:.6g}"
            print(f"{'' if value is None else value!s:>8} {k:>12} {pair:>16} {rep.lambda_max:>11.5f} "
                  f"{rep.spectral_gap:>8.5f} {rep.mixing_bound:>9.4f}")
            print(f"{'':>8} centrality: {np.array2string(rep.centrality, precision=4)}")
            for row in rep.sample_complexity:
                print(f"{'':>8} delta={row['delta']:<5} eps={row['epsilon']:<10.4g} n>={row['rounds']}"
                      + (" (vacuous)" if row["vacuous"] else ""))
    if args.out:
        dump_json(args.out, reports if args.sweep else reports[0])
    return 0


PLOT_FILES = {
    "mse_vs_round.csv": "mse",
    "belief_theta_star_vs_round.csv": "belief_theta_star",
}
DECAY_METRIC = "max_wrong_log_belief"


def cmd_export_plots(args) -> int:
    root = Path(args.traces)
    summary_path = root / "summary.json"
    if not summary_path.exists():
        raise MissingInputError(f"no run found at {root} (summary.json missing)", path=str(root))
    summary = json.loads(summary_path.read_text())
    seeds, variants = summary["seeds"], summary["variants"]
    selected = None if args.metrics is None else {m for m in args.metrics.split(",") if m}
    out = Path(args.out) if args.out else root / "plots"
    out.mkdir(parents=True, exist_ok=True)
    columns = [v.replace("-", "_") for v in variants]
    for fname, metric in PLOT_FILES.items():
        available = (trace_dir(root, seeds[0], variants[0]) / f"{metric}.csv").exists()
        if (selected is not None and metric not in selected) or not available:
            write_csv(out / fname, ["round", *columns], [])
            continue
        curves = []
        for v in variants:
            stack = np.stack([read_metric(root, s, v, metric) for s in seeds])
            curves.append(stack.mean(axis=(0, 2)))
        write_csv(out / fname, ["round", *columns],
                  ([r, *(c[r] for c in curves)] for r in range(curves[0].size)))
    header = ["seed", "variant", "agent", "slope", "stderr", "truncated", "rounds_used"]
    rows = []
    if selected is None or DECAY_METRIC in selected:
        for s in seeds:
            for v in variants:
                path = trace_dir(root, s, v) / f"{DECAY_METRIC}.csv"
                if not path.exists():
                    continue
                lb = read_metric(root, s, v, DECAY_METRIC)
                burn = min(args.burn_in, max(lb.shape[0] - 12, 0))
                for a in range(lb.shape[1]):
                    fit = empirical_decay_rate(lb[:, a], burn)
                    rows.append([s, v, a, fit.slope, fit.stderr, int(fit.truncated), fit.rounds_used])
    write_csv(out / "decay_fit.csv", header, rows)
    print(json.dumps({"out": str(out)}))
    return 0


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario, args.engine)
    info = describe(scenario)
    print(json.dumps(info, indent=2))
    if info.get("globally_learnable") is False:
        from .errors import AssumptionError
        raise AssumptionError("not globally learnable: local optimal sets have empty intersection")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agora", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario for one or more seeds")
    r.add_argument("--scenario", required=True, help="scenario JSON file or preset:NAME")
    r.add_argument("--seeds", help="e.g. 1..50 or 1,2,3 (default: the scenario's seed)")
    r.add_argument("--out", required=True)
    r.add_argument("--engine", choices=["finite", "gaussian"])
    r.add_argument("--rounds", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--no-baselines", dest="baselines", action="store_false",
                   help="skip the central-agent and no-cooperation reference runs")
    r.add_argument("--snapshots", action="store_true", help="also write per-round JSON belief snapshots")
    r.set_defaults(func=cmd_run)

    k = sub.add_parser("rates", help="print the analytic rate quantities")
    k.add_argument("--scenario", required=True)
    k.add_argument("--sweep", help="KEY=v1,v2,... over a dotted scenario path, e.g. topology.a=0.1,0.5")
    k.add_argument("--json", action="store_true")
    k.add_argument("--out")
    k.set_defaults(func=cmd_rates)

    e = sub.add_parser("export-plots", help="tidy CSVs for external plotting")
    e.add_argument("--traces", required=True, help="output directory of a previous run")
    e.add_argument("--out")
    e.add_argument("--metrics", help="comma-separated metric selection (empty string selects nothing)")
    e.add_argument("--burn-in", type=int, default=200)
    e.set_defaults(func=cmd_export_plots)

    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("--scenario", required=True)
    v.add_argument("--engine", choices=["finite", "gaussian"])
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("AGORA_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AgoraError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
