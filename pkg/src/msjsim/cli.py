"""Command-line front end.

Subcommands: simulate, sweep-load, scale, analyze-trace, erlang, partition,
bounds, plot.  Sweep commands write the results CSV and, by default, render a
companion PNG next to it.  The seed root defaults to the MSJ_SEED environment
variable when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, engine
from .analytics import critical_bound, erlang_b, helper_routing_bound, mgss_mean_response, stability_lhs
from .experiments import ExperimentPlan, class_count, run_plan
from .partition import compute_partition
from .policies import make_policy, parse_policy, policy_names
from .report import read_rows, rows_to_text, write_rows
from .trace import build_class_model, filter_power_of_two, model_table, model_to_json, parse_swf
from .workload import (
    fig1_unit_classes,
    figure1_workload,
    load_config,
    SystemConfig,
    config_from_json,
)

DEFAULT_SEED = 12345


def _seed_default() -> int:
    env = os.environ.get("MSJ_SEED")
    return int(env) if env else DEFAULT_SEED


def _parse_grid(text: str, cast):
    return tuple(cast(v) for v in text.split(",") if v.strip())


def _policies(text: str):
    return tuple(parse_policy(p) for p in text.split(",") if p.strip())


def _load_classes(path: str | None):
    if path is None:
        return None
    with open(path) as fh:
        doc = json.load(fh)
    # accept either a full config document or a bare class list
    if "classes" in doc:
        doc = {"k": 10**9, "lambda": 1e-9, "classes": doc["classes"]}
        return config_from_json(doc).classes
    raise SystemExit(f"{path}: expected a JSON object with a 'classes' list")


def _manifest(args: argparse.Namespace, extra: str = "") -> str:
    skip = {"func"}
    bits = [f"msjsim={__version__}", f"command={args.command}"]
    for key, val in sorted(vars(args).items()):
        if key in skip or key == "command" or val is None:
            continue
        bits.append(f"{key}={val}")
    if extra:
        bits.append(extra)
    return " ".join(bits)


def _emit(args, rows, manifest):
    n_cls = class_count(rows)
    if args.output:
        with open(args.output, "w") as fh:
            write_rows(fh, rows, n_cls, manifest)
        print(f"wrote {len(rows)} rows to {args.output}")
        if not args.no_plot:
            from .plotting import render_rows

            fig_path = os.path.splitext(args.output)[0] + ".png"
            render_rows(rows, fig_path)
            print(f"wrote figure to {fig_path}")
    else:
        sys.stdout.write(rows_to_text(rows, n_cls, manifest))


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.allow_unstable and config.require_stable:
        config = SystemConfig(config.k, config.lam, config.classes, require_stable=False)
    spec = parse_policy(args.policy)
    policy = make_policy(spec, config)
    try:
        out = engine.run(
            config, policy, args.arrivals, args.seed, args.warmup,
            in_system_cap=args.cap,
        )
    except engine.ApparentInstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    row = {
        "policy": spec.label,
        "k": config.k,
        "f_k": None,
        "rho": config.load,
        "theta": None,
        "seed": args.seed,
        "arrivals": args.arrivals,
        "warmup": args.warmup,
        "mean_response": out.mean_response,
        "ci95": out.response_ci95,
        "p_helper": out.p_helper,
        "helper_util": out.helper_utilization,
        "completed": out.completed,
        "preemptions": out.preemptions,
        "avg_in_system": out.avg_in_system,
    }
    for i, cs in enumerate(out.per_class):
        row[f"resp_c{i}"] = cs.mean_response
        row[f"ph_c{i}"] = cs.p_helper
    sys.stdout.write(rows_to_text([row], len(out.per_class), _manifest(args)))
    return 0


def cmd_sweep_load(args) -> int:
    plan = ExperimentPlan(
        kind="sweep_load",
        policies=_policies(args.policies),
        arrivals=args.arrivals,
        replications=args.replications,
        seed_root=args.seed,
        rho_grid=_parse_grid(args.rho_grid, float),
        k=args.k,
        classes=_load_classes(args.classes),
        warmup=args.warmup,
        workers=args.workers,
        allow_unstable=args.allow_unstable,
    )
    _emit(args, run_plan(plan), _manifest(args))
    return 0


def cmd_scale(args) -> int:
    kind = "scale_critical" if args.regime == "critical" else "scale_subcritical"
    plan = ExperimentPlan(
        kind=kind,
        policies=_policies(args.policies),
        arrivals=args.arrivals,
        replications=args.replications,
        seed_root=args.seed,
        k_grid=_parse_grid(args.k_grid, int),
        theta=args.theta if kind == "scale_critical" else None,
        rho=args.rho if kind == "scale_subcritical" else None,
        classes=_load_classes(args.classes),
        fk_rule=args.fk_rule,
        warmup=args.warmup,
        workers=args.workers,
    )
    _emit(args, run_plan(plan), _manifest(args))
    return 0


def cmd_analyze_trace(args) -> int:
    jobs = parse_swf(args.swf)
    kept = filter_power_of_two(jobs, args.max_need)
    if not kept:
        print("error: no power-of-two jobs survive the filter", file=sys.stderr)
        return 2
    model = build_class_model(kept)
    print(f"{len(jobs)} records, {len(kept)} after the power-of-two filter "
          f"({len(kept) / len(jobs):.1%})")
    print(model_table(model))
    if args.model_json:
        with open(args.model_json, "w") as fh:
            json.dump(model_to_json(model), fh, indent=2)
            fh.write("\n")
        print(f"wrote class model to {args.model_json}")
    if args.replay:
        return _replay_trace(args, kept, model)
    if not args.rho_grid:
        return 0
    plan = ExperimentPlan(
        kind="trace_sweep",
        policies=_policies(args.policies),
        arrivals=args.arrivals,
        replications=args.replications,
        seed_root=args.seed,
        rho_grid=_parse_grid(args.rho_grid, float),
        k=args.k,
        model=model,
        warmup=args.warmup,
        workers=args.workers,
    )
    _emit(args, run_plan(plan), _manifest(args))
    return 0


def _replay_trace(args, kept, model) -> int:
    from .trace import replay_stream

    config, stream = replay_stream(kept, model, args.k)
    rows = []
    for spec in _policies(args.policies):
        policy = make_policy(spec, config)
        out = engine.run(config, policy, len(stream), seed=0,
                         warmup_fraction=args.warmup, precomputed_jobs=stream)
        row = {
            "policy": spec.label,
            "k": args.k,
            "rho": config.load,
            "seed": 0,
            "arrivals": out.arrivals,
            "warmup": args.warmup,
            "mean_response": out.mean_response,
            "ci95": out.response_ci95,
            "p_helper": out.p_helper,
            "helper_util": out.helper_utilization,
            "completed": out.completed,
            "preemptions": out.preemptions,
            "avg_in_system": out.avg_in_system,
        }
        for i, cs in enumerate(out.per_class):
            row[f"resp_c{i}"] = cs.mean_response
            row[f"ph_c{i}"] = cs.p_helper
        rows.append(row)
    _emit(args, rows, _manifest(args, "mode=replay"))
    return 0


def cmd_erlang(args) -> int:
    blocking = erlang_b(args.servers, args.load)
    fields = [str(args.servers), repr(args.load), repr(blocking)]
    if args.mean_service is not None:
        fields.append(repr(mgss_mean_response(args.mean_service, args.servers, args.load)))
    print("\t".join(fields))
    return 0


def cmd_partition(args) -> int:
    config = _config_for_analytics(args)
    part = compute_partition(config, allow_all_helper=args.allow_all_helper)
    print("class\tneed\tslots\tservers")
    for i, cls in enumerate(config.classes):
        print(f"{i}\t{cls.need}\t{part.slots[i]}\t{part.servers[i]}")
    print(f"helper\t{part.helper}")
    print(f"psi\t{part.psi!r}")
    return 0


def cmd_bounds(args) -> int:
    if args.theta is None and not args.config and not args.fig1_k:
        print("error: pass --theta and/or a config (--config FILE | --fig1-k K)",
              file=sys.stderr)
        return 2
    if args.theta is not None:
        classes = _load_classes(args.classes) or fig1_unit_classes()
        print(f"critical_bound\t{critical_bound(args.theta, classes)!r}")
    if args.config or (args.fig1_k and args.theta is not None):
        config = _config_for_analytics(args)
        part = compute_partition(config)
        print(f"stability_lhs\t{stability_lhs(config, part)!r}")
        print(f"p_helper_exact\t{helper_routing_bound(config, part)!r}")
    return 0


def _config_for_analytics(args) -> SystemConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    if getattr(args, "fig1_k", None):
        theta = getattr(args, "theta", None) or 0.7
        return figure1_workload(args.fig1_k, theta)
    raise SystemExit("pass --config FILE or --fig1-k K")


def cmd_plot(args) -> int:
    rows = read_rows(args.csv)
    if not rows:
        print("error: no data rows", file=sys.stderr)
        return 2
    out = args.output or os.path.splitext(args.csv)[0] + ".png"
    from .plotting import render_rows

    render_rows(rows, out)
    print(f"wrote figure to {out}")
    return 0


def _add_run_opts(p, sweep: bool) -> None:
    p.add_argument("--arrivals", type=int, default=100_000,
                   help="arrivals per run (default 100000)")
    p.add_argument("--warmup", type=float, default=0.1,
                   help="fraction of arrivals discarded as warmup")
    p.add_argument("--seed", type=int, default=_seed_default(),
                   help="seed root (env MSJ_SEED overrides the default)")
    if sweep:
        p.add_argument("--replications", type=int, default=5)
        p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
        p.add_argument("--output", "-o", help="results CSV path (stdout if omitted)")
        p.add_argument("--no-plot", action="store_true",
                       help="skip the companion PNG next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msjsim",
        description="Multiserver-job scheduling simulator and loss-system calculators",
    )
    parser.add_argument("--version", action="version", version=f"msjsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one run of one policy on a JSON config")
    p.add_argument("--config", required=True, help="workload JSON file")
    p.add_argument("--policy", required=True,
                   help=f"one of {', '.join(policy_names())}; split policies take :aux")
    p.add_argument("--allow-unstable", action="store_true")
    p.add_argument("--cap", type=int, default=1_000_000,
                   help="abort when this many jobs sit in the system")
    _add_run_opts(p, sweep=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-load", help="fixed k, sweep the offered load")
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--rho-grid", required=True, help="comma list, e.g. 0.5,0.7,0.9")
    p.add_argument("--policies", default="fcfs,bs:fcfs")
    p.add_argument("--classes", help="JSON file with a unit-scale class list")
    p.add_argument("--allow-unstable", action="store_true")
    _add_run_opts(p, sweep=True)
    p.set_defaults(func=cmd_sweep_load)

    p = sub.add_parser("scale", help="grow k under the subcritical or critical scaling")
    p.add_argument("--regime", choices=("subcritical", "critical"), required=True)
    p.add_argument("--k-grid", required=True, help="comma list, e.g. 32,128,512")
    p.add_argument("--theta", type=float, default=0.7,
                   help="critical regime slack parameter")
    p.add_argument("--rho", type=float, default=0.7,
                   help="subcritical regime fixed load")
    p.add_argument("--policies", default="fcfs,bs:fcfs")
    p.add_argument("--classes", help="JSON file with a unit-scale class list")
    p.add_argument("--fk-rule", choices=("fig1", "cuberoot"), default="fig1",
                   help="need-growth rate: floor((k/32)^(2/3)) or floor(k^(1/3))")
    _add_run_opts(p, sweep=True)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("analyze-trace", help="SWF class model, then a load sweep")
    p.add_argument("swf", help="SWF trace file")
    p.add_argument("--max-need", type=int, default=64)
    p.add_argument("--k", type=int, default=512)
    p.add_argument("--rho-grid", default="", help="empty: print the model only")
    p.add_argument("--policies", default="fcfs,bs:fcfs")
    p.add_argument("--model-json", help="also dump the class model as JSON")
    p.add_argument("--replay", action="store_true",
                   help="keep the trace's real submit times instead of sweeping loads")
    _add_run_opts(p, sweep=True)
    p.set_defaults(func=cmd_analyze_trace)

    p = sub.add_parser("erlang", help="blocking probability of an M/GI/s/s queue")
    p.add_argument("servers", type=int)
    p.add_argument("load", type=float, help="offered load, arrival rate x mean service")
    p.add_argument("--mean-service", type=float,
                   help="also print the mean response time for this service mean")
    p.set_defaults(func=cmd_erlang)

    p = sub.add_parser("partition", help="balanced sub-partition of a config")
    p.add_argument("--config", help="workload JSON file")
    p.add_argument("--fig1-k", type=int, help="use the benchmark workload at this k")
    p.add_argument("--theta", type=float, default=0.7)
    p.add_argument("--allow-all-helper", action="store_true")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("bounds", help="limit bound and split-system closed forms")
    p.add_argument("--theta", type=float)
    p.add_argument("--config", help="workload JSON file")
    p.add_argument("--fig1-k", type=int)
    p.add_argument("--classes", help="JSON class list for the limit bound")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plot", help="render a results CSV to a PNG")
    p.add_argument("csv")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
