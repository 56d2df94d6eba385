"""Command-line entry point: ``dhaiq {run,sweep,verify-claim,bound,export-topology}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis
from .experiment import (
    ScenarioConfig,
    apply_overrides,
    build_deployment,
    format_claim,
    parse_config,
    run_scenario,
    seed_streams,
    sweep,
    to_csv,
    verify_claim,
)
from .protocol import TraceLog, dhaiq_run
from .topology import ConfigError, export_adjacency, export_nodes


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value scenario file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--dist", choices=("uniform", "gaussian"))
    scenario.add_argument("--n", type=int)
    scenario.add_argument("--z0", type=int)
    scenario.add_argument("--runs", type=int, help="seeds per point")

    parser = argparse.ArgumentParser(prog="dhaiq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common, scenario], help="run one scenario over its seeds")
    p.add_argument("--shift", choices=("on", "off"))
    p.add_argument("--trace", type=Path, help="write the reception trace of seed 0 here")

    p = sub.add_parser("sweep", parents=[common], help="aggregate rows over n and z0 grids")
    p.add_argument("--dist", default=None, help="uniform, gaussian or both")
    p.add_argument("--shift", choices=("on", "off", "both"), default="both")
    p.add_argument("--z0-list", type=_int_list, default=[5, 15, 25, 35, 45])
    p.add_argument("--n-list", type=_int_list, default=[400])
    p.add_argument("--runs", type=int, help="seeds per point")
    p.add_argument("--plot", type=Path, help="also write innocent/catch curves as SVG")

    p = sub.add_parser("verify-claim", parents=[common], help="check the equal-division optimum")
    p.add_argument("--k-list", type=_int_list, default=list(range(1, 11)))
    p.add_argument("--resolution", type=float, default=0.01)

    p = sub.add_parser("bound", parents=[common, scenario], help="single-run innocent-ratio bound")

    p = sub.add_parser("export-topology", parents=[common, scenario], help="dump nodes and adjacency")
    p.add_argument("--adjacency", type=Path, help="adjacency dump path (default: <out>.adj)")
    return parser


def load_config(args) -> ScenarioConfig:
    config = ScenarioConfig()
    if args.config is not None:
        config = parse_config(args.config.read_text(), config)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    config = apply_overrides(config, overrides)
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    for attr, key in (("n", "n"), ("z0", "z0"), ("runs", "runs_per_point")):
        if getattr(args, attr, None) is not None:
            updates[key] = getattr(args, attr)
    if getattr(args, "dist", None) in ("uniform", "gaussian"):
        updates["dist"] = args.dist
    if getattr(args, "shift", None) in ("on", "off"):
        updates["shift"] = args.shift == "on"
    return replace(config, **updates)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _plot(rows: list[dict], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    keys = sorted({(r["n"], r["dist"], r["shift"]) for r in rows})
    for key in keys:
        sel = sorted((r for r in rows if (r["n"], r["dist"], r["shift"]) == key), key=lambda r: r["z0"])
        label = f"n={key[0]} {key[1]} shift={key[2]}"
        z = [r["z0"] for r in sel]
        axes[0].plot(z, [r["mean_innocent"] for r in sel], marker="o", label=label)
        axes[1].plot(z, [r["mean_catch"] for r in sel], marker="o", label=label)
    axes[0].set_ylabel("innocent ratio")
    axes[1].set_ylabel("catch ratio")
    for ax in axes:
        ax.set_xlabel("adversaries")
    axes[1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args).validate()
        if args.command == "run":
            result = run_scenario(config)
            if args.trace is not None:
                topo_rng, proto_rng = seed_streams(config, 0)
                trace = TraceLog()
                dhaiq_run(build_deployment(config, topo_rng), config.protocol_params(), proto_rng, trace=trace)
                with args.trace.open("w") as fh:
                    trace.write(fh)
            _emit(to_csv([result.aggregate()]), args.out)
        elif args.command == "sweep":
            shifts = {"on": (True,), "off": (False,), "both": (False, True)}[args.shift]
            dists = None
            if args.dist == "both":
                dists = ("uniform", "gaussian")
            elif args.dist is not None:
                dists = tuple(d.strip() for d in args.dist.split(","))
            if args.runs is not None:
                config = replace(config, runs_per_point=args.runs)
            rows = sweep(config, args.z0_list, args.n_list, shifts, dists)
            _emit(to_csv(rows), args.out)
            if args.plot is not None:
                _plot(rows, args.plot)
        elif args.command == "verify-claim":
            rows = verify_claim(args.k_list, args.resolution)
            _emit(format_claim(rows), args.out)
            return 0 if all(r.ok for r in rows) else 1
        elif args.command == "bound":
            value = analysis.innocent_bound(config.mu, config.z0, config.n)
            _emit(f"mu={config.mu:g} z0={config.z0} n={config.n} bound={value:.6g}\n", args.out)
        elif args.command == "export-topology":
            topo_rng, _ = seed_streams(config, 0)
            net = build_deployment(config, topo_rng)
            _emit(export_nodes(net.nodes), args.out)
            adj = args.adjacency or (Path(str(args.out) + ".adj") if args.out else None)
            _emit(export_adjacency(net.graph), adj)
    except ConfigError as exc:
        print(f"dhaiq: configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
