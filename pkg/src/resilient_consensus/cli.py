"""Experiment runner: graph tooling, scenario execution, trace emission.

Subcommands:
  check-graph  certify robustness and degree bounds of a graph file
  run          execute one experiment file, write trace/metrics CSVs
  sweep        run seeded replicates of an experiment, aggregate summaries
  gen-graph    write complete/cycle/growth-rule graphs to a file

Exit codes: 0 success, 1 a requested check failed, 2 parse/config error,
3 enumeration cap exceeded, 4 degree assumption violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import adversary, graph, sim, wmsr
from .kernel import NeighborhoodTooSmallError
from .sim import ConfigError, SimConfig, Trace

OUTPUT_DIR_ENV = "RESILIENT_CONSENSUS_OUTDIR"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_CAP = 3
EXIT_DEGREE = 4


@dataclass(frozen=True)
class Experiment:
    """A parsed experiment file: the simulation config plus run plumbing."""

    config: SimConfig
    algorithm: str | tuple[str, tuple[tuple[int, ...], ...]]
    output_dir: str
    graph_spec: dict


@dataclass(frozen=True)
class SummaryReport:
    converged: bool
    rounds_used: int
    final_max_spread: float
    validity_always: bool
    rate_bound_ok: bool
    wall_clock_s: float


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _graph_from_spec(spec: dict, base_dir: Path) -> graph.Graph:
    if not isinstance(spec, dict):
        raise ConfigError("graph must be an object")
    if "path" in spec:
        _reject_unknown(spec, {"path"}, "graph")
        return graph.read_graph(base_dir / spec["path"])
    kind = spec.get("generator")
    if kind == "complete":
        _reject_unknown(spec, {"generator", "n"}, "graph")
        return graph.complete_graph(int(spec["n"]))
    if kind == "cycle":
        _reject_unknown(spec, {"generator", "n"}, "graph")
        return graph.cycle_graph(int(spec["n"]))
    if kind == "growth":
        _reject_unknown(spec, {"generator", "base", "r", "s", "degree", "n", "seed"}, "graph")
        base = graph.complete_graph(int(spec["base"]))
        return graph.grow_to(
            base,
            int(spec["r"]),
            int(spec["s"]),
            int(spec["degree"]),
            int(spec["n"]),
            int(spec["seed"]),
        )
    raise ConfigError(f"graph: unknown source {spec!r}")


def _strategy_from_dict(spec: dict, node: int) -> adversary.AdversaryStrategy:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"strategy for node {node} must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "scripted":
        _reject_unknown(spec, {"kind"}, f"strategy[{node}]")
        return adversary.Scripted()
    if kind == "stubborn":
        _reject_unknown(spec, {"kind", "value"}, f"strategy[{node}]")
        return adversary.Stubborn(tuple(float(v) for v in spec["value"]))
    if kind == "random_bounded":
        _reject_unknown(spec, {"kind", "box", "seed"}, f"strategy[{node}]")
        box = tuple((float(lo), float(hi)) for lo, hi in spec["box"])
        return adversary.RandomBounded(box, int(spec["seed"]))
    if kind == "hull_escape":
        _reject_unknown(spec, {"kind", "target", "gain"}, f"strategy[{node}]")
        return adversary.HullEscape(
            tuple(float(v) for v in spec["target"]), float(spec["gain"])
        )
    raise ConfigError(f"strategy for node {node}: unknown kind {kind!r}")


def _strategy_to_dict(strategy: adversary.AdversaryStrategy) -> dict:
    if isinstance(strategy, adversary.Scripted):
        return {"kind": "scripted"}
    if isinstance(strategy, adversary.Stubborn):
        return {"kind": "stubborn", "value": list(strategy.value)}
    if isinstance(strategy, adversary.RandomBounded):
        return {
            "kind": "random_bounded",
            "box": [list(pair) for pair in strategy.box],
            "seed": strategy.seed,
        }
    if isinstance(strategy, adversary.HullEscape):
        return {"kind": "hull_escape", "target": list(strategy.target), "gain": strategy.gain}
    raise TypeError(f"unknown strategy {strategy!r}")


_TOP_KEYS = {
    "graph", "d", "F", "attack_model", "faults", "strategies", "init",
    "algorithm", "rounds", "tol", "seed", "output_dir",
}


def parse_experiment(doc: dict, base_dir: Path = Path(".")) -> Experiment:
    """Turn a JSON document into an Experiment; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("experiment file must hold a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "experiment")
    missing = sorted(
        k for k in ("graph", "d", "F", "attack_model", "faults", "strategies", "init")
        if k not in doc
    )
    if missing:
        raise ConfigError(f"experiment: missing keys {missing}")

    g = _graph_from_spec(doc["graph"], base_dir)
    d = int(doc["d"])
    fault_bound = int(doc["F"])
    model_kind = doc["attack_model"]
    if model_kind not in (adversary.F_TOTAL, adversary.F_LOCAL):
        raise ConfigError(f"attack_model must be 'f_total' or 'f_local', got {model_kind!r}")
    faults = frozenset(int(i) for i in doc["faults"])

    strategies = {}
    for key, spec in doc["strategies"].items():
        strategies[int(key)] = _strategy_from_dict(spec, int(key))

    init = doc["init"]
    if not isinstance(init, dict):
        raise ConfigError("init must be an object")
    _reject_unknown(init, {"box", "states"}, "init")
    init_states = init_box = None
    if ("box" in init) == ("states" in init):
        raise ConfigError("init: give exactly one of 'box' and 'states'")
    if "box" in init:
        init_box = tuple((float(lo), float(hi)) for lo, hi in init["box"])
    else:
        init_states = {
            int(i): tuple(float(v) for v in x) for i, x in init["states"].items()
        }

    algorithm = doc.get("algorithm", "middle-points")
    grouping = None
    if isinstance(algorithm, dict):
        _reject_unknown(algorithm, {"grouped"}, "algorithm")
        grouping = tuple(tuple(int(q) for q in block) for block in algorithm["grouped"])
        algorithm = ("grouped", grouping)
    elif algorithm not in ("middle-points", "wmsr"):
        raise ConfigError(f"algorithm must be 'middle-points', 'wmsr' or grouped, got {algorithm!r}")

    cfg = SimConfig(
        graph=g,
        d=d,
        F=fault_bound,
        attack=adversary.AttackModel(model_kind, fault_bound),
        faults=faults,
        strategies=strategies,
        init_states=init_states,
        init_box=init_box,
        max_rounds=int(doc.get("rounds", 1000)),
        convergence_tol=float(doc.get("tol", 1e-6)),
        seed=int(doc.get("seed", 0)),
        grouping=grouping,
    )
    sim.validate_config(cfg)
    return Experiment(
        config=cfg,
        algorithm=algorithm,
        output_dir=doc.get("output_dir", "out"),
        graph_spec=doc["graph"],
    )


def emit_experiment(exp: Experiment) -> dict:
    """Inverse of ``parse_experiment`` (the graph keeps its source spec)."""
    cfg = exp.config
    if cfg.init_states is not None:
        init = {"states": {str(i): list(x) for i, x in sorted(cfg.init_states.items())}}
    else:
        init = {"box": [list(pair) for pair in cfg.init_box]}
    if isinstance(exp.algorithm, tuple):
        algorithm: dict | str = {"grouped": [list(b) for b in exp.algorithm[1]]}
    else:
        algorithm = exp.algorithm
    return {
        "graph": exp.graph_spec,
        "d": cfg.d,
        "F": cfg.F,
        "attack_model": cfg.attack.kind,
        "faults": sorted(cfg.faults),
        "strategies": {str(i): _strategy_to_dict(s) for i, s in sorted(cfg.strategies.items())},
        "init": init,
        "algorithm": algorithm,
        "rounds": cfg.max_rounds,
        "tol": cfg.convergence_tol,
        "seed": cfg.seed,
        "output_dir": exp.output_dir,
    }


def load_experiment(spec: str) -> Experiment:
    """Load an experiment from a file path or a bundled scenario name."""
    path = Path(spec)
    if path.is_file():
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{spec}: invalid JSON ({exc})") from None
        return parse_experiment(doc, base_dir=path.parent)
    bundled = resources.files("resilient_consensus").joinpath("scenarios", spec + ".json")
    if bundled.is_file():
        doc = json.loads(bundled.read_text(encoding="utf-8"))
        return parse_experiment(doc)
    raise ConfigError(f"no such experiment file or bundled scenario: {spec!r}")


def execute(exp: Experiment) -> tuple[Trace, SummaryReport]:
    start = time.perf_counter()
    if exp.algorithm == "wmsr":
        trace = wmsr.wmsr_vector_run(exp.config)
    elif isinstance(exp.algorithm, tuple):
        trace = sim.run_grouped(exp.config)
    else:
        trace = sim.run(exp.config)
    elapsed = time.perf_counter() - start
    return trace, summarize(trace, elapsed)


def summarize(trace: Trace, wall_clock_s: float) -> SummaryReport:
    """Recompute the headline numbers from the trace itself."""
    return SummaryReport(
        converged=trace.converged,
        rounds_used=trace.rounds_used,
        final_max_spread=float(trace.rounds[-1].metrics.spread.max()),
        validity_always=trace.validity_always,
        rate_bound_ok=sim.rate_bound_check(trace, trace.config.d, len(trace.config.benign)),
        wall_clock_s=wall_clock_s,
    )


def _print_summary(report: SummaryReport) -> None:
    print(f"converged: {report.converged}")
    print(f"rounds_used: {report.rounds_used}")
    print(f"final_max_spread: {report.final_max_spread:.3e}")
    print(f"validity_always: {report.validity_always}")
    print(f"rate_bound_ok: {report.rate_bound_ok}")
    print(f"wall_clock_s: {report.wall_clock_s:.3f}")


def _resolve_outdir(cli_value: str | None, config_value: str) -> Path:
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(config_value)


def _cmd_check_graph(args) -> int:
    try:
        g = graph.read_graph(args.path)
    except (OSError, graph.GraphParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    ok = True
    try:
        if args.s is None:
            report = graph.is_r_robust(g, args.r, cap=args.cap)
            label = f"{args.r}-robust"
        else:
            report = graph.is_rs_robust(g, args.r, args.s, cap=args.cap)
            label = f"({args.r},{args.s})-robust"
    except graph.CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    if report.holds:
        print(f"{label}: yes")
    else:
        ok = False
        v1, v2 = report.witness
        print(f"{label}: no (witness V1={sorted(v1)}, V2={sorted(v2)})")
    if args.d is not None and args.F is not None:
        need = (args.d + 1) * args.F + 1
        degree_ok = graph.check_min_degree(g, args.d, args.F)
        print(f"min degree >= {need}: {'yes' if degree_ok else 'no'}")
        ok = ok and degree_ok
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _write_outputs(trace: Trace, outdir: Path, stem: str = "") -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    sim.write_trace_csv(trace, outdir / f"{stem}trace.csv")
    sim.write_metrics_csv(trace, outdir / f"{stem}metrics.csv")


def _cmd_run(args) -> int:
    try:
        exp = load_experiment(args.experiment)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        trace, report = execute(exp)
    except NeighborhoodTooSmallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGREE
    outdir = _resolve_outdir(args.output_dir, exp.output_dir)
    _write_outputs(trace, outdir)
    _print_summary(report)
    print(f"outputs: {outdir / 'trace.csv'}, {outdir / 'metrics.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        exp = load_experiment(args.experiment)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    outdir = _resolve_outdir(args.output_dir, exp.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in range(args.seeds):
        cfg = SimConfig(
            graph=exp.config.graph,
            d=exp.config.d,
            F=exp.config.F,
            attack=exp.config.attack,
            faults=exp.config.faults,
            strategies=exp.config.strategies,
            init_states=exp.config.init_states,
            init_box=exp.config.init_box,
            max_rounds=exp.config.max_rounds,
            convergence_tol=exp.config.convergence_tol,
            seed=seed,
            grouping=exp.config.grouping,
        )
        try:
            trace, report = execute(Experiment(cfg, exp.algorithm, exp.output_dir, exp.graph_spec))
        except NeighborhoodTooSmallError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DEGREE
        rows.append((seed, report))
    header = (
        "seed,converged,rounds_used,final_max_spread,"
        "validity_always,rate_bound_ok,wall_clock_s"
    )
    lines = [header]
    for seed, rep in rows:
        lines.append(
            f"{seed},{int(rep.converged)},{rep.rounds_used},{rep.final_max_spread!r},"
            f"{int(rep.validity_always)},{int(rep.rate_bound_ok)},{rep.wall_clock_s:.3f}"
        )
    out = outdir / "summary.csv"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    frac = sum(r.converged for _, r in rows) / args.seeds if args.seeds else 0.0
    print(f"convergence_fraction: {frac}")
    print(f"outputs: {out}")
    return EXIT_OK


def _cmd_gen_graph(args) -> int:
    try:
        if args.kind == "complete":
            g = graph.complete_graph(args.n)
        elif args.kind == "cycle":
            g = graph.cycle_graph(args.n)
        else:
            base = graph.complete_graph(args.base)
            g = graph.grow_to(base, args.r, args.s, args.degree, args.n, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    graph.write_graph(g, args.out)
    print(f"wrote {args.out} ({g.n} nodes, {len(g.edges)} edges)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resilient-consensus",
        description="Resilient multi-dimensional consensus experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-graph", help="certify robustness of a graph file")
    p.add_argument("path")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--F", type=int, default=None)
    p.add_argument("--cap", type=int, default=graph.ENUMERATION_CAP)
    p.set_defaults(func=_cmd_check_graph)

    p = sub.add_parser("run", help="run one experiment file or bundled scenario")
    p.add_argument("experiment")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run seeded replicates and aggregate")
    p.add_argument("experiment")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gen-graph", help="write a generated graph to a file")
    p.add_argument("kind", choices=["complete", "cycle", "growth"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--base", type=int, default=5)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_graph)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
