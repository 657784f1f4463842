"""Command line: ``run``, ``replay`` and ``oracle``.

Exit codes for ``run``: 0 goal achieved, 1 config error, 2 rounds exhausted,
3 intent unsatisfiable, 4 agent failure. ``replay`` exits 0 when the trace
is consistent, 1 on malformed input or header/config mismatch, 2 on
recomputation mismatches.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, config as config_mod, env, game, oracle, trace
from .agents import (
    BestResponseAgent,
    FixtureTransport,
    HoldAgent,
    HttpTransport,
    LLMAgent,
    RandomAgent,
    RecordingTransport,
    StubTransport,
)

logger = logging.getLogger("intent_arena")

EXIT_CONFIG = 1


def _resolve(cfg: config_mod.RunConfig, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else cfg.base_dir / path


def build_transport(cfg: config_mod.RunConfig):
    llm = cfg.llm
    backend = llm.get("backend", "http")
    if backend == "fixture":
        transport = FixtureTransport(_resolve(cfg, llm["fixture"]))
    elif backend == "stub":
        transport = StubTransport(llm["replies"], cycle=bool(llm.get("cycle", True)))
    else:
        transport = HttpTransport(llm["endpoint"])
    if llm.get("record"):
        transport = RecordingTransport(transport, _resolve(cfg, llm["record"]))
    return transport


def build_agents(cfg: config_mod.RunConfig) -> list:
    agents = []
    for spec in cfg.agents:
        kind = spec["kind"]
        if kind == "hold":
            agents.append(HoldAgent())
        elif kind == "best_response":
            agents.append(BestResponseAgent(margin=float(spec.get("margin", 1.0))))
        elif kind == "random":
            agents.append(RandomAgent(low=float(spec.get("low", 0.5)), high=float(spec.get("high", 1.5)),
                                      seed=spec.get("seed")))
        else:
            llm = {**cfg.llm, **{k: v for k, v in spec.items() if k != "kind"}}
            # each LLM agent gets its own transport so stub scripts are not shared
            agents.append(LLMAgent(
                build_transport(cfg),
                model=llm.get("model", "gpt-4"),
                temperature=float(llm.get("temperature", 0.0)),
                max_tokens=int(llm.get("max_tokens", 256)),
                stateless=bool(llm.get("stateless", False)),
                max_tries=int(llm.get("max_tries", 3)),
            ))
    return agents


def cmd_run(args) -> int:
    overrides = {
        "intent": args.intent, "seed": args.seed, "rounds": args.rounds,
        "stop_on_success": True if args.stop_on_success else None,
        "force": True if args.force else None, "out": args.out, "agents": args.agents,
    }
    try:
        cfg = config_mod.load(args.config, overrides)
        network = cfg.network()
    except (config_mod.ConfigError, env.InvalidArgument) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out_dir) if cfg.out_dir else Path("runs") / Path(args.config).stem
    out.mkdir(parents=True, exist_ok=True)

    try:
        agents = build_agents(cfg)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _, solution = game.precheck(network, cfg.goal)
    initial_total = env.total_power(network)
    initial = game.make_record(network, cfg.goal, initial_total, 0)
    run_info = {"initial_total_w": initial_total,
                "required_saving_w": cfg.goal.power_saving.resolve(initial_total)}
    header = trace.header_record(cfg.echo(), run_info, solution, game.DEFAULT_GOAL_RTOL)

    with trace.TraceWriter(out / "trace.jsonl") as tw:
        tw.write(header)
        outcome = game.run_game(
            network, cfg.goal, agents, seed=cfg.seed or 0,
            stop_on_success=cfg.stop_on_success,
            power_ceiling_factor=cfg.power_ceiling_factor,
            force=cfg.force,
            on_round=lambda rec: tw.write(trace.round_record(rec)),
        )
        tw.write(trace.outcome_record(outcome))

    (out / "powers.csv").write_text(trace.powers_csv(initial, outcome.records), encoding="utf-8")
    (out / "rate_margins.csv").write_text(trace.margins_csv(initial, outcome.records), encoding="utf-8")
    report = trace.render_report(header, initial, outcome)
    (out / "report.txt").write_text(report, encoding="utf-8")
    if not args.quiet:
        print(report, end="")
        print(f"artifacts written to {out}")
    return outcome.status.exit_code


def cmd_replay(args) -> int:
    echo = None
    if args.config:
        try:
            echo = config_mod.load(args.config).echo()
        except config_mod.ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    try:
        report = trace.replay(args.trace, echo)
    except trace.HeaderMismatch as exc:
        print(f"header/config mismatch: {exc}", file=sys.stderr)
        return 1
    except (trace.TraceError, OSError) as exc:
        print(f"{args.trace}: {exc}", file=sys.stderr)
        return 1
    print(report.summary())
    return 0 if report.ok else 2


def cmd_oracle(args) -> int:
    try:
        cfg = config_mod.load(args.config, {"intent": args.intent})
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gammas = oracle.target_sinr(cfg.goal.rate_floors_bps, cfg.bandwidth_hz)
    sol = oracle.min_power_direct(cfg.gains, cfg.noise_linear, gammas)
    print("gamma: " + " ".join(f"{g:.12g}" for g in sol.target_sinrs))
    print(f"rho: {sol.spectral_radius:.12g}" + (" (ill-conditioned)" if sol.ill_conditioned else ""))
    if sol.feasible:
        print("P*: " + " ".join(f"{p:.12g}" for p in sol.min_powers_w))
        print(f"sum P*: {sol.total_power_w:.12g}")
    else:
        print("P*: infeasible")
    return 0 if sol.feasible else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intent-arena", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play the power game for one intent")
    run.add_argument("--config", required=True)
    run.add_argument("--intent")
    run.add_argument("--seed", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--stop-on-success", action="store_true")
    run.add_argument("--force", action="store_true", help="play even if the oracle says the intent is unsatisfiable")
    run.add_argument("--out")
    run.add_argument("--agents", choices=config_mod.AGENT_KINDS, help="use this agent kind for every user")
    run.add_argument("-q", "--quiet", action="store_true")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="recompute and check a trace")
    rep.add_argument("trace")
    rep.add_argument("--config", help="also check the trace header against this config")
    rep.set_defaults(func=cmd_replay)

    orc = sub.add_parser("oracle", help="print target SINRs, spectral radius and minimum powers")
    orc.add_argument("--config", required=True)
    orc.add_argument("--intent")
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
