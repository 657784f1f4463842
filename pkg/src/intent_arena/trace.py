"""Trace files (JSONL), plot CSVs, the text report and trace replay.

A trace is one JSON object per line: a ``header`` (resolved config, template
and tool versions, oracle verdict), one ``round`` record per played round,
and a final ``outcome``. Every derived number in a round record can be
recomputed from its powers and the header, which is what :func:`replay` does.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, env, game
from .agents.prompts import TEMPLATE_VERSION
from .agents.scripted import PRNG_ALGORITHM
from .game import AbsoluteSaving, GoalSpec, RelativeSaving, RoundRecord

TRACE_SCHEMA = "intent-arena-trace/1"


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def header_record(config_echo: dict, outcome_config: dict, solution, rtol: float) -> dict:
    return {
        "type": "header",
        "schema": TRACE_SCHEMA,
        "tool": "intent-arena",
        "tool_version": __version__,
        "template_version": TEMPLATE_VERSION,
        "prng": PRNG_ALGORITHM,
        "config": config_echo,
        "initial_total_w": outcome_config["initial_total_w"],
        "required_saving_w": outcome_config["required_saving_w"],
        "goal_rtol": rtol,
        "oracle": oracle_summary(solution),
    }


def oracle_summary(solution) -> dict:
    return {
        "feasible": solution.feasible,
        "spectral_radius": solution.spectral_radius,
        "target_sinrs": list(solution.target_sinrs),
        "min_powers_w": None if solution.min_powers_w is None else list(solution.min_powers_w),
        "min_total_power_w": solution.total_power_w,
        "ill_conditioned": solution.ill_conditioned,
    }


def round_record(rec: RoundRecord) -> dict:
    d = rec.to_dict()
    d["type"] = "round"
    return d


def outcome_record(outcome: game.GameOutcome) -> dict:
    d = game.status_to_dict(outcome.status)
    d["type"] = "outcome"
    d["rounds_played"] = len(outcome.records)
    d["final_goal_satisfied"] = bool(outcome.records[-1].goal_satisfied) if outcome.records else False
    return d


class TraceWriter:
    """Append-only JSONL writer; each record is flushed as soon as it is written."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", encoding="utf-8", newline="\n")

    def write(self, record: dict) -> None:
        self._fh.write(dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# plot CSVs

def _f6(x: float) -> str:
    return f"{x:.6f}"


def powers_csv(initial: RoundRecord, records) -> str:
    """Per-user power and single-user minimum power per round, plus a total row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "user", "power_w", "min_given_others_w"])
    for rec in (initial, *records):
        for u, p in enumerate(rec.powers_w):
            w.writerow([rec.round, u + 1, _f6(p), _f6(rec.min_given_others_w[u])])
        w.writerow([rec.round, "total", _f6(rec.total_power_w), ""])
    return buf.getvalue()


def margins_csv(initial: RoundRecord, records) -> str:
    """Per-user rate minus floor per round, in kbps."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "user", "rate_margin_kbps"])
    for rec in (initial, *records):
        for u, m in enumerate(rec.margins_bps):
            w.writerow([rec.round, u + 1, _f6(m / 1000.0)])
    return buf.getvalue()


# report

def _vec(values, fmt="{:.6f}") -> str:
    return "[" + ", ".join(fmt.format(v) for v in values) + "]"


def render_report(header: dict, initial: Optional[RoundRecord], outcome: game.GameOutcome) -> str:
    cfg = header["config"]
    net = cfg["network"]
    orc = header["oracle"]
    lines = [
        f"intent-arena {header['tool_version']} (prompt template {header['template_version']})",
        "",
        f"intent: {cfg['intent'] or '(explicit goal)'}",
        f"users: {len(net['gains'])}   gains: {_vec(net['gains'], '{:g}')}",
        f"noise: {net['noise_db']} dB -> noise_linear = {net['noise_linear']!r} W"
        if net["noise_db"] is not None else f"noise_linear = {net['noise_linear']!r} W",
        f"bandwidth: {net['bandwidth_hz']:g} Hz",
        f"initial total power: {header['initial_total_w']:.6f} W",
        f"required saving: {header['required_saving_w']:.6f} W",
        f"rate floors: {_vec([f / 1000 for f in cfg['goal']['rate_floors_bps']], '{:.3f}')} kbps",
        "",
        f"oracle verdict: {'feasible' if orc['feasible'] else 'infeasible'}",
        f"spectral radius: {orc['spectral_radius']:.9f}" + ("  (ill-conditioned)" if orc["ill_conditioned"] else ""),
        f"target SINRs: {_vec(orc['target_sinrs'], '{:.6g}')}",
    ]
    if orc["min_powers_w"] is not None:
        lines.append(f"oracle minimum powers: {_vec(orc['min_powers_w'])} W")
        lines.append(f"oracle minimum total power: {orc['min_total_power_w']!r} W")
    else:
        lines.append("oracle minimum total power: n/a")
    lines.append("")

    st = outcome.status
    if isinstance(st, game.GoalAchieved):
        tail = ""
        if outcome.records and not outcome.records[-1].goal_satisfied:
            tail = f" (no longer satisfied in round {outcome.records[-1].round})"
        lines.append(f"status: goal achieved at round {st.round}{tail}")
    elif isinstance(st, game.MaxRoundsExhausted):
        lines.append(f"status: goal not achieved within {len(outcome.records)} rounds")
    elif isinstance(st, game.Infeasible):
        lines.append(f"status: intent unsatisfiable: {st.reason} (spectral radius {st.spectral_radius:.9f})")
    else:
        lines.append(f"status: agent failure: user {st.user + 1} in round {st.round}: {st.cause}")

    if outcome.records:
        K = len(outcome.records[0].powers_w)
        lines.append("")
        head = ["round"] + [f"p{u + 1} [W]" for u in range(K)] + ["total [W]"] + \
               [f"m{u + 1} [kbps]" for u in range(K)] + ["goal"]
        lines.append("  ".join(f"{h:>10}" for h in head))
        for rec in ((initial,) if initial else ()) + tuple(outcome.records):
            row = [str(rec.round)] + [f"{p:.4f}" for p in rec.powers_w] + [f"{rec.total_power_w:.4f}"] + \
                  [f"{m / 1000:+.4f}" for m in rec.margins_bps] + ["yes" if rec.goal_satisfied else "no"]
            lines.append("  ".join(f"{c:>10}" for c in row))
    return "\n".join(lines) + "\n"


# replay

class TraceError(ValueError):
    """Malformed trace; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class HeaderMismatch(ValueError):
    """The trace header disagrees with the configuration it is checked against."""


@dataclass(frozen=True)
class Mismatch:
    line: int
    round: int
    field: str
    stored: object
    recomputed: object


@dataclass
class ReplayReport:
    rounds_checked: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        if self.ok:
            return f"replay: {self.rounds_checked} rounds checked, 0 mismatches"
        m = self.mismatches[0]
        return (f"replay: {self.rounds_checked} rounds checked, {len(self.mismatches)} mismatches; "
                f"first at line {m.line} (round {m.round}) field {m.field}: "
                f"stored {m.stored!r}, recomputed {m.recomputed!r}")


def goal_from_header(cfg: dict) -> GoalSpec:
    g = cfg["goal"]
    ps = g["power_saving"]
    saving = AbsoluteSaving(Decimal(ps["absolute_w"])) if "absolute_w" in ps else RelativeSaving(Decimal(ps["relative"]))
    return GoalSpec(saving, tuple(float(f) for f in g["rate_floors_bps"]), int(g["max_rounds"]))


def network_from_header(cfg: dict) -> env.NetworkState:
    n = cfg["network"]
    return env.NetworkState(n["gains"], n["noise_linear"], n["bandwidth_hz"], n["initial_powers_w"])


def check_header_against(header: dict, config_echo: dict) -> None:
    """Raise :class:`HeaderMismatch` if physics or goal in the header differ from ``config_echo``."""
    hc = header["config"]
    for section, keys in (("network", ("gains", "noise_linear", "bandwidth_hz", "initial_powers_w")),
                          ("goal", ("power_saving", "rate_floors_bps"))):
        for k in keys:
            a, b = hc[section].get(k), config_echo[section].get(k)
            if a != b:
                raise HeaderMismatch(f"{section}.{k}: trace has {a!r}, config has {b!r}")


_DERIVED = ("rates_bps", "margins_bps", "total_power_w", "total_saving_w",
            "goal_satisfied", "violations", "min_given_others_w")


def read_trace(path) -> list:
    """Parse a trace into ``(line_number, record)`` pairs."""
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or "type" not in rec:
                raise TraceError(lineno, "record is not an object with a 'type'")
            out.append((lineno, rec))
    if not out:
        raise TraceError(1, "empty trace")
    return out


def replay(path, config_echo: Optional[dict] = None) -> ReplayReport:
    """Recompute every derived field of a trace from its stored powers."""
    records = read_trace(path)
    line, header = records[0]
    if header["type"] != "header":
        raise TraceError(line, "first record must be the header")
    try:
        cfg = header["config"]
        network = network_from_header(cfg)
        goal = goal_from_header(cfg)
        rtol = float(header["goal_rtol"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceError(line, f"bad header ({exc})") from exc
    if config_echo is not None:
        check_header_against(header, config_echo)

    report = ReplayReport()
    initial_total = env.total_power(network)
    for name, stored, recomputed in (
        ("initial_total_w", header.get("initial_total_w"), initial_total),
        ("required_saving_w", header.get("required_saving_w"), goal.power_saving.resolve(initial_total)),
    ):
        if stored != recomputed:
            report.mismatches.append(Mismatch(line, 0, name, stored, recomputed))

    ceilings = game.power_ceilings(network.powers_w, float(cfg.get("power_ceiling_factor", 10.0)))
    satisfied_rounds = []
    outcome = None
    for lineno, rec in records[1:]:
        kind = rec["type"]
        if kind == "outcome":
            outcome = (lineno, rec)
            continue
        if kind != "round":
            raise TraceError(lineno, f"unknown record type {kind!r}")
        try:
            stored = RoundRecord.from_dict(rec)
            state = network.with_powers(stored.powers_w)
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(lineno, f"bad round record ({exc})") from exc
        fresh = game.make_record(state, goal, initial_total, stored.round, rtol=rtol)
        for name in _DERIVED:
            a, b = getattr(stored, name), getattr(fresh, name)
            if a != b:
                report.mismatches.append(Mismatch(lineno, stored.round, name, a, b))
        if stored.requested_powers_w:
            clipped = tuple(np.clip(np.array(stored.requested_powers_w), 0.0, ceilings).tolist())
            if clipped != stored.powers_w:
                report.mismatches.append(Mismatch(lineno, stored.round, "powers_w", stored.powers_w, clipped))
        if fresh.goal_satisfied:
            satisfied_rounds.append(stored.round)
        report.rounds_checked += 1

    if outcome is not None:
        lineno, rec = outcome
        if rec.get("status") == "goal_achieved":
            expected = satisfied_rounds[0] if satisfied_rounds else None
            if rec.get("round") != expected:
                report.mismatches.append(Mismatch(lineno, rec.get("round") or 0, "status", rec.get("round"), expected))
    return report
