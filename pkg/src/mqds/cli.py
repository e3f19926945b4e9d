"""Command-line entry point: ``mqds {rate,evaluate,simulate,validate}``.

Exit codes: 0 success, 1 infeasible or aborted, 2 usage error. Settings
come from flags, then a flat JSON config file (``--config``), then
defaults; unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import oracles
from .channel import pulse_rates
from .params import ChannelParams, ProtocolParams, SecurityTargets
from .rate import OptimizerConfig, RatePoint, evaluate, rate_curve
from .security import robustness_probability
from .sim import AdversaryScript, Kind, run_protocol

CSV_COLUMNS = (
    "distance_km", "N_min", "R", "mu", "nu", "p_mu", "p_nu", "t", "T_a", "T_v",
    "eps1", "eps2", "eps_for", "eps_rob", "eps_rep", "eps_tot",
)
RATE_SCHEMA = "mqds-rate/1"
ADVERSARIES = {
    "none": Kind.NONE,
    "forge": Kind.FORGING_BOB,
    "repudiate": Kind.REPUDIATING_ALICE,
    "collude-bob": Kind.COLLUDING_EMERY_BOB,
    "collude-alice": Kind.COLLUDING_EMERY_ALICE,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every setting a command can take; None means "use the default"."""

    parties: int = 3
    dist_start: float = 0.0
    dist_end: float = 300.0
    dist_step: float = 10.0
    distance: float = 0.0
    ed: float = 0.005
    pd: float = 1e-7
    eta_det: float = 0.93
    alpha: float = 0.16
    eps_tot: float = 1e-9
    phase_relation: str = "corrected"
    delta_model: str = "difference"
    pulses: float = 1e6
    mu: float = 0.5
    nu: float = 0.1
    p_mu: float = 0.5
    p_nu: float = 0.3
    t: float = 0.3
    T_a: float = 0.02
    T_v: float = 0.04
    seed: int = 0
    adversary: str = "none"
    flip_rate: float = 0.5
    divergence: float = 0.1
    transcript: str | None = None
    out: str | None = None
    format: str = "csv"
    workers: int = 0  # 0: all available cores

    def validate(self) -> None:
        if self.parties not in (3, 4, 5):
            raise UsageError("--parties must be 3, 4 or 5")
        if self.dist_start < 0 or self.dist_start > self.dist_end:
            raise UsageError("need 0 <= --dist-start <= --dist-end")
        if self.dist_step <= 0:
            raise UsageError("--dist-step must be positive")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        if self.adversary not in ADVERSARIES:
            raise UsageError(f"--adversary must be one of {', '.join(ADVERSARIES)}")
        if self.adversary.startswith("collude") and self.parties != 5:
            raise UsageError("collusion with Emery needs --parties 5")
        if not 0 < self.eps_tot < 1:
            raise UsageError("--eps-tot must lie in (0, 1)")
        if self.workers < 0:
            raise UsageError("--workers must be nonnegative")

    def channel(self, distance: float | None = None) -> ChannelParams:
        d = self.distance if distance is None else distance
        try:
            return ChannelParams(d, self.alpha, self.eta_det, self.pd, self.ed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def targets(self) -> SecurityTargets:
        # component targets keep their default ratio of one tenth of the total
        return SecurityTargets(self.eps_tot, self.eps_tot / 10, self.eps_tot / 10, self.eps_tot / 10)

    def protocol(self) -> ProtocolParams:
        try:
            return ProtocolParams(
                M=self.parties, N=self.pulses, mu=self.mu, nu=self.nu, p_mu=self.p_mu, p_nu=self.p_nu,
                t=self.t, T_a=self.T_a, T_v=self.T_v, channel=self.channel(),
                confidence=self.targets().confidence(self.parties),
                phase_relation=self.phase_relation, delta_model=self.delta_model,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


_FIELDS = {f.name: f for f in fields(RunConfig)}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a flat JSON object")
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for k, v in data.items():
        if isinstance(v, (dict, list)):
            raise UsageError(f"config key {k} must be a scalar")
        default = _FIELDS[k].default
        try:
            out[k] = v if default is None or v is None else type(default)(v)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config key {k}: {exc}") from exc
    return out


def build_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(ns, "config", None):
        values.update(load_config(ns.config))
    values.update({k: v for k, v in vars(ns).items() if k in _FIELDS and v is not None})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.4g}"
    return str(v)


def point_row(pt: RatePoint) -> dict:
    row = dict.fromkeys(CSV_COLUMNS)
    row.update(distance_km=pt.distance_km, N_min=pt.N_min, R=pt.R)
    if pt.feasible:
        p = pt.params
        row.update(mu=p.mu, nu=p.nu, p_mu=p.p_mu, p_nu=p.p_nu, t=p.t, T_a=p.T_a, T_v=p.T_v_min)
        b = pt.budget.as_dict()
        row.update({k: b[k] for k in ("eps1", "eps2", "eps_for", "eps_rob", "eps_rep", "eps_tot")})
    return row


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return None
    return v


def format_rate_json(cfg: RunConfig, rows: list[dict]) -> str:
    doc = {
        "schema": RATE_SCHEMA,
        "parties": cfg.parties,
        "channel": {"ed": cfg.ed, "pd": cfg.pd, "eta_det": cfg.eta_det, "alpha": cfg.alpha},
        "eps_tot": cfg.eps_tot,
        "model": {"phase_relation": cfg.phase_relation, "delta_model": cfg.delta_model},
        "columns": list(CSV_COLUMNS),
        "points": [{k: _json_value(v) for k, v in r.items()} for r in rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc


def _check_writable(out: str | None) -> None:
    if out is not None:
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write {out}")


def cmd_rate(cfg: RunConfig) -> int:
    _check_writable(cfg.out)
    distances = np.arange(cfg.dist_start, cfg.dist_end + cfg.dist_step / 2, cfg.dist_step)
    workers = cfg.workers or os.cpu_count() or 1
    config = OptimizerConfig(phase_relation=cfg.phase_relation, delta_model=cfg.delta_model)
    points = rate_curve([round(float(d), 9) for d in distances], cfg.parties, cfg.channel(0.0),
                        cfg.targets(), config, workers=workers)
    rows = [point_row(p) for p in points]
    _emit(format_csv(rows) if cfg.format == "csv" else format_rate_json(cfg, rows), cfg.out)
    return 0 if any(p.feasible for p in points) else 1


def cmd_evaluate(cfg: RunConfig) -> int:
    params = cfg.protocol()
    ev = evaluate(params, cfg.targets())
    d = ev.details
    doc = {
        "feasible": ev.feasible,
        "reason": ev.reason,
        "budget": ev.budget.as_dict() if ev.budget else None,
        "e_b": d.get("e_b"),
        "E_BF": d.get("E_BF"),
        "T_vk": d.get("T_vk"),
        "E_B": d.get("E_B"),
    }
    if cfg.format == "json":
        _emit(json.dumps(doc, indent=2) + "\n", cfg.out)
    else:
        lines = [f"{k},{_fmt(v) if not isinstance(v, dict) else ''}" for k, v in doc.items() if k != "budget"]
        if ev.budget:
            lines += [f"{k},{_fmt(v)}" for k, v in ev.budget.as_dict().items()]
        _emit("key,value\n" + "\n".join(lines) + "\n", cfg.out)
    return 0 if ev.feasible else 1


def cmd_simulate(cfg: RunConfig) -> int:
    params = cfg.protocol()
    script = AdversaryScript(ADVERSARIES[cfg.adversary], cfg.flip_rate, cfg.divergence)
    keep = cfg.transcript is not None
    try:
        out = run_protocol(params, script, cfg.seed, keep_transcript=keep)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    r = pulse_rates(params.mu, params.channel)
    E_pred, P_pred = r.error / r.conclusive, r.conclusive / r.click
    t_B = out.tallies["B"]
    rob = (
        robustness_probability(E_pred, params.T_a, float(t_B.matched[0]) * P_pred, params.t, params.confidence.eps2)
        if t_B.matched[0] > 0 else 1.0
    )
    rows = []
    for q in params.recipients:
        rows.append({
            "recipient": q,
            "decision": "accept" if out.decisions[q] else "reject",
            "E_ct": out.E_ct[q],
            "E_cu": out.E_cu[q],
            "E_expected": E_pred,
            "P_c": out.P_c[q],
            "P_c_expected": P_pred,
        })
    verdict = "ACCEPT" if out.verdict else "ABORT"
    if cfg.format == "json":
        doc = {"verdict": verdict, "reason": out.reason, "seed": cfg.seed, "adversary": cfg.adversary,
               "robustness_bound": rob, "recipients": rows}
        text = json.dumps(doc, indent=2, default=lambda v: None) + "\n"
    else:
        cols = list(rows[0])
        lines = [",".join(cols)] + [",".join(_fmt(r[c]) for c in cols) for r in rows]
        text = "\n".join(lines) + f"\nverdict,{verdict}\nrobustness_bound,{_fmt(rob)}\n"
    _emit(text, cfg.out)
    if keep:
        _emit(out.transcript.to_json() + "\n", cfg.transcript)
    return 0 if out.verdict else 1


def cmd_validate(cfg: RunConfig) -> int:
    results = oracles.run_suite()
    width = max(len(n) for n, _, _ in results)
    lines = [f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}" for name, ok, detail in results]
    passed = sum(ok for _, ok, _ in results)
    lines.append(f"{passed}/{len(results)} oracles passed")
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0 if passed == len(results) else 1


def _channel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ed", type=float, help="basis misalignment rate")
    p.add_argument("--pd", type=float, help="dark-count probability per detector and gate")
    p.add_argument("--eta-det", type=float, help="detector efficiency")
    p.add_argument("--alpha", type=float, help="fiber loss in dB/km")


def _protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distance", type=float, help="fiber length in km")
    p.add_argument("--pulses", type=float, help="pulses per recipient and message, N")
    p.add_argument("--mu", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--p-mu", dest="p_mu", type=float)
    p.add_argument("--p-nu", dest="p_nu", type=float)
    p.add_argument("--t", type=float, help="test fraction")
    p.add_argument("--T-a", dest="T_a", type=float, help="authentication threshold")
    p.add_argument("--T-v", dest="T_v", type=float, help="verification threshold")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON object of settings")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--parties", type=int, choices=(3, 4, 5))
    common.add_argument("--eps-tot", type=float)
    common.add_argument("--phase-relation", choices=("nominal", "corrected"))
    common.add_argument("--delta-model", choices=("difference", "pattern"))

    p = sub.add_parser("rate", parents=[common], help="optimal rate versus distance")
    p.add_argument("--dist-start", type=float)
    p.add_argument("--dist-end", type=float)
    p.add_argument("--dist-step", type=float)
    p.add_argument("--workers", type=int, help="worker processes (0: all cores)")
    _channel_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="security budget at one parameter point")
    _channel_flags(p)
    _protocol_flags(p)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run of the protocol")
    _channel_flags(p)
    _protocol_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--adversary", choices=tuple(ADVERSARIES))
    p.add_argument("--flip-rate", type=float)
    p.add_argument("--divergence", type=float)
    p.add_argument("--transcript", help="write the JSON transcript here")

    sub.add_parser("validate", parents=[common], help="run the oracle suite")
    return parser


COMMANDS = {"rate": cmd_rate, "evaluate": cmd_evaluate, "simulate": cmd_simulate, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = build_config(ns)
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mqds: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
