"""Command-line front end over the simulation and numerics workflows.

Each subcommand prints its headline numbers and, with ``--output``, writes
an artifact.  CSV artifacts start with a ``# config`` line echoing the full
resolved configuration as one JSON object, then a header row, then data
rows, all LF-terminated; JSON artifacts carry the same configuration under
a ``config`` key next to ``schema_version``.  Identical configurations
(seed included) rerun to byte-identical artifacts.

Exit codes: 0 success, 2 usage or invalid configuration, 3 numerical
non-convergence, 4 a tail check that could not collect enough hits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .core import HistoryWindow, Params, ProtocolKind, RandomSource
from .estimators import lln_throughput, pi_means
from .event_sim import ArrivalStream, simulate
from .kernel import run_chain
from .ldp import (
    GridSpec,
    default_grid,
    rate_I,
    rate_IA,
    rate_IS,
    rate_J,
    tail_bound_check,
)
from .numerics import PowerIterationError
from .throughput import optimize_lambda_aloha, s_aloha, s_csma

__all__ = [
    "EXIT_INSUFFICIENT",
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_USAGE",
    "RunConfig",
    "build_parser",
    "config_header",
    "main",
    "parse_config_header",
    "run",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INSUFFICIENT = 4

_CONFIG_TAG = "# config "

_POINT_ARITY = {"pair": 2, "scaled": 2, "success": 1, "attempts": 1}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved inputs of one command invocation.

    Fields a command does not use stay None; the artifact header echoes the
    whole record so a run can be reproduced from its output alone.
    """

    command: str
    protocol: str | None = None
    lam: float | None = None
    kappa: int | None = None
    horizon: float | None = None
    steps: int | None = None
    runs: int | None = None
    seed: int = 0
    output: str | None = None
    fmt: str = "csv"
    grid_h: float | None = None
    grid_smax: float | None = None
    kmax: int | None = None
    kind: str | None = None
    point: tuple[float, ...] | None = None
    s_target: float | None = None


def config_header(cfg: RunConfig) -> str:
    """The one-line reproducibility header: a tag plus the config as JSON."""
    d = asdict(cfg)
    if d["point"] is not None:
        d["point"] = list(d["point"])
    return _CONFIG_TAG + json.dumps(d, sort_keys=True, separators=(",", ":"))


def parse_config_header(line: str) -> RunConfig:
    """Inverse of ``config_header``."""
    line = line.strip()
    if not line.startswith(_CONFIG_TAG):
        raise ValueError("missing config header line")
    d = json.loads(line[len(_CONFIG_TAG):])
    if d.get("point") is not None:
        d["point"] = tuple(d["point"])
    return RunConfig(**d)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="macsim",
        description="Multi-channel ALOHA and CSMA: simulation, chain "
                    "sampling, closed-form throughput and rate-function "
                    "numerics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_protocol(sp):
        sp.add_argument("--protocol", choices=["csma", "aloha"], required=True,
                        help="medium-access protocol")

    def add_model(sp, with_lam=True):
        if with_lam:
            sp.add_argument("--lambda", dest="lam", type=float, required=True,
                            help="arrival intensity")
        sp.add_argument("--kappa", type=int, required=True,
                        help="number of channels")

    def add_seed(sp):
        sp.add_argument("--seed", type=int, default=0,
                        help="nonnegative 64-bit seed (default 0)")

    def add_output(sp):
        sp.add_argument("--output", default=None, help="artifact path")
        sp.add_argument("--format", dest="fmt", choices=["csv", "json"],
                        default="csv", help="artifact format (default csv)")

    sp = sub.add_parser("simulate",
                        help="event-level protocol run over a time horizon")
    add_protocol(sp)
    add_model(sp)
    sp.add_argument("--horizon", type=float, required=True,
                    help="simulated time span")
    add_seed(sp)
    add_output(sp)

    sp = sub.add_parser("sample-chain",
                        help="draw admission steps from the transition kernel")
    add_protocol(sp)
    add_model(sp)
    sp.add_argument("--steps", type=int, required=True,
                    help="number of admission steps")
    add_seed(sp)
    add_output(sp)

    sp = sub.add_parser("throughput",
                        help="closed-form long-run success rate")
    add_protocol(sp)
    add_model(sp)
    add_output(sp)

    sp = sub.add_parser("optimize-lambda",
                        help="arrival intensity maximizing the ALOHA closed form")
    add_model(sp, with_lam=False)
    add_output(sp)

    sp = sub.add_parser("rate-function",
                        help="large-deviation cost at a point: kinds pair "
                             "(per-step attempts and gap means), scaled "
                             "(attempt and success rates per unit time), "
                             "success (success rate alone), attempts "
                             "(attempt rate alone)")
    sp.add_argument("kind", choices=sorted(_POINT_ARITY))
    sp.add_argument("point", type=float, nargs="+",
                    help="coordinates; two for pair/scaled, one otherwise")
    add_protocol(sp)
    add_model(sp)
    sp.add_argument("--grid-h", dest="grid_h", type=float, default=None,
                    help="gap-bin width override")
    sp.add_argument("--grid-smax", dest="grid_smax", type=float, default=None,
                    help="gap-range override for the verification kernel")
    sp.add_argument("--kmax", type=int, default=None,
                    help="attempt-count truncation override")
    add_output(sp)

    sp = sub.add_parser("tail-check",
                        help="Monte-Carlo decay of a low-success event vs "
                             "the predicted rate")
    sp.add_argument("s_target", type=float,
                    help="success rate whose lower tail is probed")
    add_protocol(sp)
    add_model(sp)
    sp.add_argument("--horizon", type=float, required=True,
                    help="time span of each run")
    sp.add_argument("--runs", type=int, required=True,
                    help="number of independent runs")
    add_seed(sp)
    add_output(sp)

    sp = sub.add_parser("compare",
                        help="event run vs kernel sampler: KS distance on "
                             "gaps, total variation on attempts")
    add_protocol(sp)
    add_model(sp)
    sp.add_argument("--steps", type=int, required=True,
                    help="admission steps drawn on each side")
    add_seed(sp)
    add_output(sp)

    return ap


def _config_from_namespace(parser: argparse.ArgumentParser,
                           ns: argparse.Namespace) -> RunConfig:
    point = getattr(ns, "point", None)
    kind = getattr(ns, "kind", None)
    if kind is not None and len(point) != _POINT_ARITY[kind]:
        parser.error(f"kind '{kind}' takes {_POINT_ARITY[kind]} "
                     f"coordinate(s), got {len(point)}")
    if getattr(ns, "seed", 0) < 0:
        parser.error("--seed must be nonnegative")
    for name in ("lam", "horizon", "s_target"):
        v = getattr(ns, name, None)
        if v is not None and not v > 0:
            parser.error(f"{name.replace('lam', 'lambda')} must be positive")
    for name in ("kappa", "steps", "runs"):
        v = getattr(ns, name, None)
        if v is not None and v < 1:
            parser.error(f"--{name} must be at least 1")
    return RunConfig(
        command=ns.command,
        protocol=getattr(ns, "protocol", None),
        lam=getattr(ns, "lam", None),
        kappa=getattr(ns, "kappa", None),
        horizon=getattr(ns, "horizon", None),
        steps=getattr(ns, "steps", None),
        runs=getattr(ns, "runs", None),
        seed=getattr(ns, "seed", 0),
        output=getattr(ns, "output", None),
        fmt=getattr(ns, "fmt", "csv"),
        grid_h=getattr(ns, "grid_h", None),
        grid_smax=getattr(ns, "grid_smax", None),
        kmax=getattr(ns, "kmax", None),
        kind=kind,
        point=tuple(point) if point is not None else None,
        s_target=getattr(ns, "s_target", None),
    )


# ---------------------------------------------------------------------------
# command runners: each returns (exit code, columns, rows, stdout lines)


def _model(cfg: RunConfig) -> tuple[Params, ProtocolKind]:
    return Params(lam=cfg.lam, kappa=cfg.kappa), ProtocolKind(cfg.protocol)


def _run_simulate(cfg: RunConfig):
    p, proto = _model(cfg)
    src = RandomSource(cfg.seed)
    tr = simulate(p, proto, ArrivalStream.poisson(src, p.lam), cfg.horizon)
    c = tr.counts
    rate = c.successes_total / cfg.horizon
    rows = [
        ("attempts_total", c.attempts_total),
        ("successes_total", c.successes_total),
        ("potential_successes", c.potential_successes),
        ("horizon", cfg.horizon),
        ("success_rate", rate),
    ]
    lines = [
        f"attempts_total {c.attempts_total}",
        f"successes_total {c.successes_total}",
        f"success_rate {rate:.10g}",
    ]
    return EXIT_OK, ("metric", "value"), rows, lines


def _run_sample_chain(cfg: RunConfig):
    p, proto = _model(cfg)
    init = HistoryWindow.saturated((2.0,) * (p.kappa - 1))
    recs = run_chain(p, proto, cfg.steps, init, RandomSource(cfg.seed))
    mean_a, mean_s = pi_means(recs)
    rows = [(i + 1, r.attempts, r.gap) for i, r in enumerate(recs)]
    lines = [
        f"mean_attempts {mean_a:.10g}",
        f"mean_gap {mean_s:.10g}",
        f"lln_throughput {lln_throughput(recs, proto):.10g}",
    ]
    return EXIT_OK, ("step", "attempts", "gap"), rows, lines


def _run_throughput(cfg: RunConfig):
    p, proto = _model(cfg)
    res = s_csma(p) if proto is ProtocolKind.CSMA else s_aloha(p)
    rows = [("throughput", res.value)]
    return EXIT_OK, ("metric", "value"), rows, [f"{res.value:.10g}"]


def _run_optimize_lambda(cfg: RunConfig):
    lam_star, value = optimize_lambda_aloha(cfg.kappa)
    ratio = lam_star / cfg.kappa
    rows = [
        ("lambda_star", lam_star),
        ("lambda_per_channel", ratio),
        ("throughput", value),
    ]
    lines = [
        f"lambda_star {lam_star:.10g}",
        f"lambda_per_channel {ratio:.10g}",
        f"throughput {value:.10g}",
    ]
    return EXIT_OK, ("metric", "value"), rows, lines


def _grid_override(cfg: RunConfig) -> GridSpec | None:
    if cfg.grid_h is None and cfg.grid_smax is None and cfg.kmax is None:
        return None
    h = cfg.grid_h if cfg.grid_h is not None else default_grid(cfg.kappa).h
    return GridSpec(h=h, s_max=cfg.grid_smax, k_max=cfg.kmax)


def _run_rate_function(cfg: RunConfig):
    p, proto = _model(cfg)
    grid = _grid_override(cfg)
    pt = cfg.point
    if cfg.kind == "pair":
        rp = rate_J(pt[0], pt[1], proto, p, grid)
    elif cfg.kind == "scaled":
        rp = rate_I(pt[0], pt[1], proto, p, grid)
    elif cfg.kind == "success":
        rp = rate_IS(pt[0], proto, p, grid)
    else:
        rp = rate_IA(pt[0], p)
    rows = [("kind", cfg.kind)]
    rows += [(f"x{i + 1}", v) for i, v in enumerate(pt)]
    rows += [("value", rp.value), ("note", rp.note)]
    lines = [f"rate {rp.value:.10g}"]
    if rp.note:
        lines.append(rp.note)
    return EXIT_OK, ("metric", "value"), rows, lines


def _run_tail_check(cfg: RunConfig):
    p, proto = _model(cfg)
    workers = max(1, os.cpu_count() or 1)
    report = tail_bound_check(proto, p, cfg.s_target, cfg.horizon, cfg.runs,
                              RandomSource(cfg.seed), workers=workers)
    rows = [
        ("runs", report.runs),
        ("hits", report.hits),
        ("cutoff", report.cutoff),
        ("t", report.t),
        ("s_target", report.s_target),
        ("mc_rate", report.mc_rate),
        ("predicted_rate", report.predicted_rate),
        ("sufficient", report.sufficient),
        ("passed", report.passed),
        ("detail", report.detail),
    ]
    lines = [f"hits {report.hits} of {report.runs} runs",
             f"predicted_rate {report.predicted_rate:.10g}"]
    if report.mc_rate is not None:
        lines.insert(1, f"mc_rate {report.mc_rate:.10g}")
    if report.passed is None:
        lines.append("insufficient data")
    else:
        lines.append(f"passed {str(report.passed).lower()}")
    if report.detail:
        lines.append(report.detail)
    code = EXIT_OK if report.sufficient else EXIT_INSUFFICIENT
    return code, ("metric", "value"), rows, lines


def _compare_sim_records(proto_value: str, lam: float, kappa: int, seed: int,
                         steps: int) -> list[tuple[int, float]]:
    p = Params(lam=lam, kappa=kappa)
    proto = ProtocolKind(proto_value)
    horizon = steps * (1.0 + 2.0 / lam) + 10.0
    while True:
        src = RandomSource(seed)
        tr = simulate(p, proto, ArrivalStream.poisson(src, lam), horizon)
        if len(tr.steps) >= steps:
            return [(r.attempts, r.gap) for r in tr.steps[:steps]]
        horizon *= 2.0  # draw order is horizon-independent, so still reproducible


def _compare_chain_records(proto_value: str, lam: float, kappa: int, seed: int,
                           steps: int) -> list[tuple[int, float]]:
    p = Params(lam=lam, kappa=kappa)
    proto = ProtocolKind(proto_value)
    init = HistoryWindow.saturated((2.0,) * (kappa - 1))
    recs = run_chain(p, proto, steps, init, RandomSource(seed, stream=1))
    return [(r.attempts, r.gap) for r in recs]


def compare_distances(sim: Sequence[tuple[int, float]],
                      chain: Sequence[tuple[int, float]]) -> tuple[float, float]:
    """(KS distance on gaps, total variation on attempt counts)."""
    gap_s = np.array([g for _, g in sim])
    gap_c = np.array([g for _, g in chain])
    ks = float(stats.ks_2samp(gap_s, gap_c).statistic)
    att_s = np.array([a for a, _ in sim], dtype=np.int64)
    att_c = np.array([a for a, _ in chain], dtype=np.int64)
    hi = int(max(att_s.max(), att_c.max()))
    pmf_s = np.bincount(att_s, minlength=hi + 1) / len(att_s)
    pmf_c = np.bincount(att_c, minlength=hi + 1) / len(att_c)
    tv = 0.5 * float(np.abs(pmf_s - pmf_c).sum())
    return ks, tv


def _run_compare(cfg: RunConfig):
    args = (cfg.protocol, cfg.lam, cfg.kappa, cfg.seed, cfg.steps)
    if (os.cpu_count() or 1) > 1:
        with ProcessPoolExecutor(max_workers=2) as ex:
            f_sim = ex.submit(_compare_sim_records, *args)
            f_chain = ex.submit(_compare_chain_records, *args)
            sim, chain = f_sim.result(), f_chain.result()
    else:
        sim = _compare_sim_records(*args)
        chain = _compare_chain_records(*args)
    ks, tv = compare_distances(sim, chain)
    rows = [("n", cfg.steps), ("ks_sigma", ks), ("tv_attempts", tv)]
    lines = [f"ks_sigma {ks:.10g}", f"tv_attempts {tv:.10g}"]
    return EXIT_OK, ("metric", "value"), rows, lines


_COMMANDS = {
    "simulate": _run_simulate,
    "sample-chain": _run_sample_chain,
    "throughput": _run_throughput,
    "optimize-lambda": _run_optimize_lambda,
    "rate-function": _run_rate_function,
    "tail-check": _run_tail_check,
    "compare": _run_compare,
}


# ---------------------------------------------------------------------------
# artifacts


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, type(None), str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = float(v)
    if math.isfinite(f):
        return f
    return repr(f)  # 'inf', '-inf' or 'nan'; JSON has no literals for these


def _write_artifact(cfg: RunConfig, columns, rows) -> None:
    if cfg.fmt == "json":
        d = asdict(cfg)
        if d["point"] is not None:
            d["point"] = list(d["point"])
        payload = {
            "schema_version": 1,
            "config": d,
            "columns": list(columns),
            "rows": [[_json_cell(v) for v in row] for row in rows],
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return
    with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
        fh.write(config_header(cfg) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


# ---------------------------------------------------------------------------
# entry points


def run(cfg: RunConfig) -> int:
    """Execute one resolved configuration; returns the process exit code."""
    runner = _COMMANDS.get(cfg.command)
    if runner is None:
        print(f"unknown command: {cfg.command}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, columns, rows, lines = runner(cfg)
    except PowerIterationError as e:
        print(f"numerical non-convergence: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.output:
        _write_artifact(cfg, columns, rows)
    for ln in lines:
        print(ln)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _config_from_namespace(parser, ns)
    except SystemExit as e:
        return EXIT_USAGE if e.code is None else int(e.code)
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
