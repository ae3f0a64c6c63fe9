"""Command-line front end: ``exact``, ``simulate`` and ``sweep``.

Exit codes: 0 success, 2 configuration error, 3 runtime or statistics error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence, TextIO

from .config import RunConfig, parse_config
from .errors import ConfigError, InsufficientStatisticsError, SimulationError
from .experiment import (
    CorrelationReport,
    SweepCurve,
    correlation_estimate,
    exact_correlation,
    exact_outcome_table,
    run_trials,
    sweep_tau,
)
from .interferometer import DETECTORS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

JOINT_PAIRS = (("c1", "c2"), ("c1", "d1"), ("c1", "d2"), ("c2", "d1"), ("c2", "d2"), ("d1", "d2"))


def fmt(x: float | int | None) -> str:
    """12 significant digits; blanks for missing values."""
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    if x != x:  # NaN
        return ""
    return f"{x:.12g}"


def _conditional_pairs(predicate: str) -> list[tuple[str, str]]:
    anchors = {"c1_single_and_right_single": ["c1"], "c2_single_and_right_single": ["c2"]}.get(
        predicate, ["c1", "c2"]
    )
    return [(a, d) for a in anchors for d in ("d1", "d2")]


def _summary_rows(trials, predicate: str, err: TextIO) -> list[dict]:
    rows = []
    n = len(trials)
    for pair in _conditional_pairs(predicate):
        try:
            r = correlation_estimate(trials, pair, "conditional", predicate)
            rows.append(r.to_dict())
        except InsufficientStatisticsError:
            print(f"warning: no post-selected trials for conditional {pair}; reporting n = 0", file=err)
            rows.append({
                "pair": list(pair), "estimator_kind": "conditional", "value": None,
                "standard_error": None, "n_trials": n, "n_postselected": 0,
            })
    for pair in JOINT_PAIRS:
        rows.append(correlation_estimate(trials, pair, "joint").to_dict())
    return rows


def _write_report_table(writer, rows: list[dict]) -> None:
    writer.writerow(["pair", "kind", "value", "standard_error", "n_trials", "n_postselected"])
    for r in rows:
        writer.writerow([
            "_".join(r["pair"]), r["estimator_kind"], fmt(r["value"]),
            fmt(r["standard_error"]), r["n_trials"], r["n_postselected"],
        ])


def render_exact(cfg: RunConfig) -> str:
    spec, model = cfg.spec(), cfg.model()
    table = exact_outcome_table(spec, model)
    correlations = []
    for pair in (("c1", "d2"), ("c1", "d1"), ("c2", "d1"), ("c2", "d2")):
        correlations.append({"pair": list(pair), "kind": "conditional", "value": exact_correlation(table, pair)})
    for pair in JOINT_PAIRS:
        correlations.append({"pair": list(pair), "kind": "joint", "value": exact_correlation(table, pair, "joint")})

    if cfg.format == "json":
        doc = {
            "command": "exact",
            "config": cfg.as_dict(),
            "outcomes": [dict(zip(DETECTORS, cfg_), probability=p) for cfg_, p in table.items()],
            "correlations": correlations,
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*DETECTORS, "probability"])
    for occ, p in table.items():
        w.writerow([*occ, fmt(p)])
    buf.write("\n")
    w.writerow(["pair", "kind", "value"])
    for c in correlations:
        w.writerow(["_".join(c["pair"]), c["kind"], fmt(c["value"])])
    return buf.getvalue()


def render_simulate(cfg: RunConfig, err: TextIO) -> str:
    trials = run_trials(cfg.spec(), cfg.model(), cfg.trials, cfg.seed)
    rows = _summary_rows(trials, cfg.predicate, err)
    if cfg.format == "json":
        doc = {
            "command": "simulate",
            "config": cfg.as_dict(),
            "trials": [
                {
                    "trial": t.trial_index,
                    "counts": t.counts,
                    "timestamps": t.timestamps,
                    "collapse_time": t.collapse_time,
                }
                for t in trials
            ],
            "reports": rows,
        }
        return json.dumps(doc) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", *DETECTORS, *(f"t_{d}" for d in DETECTORS), "collapse_time"])
    stamps = trials.timestamps
    for i in range(len(trials)):
        w.writerow([
            int(trials.trial_index[i]),
            *(int(x) for x in trials.counts[i]),
            *(fmt(float(x)) for x in stamps[i]),
            fmt(float(trials.collapse_time[i])),
        ])
    buf.write("\n")
    _write_report_table(w, rows)
    return buf.getvalue()


def render_sweep(cfg: RunConfig) -> tuple[str, SweepCurve]:
    curve = sweep_tau(
        cfg.spec(0.0), cfg.model(), cfg.tau_grid.values(), cfg.trials, cfg.seed,
        threshold=cfg.threshold, predicate=cfg.predicate,
    )
    if cfg.format == "json":
        doc = {"command": "sweep", "config": cfg.as_dict(), "curve": curve.to_dict()}
        return json.dumps(doc, indent=2) + "\n", curve
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "corr_c1_d2", "corr_c1_d2_se", "corr_c1_d1", "corr_c1_d1_se",
                "exact_c1_d2", "exact_c1_d1", "n_postselected"])
    for i, tau in enumerate(curve.grid):
        r2: CorrelationReport = curve.reports["c1_d2"][i]
        r1: CorrelationReport = curve.reports["c1_d1"][i]
        w.writerow([
            fmt(tau), fmt(r2.value), fmt(r2.standard_error), fmt(r1.value), fmt(r1.standard_error),
            fmt(curve.exact["c1_d2"][i]), fmt(curve.exact["c1_d1"][i]), r2.n_postselected,
        ])
    buf.write(jump_footer(curve) + "\n")
    return buf.getvalue(), curve


def jump_footer(curve: SweepCurve) -> str:
    j = curve.jump
    if j is None:
        return f"# no jump detected (threshold {fmt(curve.threshold)})"
    return (
        f"# jump detected: pair={'_'.join(j.pair)} location={fmt(j.location)} "
        f"magnitude={fmt(j.magnitude)} left={fmt(j.left)} right={fmt(j.right)}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapse-interferometer",
        description="Two-photon interferometer correlations under different collapse semantics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("exact", "exact outcome probabilities and correlations for one delay"),
        ("simulate", "seeded Monte Carlo trials for one delay"),
        ("sweep", "correlation curves along a delay grid with jump detection"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration (see config_schema.json)")
        p.add_argument("--L", dest="geometry.L", type=float, help="arm length")
        p.add_argument("--l", dest="geometry.l", type=float, help="beam splitter to detector distance")
        p.add_argument("--c", dest="geometry.c", type=float, help="propagation speed")
        p.add_argument("--tau", type=float)
        p.add_argument("--tau-start", dest="tau_grid.start", type=float)
        p.add_argument("--tau-stop", dest="tau_grid.stop", type=float)
        p.add_argument("--tau-points", dest="tau_grid.points", type=int)
        p.add_argument("--semantics", choices=["coherent", "positional_instant", "finite_duration"])
        p.add_argument("--delta", type=float, help="detector window width")
        p.add_argument("--dist", help="uniform | delta[:offset] | histogram:w1,w2,...")
        p.add_argument("--anchoring", choices=["pre_reading", "post_arrival"])
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--predicate", choices=[
            "c1_single_and_right_single", "c2_single_and_right_single", "any_left_right_coincidence",
        ])
        p.add_argument("--threshold", type=float, help="jump detection threshold")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--out", help="output file (default: stdout)")
    return parser


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = parse_config(args.config, overrides, command=args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG

    echo = ", ".join(
        f"{k}={getattr(cfg, k.split('.')[-1])}" for k, src in cfg.provenance.items() if src == "default"
    )
    if echo:
        print(f"# defaulted: {echo}", file=err)

    try:
        if args.command == "exact":
            text = render_exact(cfg)
        elif args.command == "simulate":
            text = render_simulate(cfg, err)
        else:
            text, _ = render_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except (SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME

    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
