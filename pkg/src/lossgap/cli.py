"""Command-line experiment runner.

Subcommands: ``theory``, ``mc``, ``attack``, ``bounds``, ``bayes``, ``plot``
and ``train``.  Experiment parameters come from a JSON manifest
(``--manifest``) and/or flags; flags win.  Every command is a pure function
of its parameters and input files: no clock, no environment variables.

CSV columns
-----------
theory  n,eps,r_std,r_rob,rob_minus_std,ordering,regime,regime_threshold,root_n0,min_n1,min_value
mc      n,eps,analytic,empirical_mean,empirical_stderr,trials,z
attack  (trials)  n,eps,trial,tau,accuracy,loss_gap,n_members,n_nonmembers,method,degenerate
        (summary) n,eps,trials,accuracy_mean,accuracy_stderr,loss_gap_mean,loss_gap_stderr,analytic_gap,degenerate_trials
        (trace)   repeat,calibration,tau,accuracy,loss_gap,n_members,n_nonmembers,method,degenerate
bounds  bound,value,max_n          (max_n = floor(value): largest integer n satisfying the bound)
bayes   d,mu,sigma,bayes_accuracy
train   epoch,mean_loss

Floats are written in shortest round-trip form (``repr``); absent values are
empty fields.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Optional, Sequence

import numpy as np

from lossgap import analytic, attack, bounds, gaussian_lab, svg
from lossgap.analytic import GaussianSpec
from lossgap.trainer import Adversary, TrainConfig, train

DEFAULTS: dict[str, Any] = {
    "d": 100,
    "mu": 1.0,
    "sigma": 1.0,
    "gamma": 1.0,
    "n_grid": "1,2,5,10,20,50",
    "eps_list": "0,0.5,1,2,4",
    "trials": 1000,
    "seed": 0,
    "solver": "exact",
    "adversary": "gradsign",
    "threshold": "median",
    "lr": 0.001,
    "epochs": 200,
}


class CliError(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# parameters ---------------------------------------------------------------


def _load_manifest(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise CliError("manifest must be a JSON object")
    unknown = set(data) - set(DEFAULTS) - {"eps", "out", "svg", "summary_out", "n"}
    if unknown:
        raise CliError(f"unknown manifest fields: {', '.join(sorted(unknown))}")
    return data


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < manifest < flags."""
    params = dict(DEFAULTS)
    params.update(_load_manifest(getattr(args, "manifest", None)))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "func", "manifest"):
            params[key] = value
    return params


def _float_list(value, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        items = [value]
    elif isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    else:
        items = list(value)
    try:
        out = [float(v) for v in items]
    except (TypeError, ValueError):
        raise CliError(f"{name}: expected a list of numbers, got {value!r}") from None
    if not out:
        raise CliError(f"{name}: must not be empty")
    return out


def parse_n_grid(value, integer: bool) -> list:
    """Comma list, JSON list, or ``log:LO:HI:COUNT`` for log-spaced reals."""
    if isinstance(value, str) and value.startswith("log:"):
        if integer:
            raise CliError("n_grid: simulations need integer sizes, not a log-spaced range")
        try:
            lo, hi, count = value[4:].split(":")
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError:
            raise CliError(f"n_grid: bad log range {value!r}, expected log:LO:HI:COUNT") from None
        if not (0 < lo < hi and count >= 2):
            raise CliError("n_grid: log range needs 0 < LO < HI and COUNT >= 2")
        return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), count)]
    grid = _float_list(value, "n_grid")
    if any(not n > 0 for n in grid):
        raise CliError("n_grid: sizes must be > 0")
    if integer:
        if any(n != int(n) for n in grid):
            raise CliError("n_grid: simulations need integer sizes")
        return [int(n) for n in grid]
    return grid


def _spec(params: dict) -> GaussianSpec:
    try:
        return GaussianSpec(int(params["d"]), float(params["mu"]), float(params["sigma"]), float(params["gamma"]))
    except ValueError as exc:
        raise CliError(f"spec: {exc}") from None


def _eps_list(params: dict) -> list[float]:
    if params.get("eps") is not None:
        eps = _float_list(params["eps"], "eps")
    else:
        eps = _float_list(params["eps_list"], "eps_list")
    if any(not (math.isfinite(e) and e >= 0) for e in eps):
        raise CliError("eps_list: values must be finite and >= 0")
    return eps


def _trials(params: dict, minimum: int) -> int:
    trials = int(params["trials"])
    if trials < minimum:
        raise CliError(f"trials: must be >= {minimum}, got {trials}")
    return trials


def _solver(params: dict):
    if params["solver"] == "exact":
        return None
    if params["solver"] == "gd":
        return TrainConfig(
            learning_rate=float(params["lr"]),
            epochs=int(params["epochs"]),
            adversary=Adversary(params["adversary"]),
        )
    raise CliError(f"solver: expected exact or gd, got {params['solver']!r}")


# commands -------------------------------------------------------------------

THEORY_HEADER = (
    "n", "eps", "r_std", "r_rob", "rob_minus_std", "ordering", "regime",
    "regime_threshold", "root_n0", "min_n1", "min_value",
)


def theory_rows(spec: GaussianSpec, n_grid: Sequence[float], eps_list: Sequence[float]) -> list[list]:
    rows = []
    for eps in eps_list:
        root = analytic.rob_root(spec, eps)
        minimum = analytic.rob_minimum(spec, eps) if root is not None else None
        for n in n_grid:
            r_std = analytic.loss_gap_std(spec, n)
            r_rob = analytic.loss_gap_rob(spec, n, eps)
            regime = analytic.eps_regime(spec, n, eps) if eps > 0 else None
            rows.append([
                n, eps, r_std, r_rob, r_rob - r_std,
                analytic.compare_rob_std(spec, n, eps).value,
                regime.kind.value if regime else None,
                regime.threshold if regime else None,
                root.n0 if root else None,
                minimum.n1 if minimum else None,
                minimum.value if minimum else None,
            ])
    return rows


def _series_by_eps(rows, x_col: int, y_col: int) -> dict:
    series: dict = {}
    for row in rows:
        series.setdefault(f"eps={_fmt(row[1])}", []).append((row[x_col], row[y_col]))
    return series


def cmd_theory(args) -> None:
    params = _resolve(args)
    spec = _spec(params)
    rows = theory_rows(spec, parse_n_grid(params["n_grid"], integer=False), _eps_list(params))
    _write(_csv(THEORY_HEADER, rows), params.get("out"))
    if params.get("svg"):
        chart = svg.line_chart(
            _series_by_eps(rows, 0, 3), x_label="n", y_label="loss gap r(n)",
            title=f"Analytic loss gap, d={spec.d}, mu={spec.mu:g}, sigma={spec.sigma:g}", logx=True,
        )
        _write(chart, params["svg"])


MC_HEADER = ("n", "eps", "analytic", "empirical_mean", "empirical_stderr", "trials", "z")


def mc_points(spec, n_grid, eps_list, trials, seed, solver) -> list[analytic.GapPoint]:
    points = []
    for n in n_grid:
        estimates = gaussian_lab.empirical_loss_gaps(spec, n, eps_list, trials, seed, solver)
        for eps, est in zip(eps_list, estimates):
            points.append(analytic.GapPoint(
                n, eps, analytic.loss_gap_rob(spec, n, eps), est.mean, est.stderr, est.trials
            ))
    return points


def cmd_mc(args) -> None:
    params = _resolve(args)
    spec = _spec(params)
    points = mc_points(
        spec, parse_n_grid(params["n_grid"], integer=True), _eps_list(params),
        _trials(params, 2), int(params["seed"]), _solver(params),
    )
    rows = [[p.n, p.eps, p.analytic_gap, p.empirical_mean, p.empirical_stderr, p.trials, p.z] for p in points]
    _write(_csv(MC_HEADER, rows), params.get("out"))
    if params.get("svg"):
        series: dict = {}
        for p in points:
            series.setdefault(f"theory eps={_fmt(p.eps)}", []).append((p.n, p.analytic_gap))
            series.setdefault(f"mc eps={_fmt(p.eps)}", []).append((p.n, p.empirical_mean))
        _write(svg.line_chart(series, x_label="n", y_label="loss gap", title="Theory vs Monte Carlo", logx=True), params["svg"])


ATTACK_TRIAL_HEADER = (
    "n", "eps", "trial", "tau", "accuracy", "loss_gap", "n_members", "n_nonmembers", "method", "degenerate",
)
ATTACK_SUMMARY_HEADER = (
    "n", "eps", "trials", "accuracy_mean", "accuracy_stderr", "loss_gap_mean",
    "loss_gap_stderr", "analytic_gap", "degenerate_trials",
)
ATTACK_TRACE_HEADER = (
    "repeat", "calibration", "tau", "accuracy", "loss_gap", "n_members", "n_nonmembers", "method", "degenerate",
)


def _mean_stderr(values: Sequence[float]) -> tuple[float, Optional[float]]:
    if len(values) < 2:
        return values[0], None
    est = gaussian_lab.summarize(values)
    return est.mean, est.stderr


def _attack_trace(params: dict) -> str:
    records = attack.load_loss_trace(params["trace"])
    method = attack.ThresholdMethod(params["threshold"])
    if params.get("tau") is not None:
        calibration, source, method_out = attack.Calibration(float(params["tau"]), False), "fixed", None
    elif params.get("shadow"):
        calibration = attack.calibrate_from_trace(attack.load_loss_trace(params["shadow"]), method)
        source, method_out = "shadow", method
    else:
        calibration = attack.calibrate_from_trace(records, method)
        source, method_out = "self", method

    repeats = int(params.get("balance_repeats") or 0)
    traces = (
        list(attack.balanced_subsets(records, repeats, int(params["seed"]))) if repeats > 0 else [records]
    )
    rows = []
    for k, trace in enumerate(traces):
        rep = attack.attack_accuracy(trace, calibration.tau, method_out, calibration.degenerate)
        rows.append([
            k, source, rep.tau, rep.accuracy, rep.loss_gap, rep.n_members, rep.n_nonmembers,
            rep.method.value if rep.method else None, rep.degenerate,
        ])
    return _csv(ATTACK_TRACE_HEADER, rows)


def cmd_attack(args) -> None:
    params = _resolve(args)
    if params.get("trace"):
        _write(_attack_trace(params), params.get("out"))
        return
    spec = _spec(params)
    method = attack.ThresholdMethod(params["threshold"])
    n_grid = parse_n_grid(params["n_grid"], integer=True)
    eps_list = _eps_list(params)
    trials = _trials(params, 1)
    solver = _solver(params)
    trial_rows, summary_rows = [], []
    for n in n_grid:
        for eps in eps_list:
            reports = attack.run_membership_experiment(spec, n, eps, trials, int(params["seed"]), method, solver)
            for t, rep in enumerate(reports):
                trial_rows.append([
                    n, eps, t, rep.tau, rep.accuracy, rep.loss_gap, rep.n_members,
                    rep.n_nonmembers, rep.method.value, rep.degenerate,
                ])
            acc_mean, acc_se = _mean_stderr([r.accuracy for r in reports])
            gap_mean, gap_se = _mean_stderr([r.loss_gap for r in reports])
            summary_rows.append([
                n, eps, trials, acc_mean, acc_se, gap_mean, gap_se,
                analytic.loss_gap_rob(spec, n, eps), sum(r.degenerate for r in reports),
            ])
    trial_csv = _csv(ATTACK_TRIAL_HEADER, trial_rows)
    summary_csv = _csv(ATTACK_SUMMARY_HEADER, summary_rows)
    out = params.get("out")
    summary_out = params.get("summary_out")
    if out in (None, "-") and not summary_out:
        sys.stdout.write(trial_csv + "\n" + summary_csv)
        return
    _write(trial_csv, out)
    if not summary_out:
        stem = out[:-4] if out.endswith(".csv") else out
        summary_out = stem + ".summary.csv"
    _write(summary_csv, summary_out)


def cmd_bounds(args) -> None:
    try:
        spec = bounds.VectorSpec(_float_list(args.mu_list, "mu-list"), _float_list(args.sigma_list, "sigma-list"))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rows = [
        ["original", bounds.bound_original(spec, args.eps)],
        ["improved", bounds.bound_improved(spec, args.eps)],
    ]
    if args.zeta is not None:
        rows.append(["label_noise", bounds.bound_label_noise(spec, args.eps, args.zeta)])
    for row in rows:
        row.append(math.floor(row[1]))
    _write(_csv(("bound", "value", "max_n"), rows), args.out)


def cmd_bayes(args) -> None:
    params = _resolve(args)
    spec = _spec(params)
    _write(_csv(("d", "mu", "sigma", "bayes_accuracy"),
                [[spec.d, spec.mu, spec.sigma, analytic.bayes_accuracy(spec)]]), params.get("out"))


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CliError(f"{path}: empty CSV")
    return rows[0], [r for r in rows[1:] if r]


def cmd_plot(args) -> None:
    header, rows = _read_table(args.input)
    wanted = [args.x, args.y] + ([args.series] if args.series else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise CliError(f"{args.input}: missing column(s) {', '.join(missing)}; have {', '.join(header)}")
    if not rows:
        raise CliError(f"{args.input}: no data rows")
    xi, yi = header.index(args.x), header.index(args.y)
    si = header.index(args.series) if args.series else None
    series: dict = {}
    for row in rows:
        if not row[xi] or not row[yi]:
            continue
        name = f"{args.series}={row[si]}" if si is not None else args.y
        series.setdefault(name, []).append((float(row[xi]), float(row[yi])))
    if not series:
        raise CliError(f"{args.input}: no rows with both {args.x} and {args.y}")
    try:
        chart = svg.line_chart(series, x_label=args.x, y_label=args.y, title=args.title or "", logx=args.logx)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _write(chart, args.out)


def cmd_train(args) -> None:
    params = _resolve(args)
    spec = _spec(params)
    n = parse_n_grid(params.get("n", 10), integer=True)[0]
    eps = _eps_list(params)[0]
    data = gaussian_lab.sample_dataset(spec, n, int(params["seed"]))
    config = TrainConfig(float(params["lr"]), int(params["epochs"]), eps, Adversary(params["adversary"]))
    _, trace = train(data, spec.gamma, config)
    _write(trace.to_csv(), params.get("out"))


# parser ---------------------------------------------------------------------


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="JSON manifest; flags override its fields")
    p.add_argument("--d", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--out", help="output path (default stdout)")


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-grid", dest="n_grid", help="e.g. 1,2,5,10 or log:0.1:100:200")
    p.add_argument("--eps", type=float, help="single eps (overrides --eps-list)")
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated eps values")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=["exact", "gd"])
    p.add_argument("--adversary", choices=[a.value for a in Adversary])
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossgap", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="analytic loss gaps over an (n, eps) grid")
    _add_spec_flags(p)
    _add_sweep_flags(p)
    p.add_argument("--svg", help="also write a line chart here")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("mc", help="Monte Carlo loss gaps against the closed form")
    _add_spec_flags(p)
    _add_sweep_flags(p)
    _add_sim_flags(p)
    p.add_argument("--svg", help="also write a line chart here")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("attack", help="threshold membership attack (Gaussian experiment or loss trace)")
    _add_spec_flags(p)
    _add_sweep_flags(p)
    _add_sim_flags(p)
    p.add_argument("--threshold", choices=[m.value for m in attack.ThresholdMethod])
    p.add_argument("--summary-out", dest="summary_out")
    p.add_argument("--trace", help="score this loss-trace CSV instead of simulating")
    p.add_argument("--shadow", help="calibrate tau on this loss-trace CSV")
    p.add_argument("--tau", type=float, help="use this threshold instead of calibrating")
    p.add_argument("--balance-repeats", dest="balance_repeats", type=int,
                   help="score K class-balanced subsamples (without replacement)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bounds", help="sample-size bounds for an increasing generalisation gap")
    p.add_argument("--mu-list", dest="mu_list", required=True)
    p.add_argument("--sigma-list", dest="sigma_list", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--zeta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("bayes", help="Bayes-optimal accuracy of the Gaussian model")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("plot", help="render a CSV as an SVG line chart")
    p.add_argument("input")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--series")
    p.add_argument("--logx", action="store_true")
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("train", help="gradient-descent trace on one sampled dataset")
    _add_spec_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--adversary", choices=[a.value for a in Adversary])
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, RuntimeError, OSError) as exc:
        print(f"lossgap {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
