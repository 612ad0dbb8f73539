"""Command-line interface.

    brbvs simulate --scenario A --n 600 --p 20 --seed 1 --out sim.csv
    brbvs brbvs --data sim.csv --kmax 6 --copula C0 --margins PH,PO --m 300 --B 20 --out sel.json
    brbvs evaluate --results sel.json --truth sim.truth.json

Invoking the program with options but no subcommand runs the selection
(``brbvs --data d.csv --kmax 5 --copula PL ...``).  The worker count for
subsample fits comes from --threads or the BRBVS_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .algorithm import BrbvsConfig, run_brbvs_metrics
from .data import ColumnSchema, parse_dataset, standardize
from .experiment import monte_carlo
from .fit import FitOptions, fit_model, format_summary, summarize
from .likelihood import ModelSpec
from .optimizer import OptimOptions
from .plot import emit_plot
from .simulate import SimConfig, evaluate, generate, write_simulation
from .stepwise import backward, forward, select_link

OUTPUT_SCHEMA = 1
COMMANDS = ("simulate", "fit", "brbvs", "select-link", "forward", "backward", "evaluate")


class CliError(RuntimeError):
    pass


def _names(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _links(text: str) -> tuple[str, str]:
    parts = _names(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated links, e.g. PH,PO")
    return parts[0], parts[1]


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _envelope(command: str, args: argparse.Namespace, result) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command", "threads")}
    return {
        "schema_version": OUTPUT_SCHEMA,
        "command": command,
        "version": __version__,
        "config": config,
        "result": result,
    }


def _write(args, payload: dict) -> None:
    text = dumps(payload)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)


def _fit_options(args) -> FitOptions:
    return FitOptions(ridge=args.ridge, optim=OptimOptions(max_iter=args.max_iter, grad_tol=args.grad_tol))


def _load(args):
    schema = ColumnSchema(covariates=_names(args.covariates) or None)
    d = parse_dataset(args.data, schema)
    if args.standardize:
        d = standardize(d)
    return d


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = SimConfig(n=args.n, p=args.p, scenario=args.scenario, links=args.links, seed=args.seed)
    res = generate(cfg)
    truth = args.truth or str(Path(args.out).with_suffix(".truth.json"))
    write_simulation(res, args.out, truth)
    r1, r2 = res.censoring_rates
    print(f"wrote {res.data.n} units to {args.out}; truth in {truth}")
    print(f"right-censored: margin 1 {100 * r1:.1f}%, margin 2 {100 * r2:.1f}%")
    return 0


def cmd_fit(args) -> int:
    d = _load(args)
    spec = ModelSpec(args.copula, args.margins, _names(args.eta1), _names(args.eta2), _names(args.eta3), args.n_knots)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = fit_model(spec, d, _fit_options(args))
    report = summarize(fm)
    print(format_summary(report))
    _write(args, _envelope("fit", args, report))
    return 0


def _selection_text(res) -> str:
    lines = [f"Sets of Relevant Covariates ({res.config.metric}):"]
    ordinal = {1: "st", 2: "nd", 3: "rd"}
    for v, ms in enumerate(res.margins):
        lines.append(f"Margin {v + 1}: s_hat = {ms.s_hat}")
        ranked = sorted(ms.freq.items(), key=lambda kv: (-kv[1], kv[0]))
        for j, (i, f) in enumerate(ranked, start=1):
            lines.append(f"  {j}{ordinal.get(j, 'th')}: {res.names[i]} ({100 * f:.2f}%)")
        if not ranked:
            lines.append("  (no variables selected)")
    if res.n_failed:
        lines.append(f"failed subsample fits: {res.n_failed} of {res.n_fits}")
    return "\n".join(lines)


def cmd_brbvs(args) -> int:
    d = _load(args)
    cfg = BrbvsConfig(
        kmax=args.kmax, copula=args.copula, margins=args.margins, m=args.m, tau=args.tau, B=args.B,
        metric=args.metric, seed=args.seed, n_knots=args.n_knots, threads=args.threads,
    )
    res = run_brbvs_metrics(d, cfg, (cfg.metric,), _fit_options(args))
    res = next(iter(res.values()))
    print(_selection_text(res))
    _write(args, _envelope("brbvs", args, res.to_dict()))
    if args.plot:
        emit_plot(res, args.plot)
    return 0


def cmd_select_link(args) -> int:
    d = _load(args)
    sel = select_link(d, args.measure, _names(args.eta1), _names(args.eta2), _fit_options(args))
    for margin in (1, 2):
        vals = sel.values[margin]
        best = sel.links[margin - 1]
        print(f"Margin {margin}: Best Link Function: {best}, {sel.measure} Value: {vals[best]:.6f}")
    _write(args, _envelope("select-link", args, sel.to_dict()))
    return 0


def _stepwise(args, fn, name) -> int:
    d = _load(args)
    covs = _names(args.candidates) or None
    trace = fn(d, args.copula, args.margins, args.measure, covs, _fit_options(args), args.n_knots, args.threads)
    print(trace.format())
    _write(args, _envelope(name, args, trace.to_dict()))
    return 0


def cmd_forward(args) -> int:
    return _stepwise(args, forward, "forward")


def cmd_backward(args) -> int:
    return _stepwise(args, backward, "backward")


def _report_text(reports: dict) -> str:
    lines = [f"{'metric':<8}{'margin':<8}{'FP':>8}{'FN':>8}{'<|s|>':>8}{'<|s&s*|>':>10}{'contain':>9}"]
    for mt, rep in reports.items():
        for v in range(2):
            lines.append(
                f"{mt:<8}{v + 1:<8}{rep.fp[v]:>8.3f}{rep.fn[v]:>8.3f}{rep.mean_size[v]:>8.3f}"
                f"{rep.mean_hits[v]:>10.3f}{rep.containment[v]:>9.3f}"
            )
    return "\n".join(lines)


def cmd_evaluate(args) -> int:
    if args.results:
        truths = args.truth or []
        if len(truths) not in (1, len(args.results)):
            raise CliError("give one truth file, or one per result file")
        if len(truths) == 1:
            truths = truths * len(args.results)
        sels, tru = [], []
        for rpath, tpath in zip(args.results, truths):
            res = json.loads(Path(rpath).read_text())
            res = res.get("result", res)
            sels.append(tuple(tuple(ms["selected"]) for ms in res["margins"]))
            t = json.loads(Path(tpath).read_text())["truth"]
            tru.append((tuple(t["s1"]), tuple(t["s2"])))
        report = evaluate(sels, tru, per_replicate=True)
        reports = {"input": report}
        payload = {"reports": {"input": report.to_dict()}, "n_rep": len(sels)}
    else:
        sim = SimConfig(n=args.n, p=args.p, scenario=args.scenario, links=args.links)
        cfg = BrbvsConfig(
            kmax=args.kmax, copula=args.copula, margins=args.margins, m=args.m, tau=args.tau, B=args.B,
            seed=args.seed, n_knots=args.n_knots, threads=args.threads,
        )
        mc = monte_carlo(sim, cfg, args.n_rep, args.seed, _names(args.metrics), _fit_options(args))
        reports = mc.reports
        payload = mc.to_dict()
    print(_report_text(reports))
    _write(args, _envelope("evaluate", args, payload))
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--data", required=True, help="CSV with t11,t12,t21,t22,cens1,cens2 and covariates")
        p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
        p.add_argument("--standardize", action="store_true", help="center and scale covariates first")
    p.add_argument("--out", help="JSON output path")
    p.add_argument("--n-knots", type=int, default=8, dest="n_knots")
    p.add_argument("--ridge", type=float, default=1e-4, help="penalty on raw baseline increments")
    p.add_argument("--max-iter", type=int, default=200, dest="max_iter")
    p.add_argument("--grad-tol", type=float, default=1e-6, dest="grad_tol")
    p.add_argument("--threads", type=int, default=None)


def _model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--copula", default="C0")
    p.add_argument("--margins", type=_links, default=("PH", "PO"), help="two links, e.g. PH,PO")


def _selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--m", type=int, default=None, help="subsample size (default n // 2)")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--B", type=int, default=50, help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brbvs", description="Copula survival models and bootstrap variable selection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with known truth")
    p.add_argument("--scenario", choices=("A", "B"), default="A")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--links", type=_links, default=("PH", "PO"))
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--truth", help="sidecar JSON path (default <out>.truth.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one copula survival model")
    _common(p)
    _model(p)
    p.add_argument("--eta1", help="margin-1 covariates")
    p.add_argument("--eta2", help="margin-2 covariates")
    p.add_argument("--eta3", help="dependence covariates")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("brbvs", help="bootstrap ranking-based variable selection")
    _common(p)
    _model(p)
    _selection(p)
    p.add_argument("--metric", default="FIM", choices=("FIM", "Abs"))
    p.add_argument("--plot", help="SVG path for the selection-frequency plot")
    p.set_defaults(func=cmd_brbvs)

    p = sub.add_parser("select-link", help="choose the best link per margin")
    _common(p)
    p.add_argument("--measure", default="AIC", choices=("AIC", "BIC"))
    p.add_argument("--eta1")
    p.add_argument("--eta2")
    p.set_defaults(func=cmd_select_link)

    for name, fn in (("forward", cmd_forward), ("backward", cmd_backward)):
        p = sub.add_parser(name, help=f"{name} stepwise selection")
        _common(p)
        _model(p)
        p.add_argument("--measure", default="AIC", choices=("AIC", "BIC"))
        p.add_argument("--candidates", help="covariates considered (default: all)")
        p.set_defaults(func=fn)

    p = sub.add_parser("evaluate", help="score selections against the known truth")
    _common(p, data=False)
    p.add_argument("--results", nargs="*", help="brbvs JSON outputs")
    p.add_argument("--truth", nargs="*", help="simulation sidecar JSON files")
    _model(p)
    _selection(p)
    p.add_argument("--scenario", choices=("A", "B"), default="A")
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--links", type=_links, default=("PH", "PO"), help="generating links")
    p.add_argument("--n-rep", type=int, default=20, dest="n_rep")
    p.add_argument("--metrics", default="FIM", help="comma-separated ranking metrics")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help", "--version"):
        argv = ["brbvs"] + argv
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # report and exit non-zero
        msg = f"{type(exc).__name__}: {exc}"
        print(f"error: {msg}", file=sys.stderr)
        if getattr(args, "out", None):
            Path(args.out).write_text(dumps({"schema_version": OUTPUT_SCHEMA, "command": args.command, "error": msg}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
