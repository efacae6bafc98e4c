"""Command-line interface: ``mvinegc {test, fit, simulate, prep}``."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import warnings

import numpy as np

from . import __version__, mvine, simstudy
from .copulas import ALL_FAMILIES, parse_family
from .exceptions import CapabilityError, InputError, NumericalError
from .gctest import GCConfig, mvine_test_variants
from .linear import granger_linear, var_aic
from .tsprep import first_difference, load_csv, pp_test

CLI_FORMAT = "mvinegc-cli/1"
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

FIT_NOTE = (
    "note: vine AIC uses copula log-likelihoods on rank-transformed data; "
    "VAR AIC uses Gaussian residual log-determinants. The two are not directly comparable."
)


def _k_arg(text):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 1..4 or 'auto', got {text!r}")
    if not 1 <= k <= 4:
        raise argparse.ArgumentTypeError(f"expected 1..4 or 'auto', got {text!r}")
    return k


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_input(p, pair=True):
    p.add_argument("--input", required=True, help="CSV file")
    if pair:
        p.add_argument("--cause", required=True, help="column of the candidate cause Y")
        p.add_argument("--effect", required=True, help="column of the effect X")
    p.add_argument("--diff", action="store_true", help="take first differences before analysis")
    p.add_argument("--no-header", action="store_true", help="file has no header row; columns are col0, col1, ...")
    p.add_argument("--index-col", type=int, default=0, help="position of the period label column (-1 for none)")


def _add_output(p):
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvinegc", description="Vine-copula Granger causality in the mean")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test Granger causality in both directions")
    _add_input(t)
    t.add_argument("--k", type=_k_arg, default="auto")
    t.add_argument("--N", type=_positive, default=200)
    t.add_argument("--B", type=_positive, default=200)
    t.add_argument("--T0", type=_positive, default=None)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--workers", type=_positive, default=1)
    t.add_argument("--variant", choices=("full", "split"), default=None, help="run only this M-vine variant")
    t.add_argument("--one-way", action="store_true", help="only test cause -> effect")
    t.add_argument("--families", type=_csv_list, default=None, help="comma-separated candidate families")
    _add_output(t)

    f = sub.add_parser("fit", help="AIC of M-vine orders 1..4 and of bivariate VARs")
    _add_input(f)
    f.add_argument("--k", type=_k_arg, default="auto", help="order to save (auto: AIC choice)")
    f.add_argument("--families", type=_csv_list, default=None)
    f.add_argument("--model-out", default=None, help="write the chosen model as JSON")
    _add_output(f)

    s = sub.add_parser("simulate", help="Monte Carlo size and power study")
    s.add_argument("--models", type=_csv_list, default=["S1", "P1"])
    s.add_argument("--T", type=_csv_list, default=["100"], help="comma-separated sample lengths")
    s.add_argument("--methods", type=_csv_list, default=list(simstudy.METHODS))
    s.add_argument("--preset", choices=tuple(simstudy.PRESETS), default="desk")
    s.add_argument("--S", type=_positive, default=None, help="replicates per cell (overrides the preset)")
    s.add_argument("--N", type=_positive, default=None)
    s.add_argument("--B", type=_positive, default=None)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=_positive, default=1)
    s.add_argument("--format", choices=("text", "machine"), default="text")
    s.add_argument("--out", default=None, help="file prefix for .txt, .csv and _pvalues.csv")

    pr = sub.add_parser("prep", help="load, optionally difference, and run unit-root checks")
    _add_input(pr, pair=False)
    pr.add_argument("--columns", type=_csv_list, default=None)
    _add_output(pr)
    return parser


def _emit(text: str, out):
    if not text.endswith("\n"):
        text += "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_pair(args):
    idx = None if args.index_col < 0 else args.index_col
    table = load_csv(args.input, [args.effect, args.cause], header=not args.no_header, index_col=idx)
    x, y = table.column(args.effect), table.column(args.cause)
    if args.diff:
        x, y = first_difference(x), first_difference(y)
    return table, x, y


def _stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _pp_line(name, s):
    try:
        r = pp_test(s)
    except InputError as exc:
        return {"series": name, "error": str(exc)}, f"unit root  {name}: not tested ({exc})", None
    p_txt = "<0.01" if r.p_below(0.01) else f"{r.p_value:.4f}"
    warn = None
    if r.p_value > 0.05:
        warn = f"warning: unit-root test does not reject for {name} (p={p_txt}); consider --diff"
    rec = {"series": name, "Z_tau": round(r.statistic, 10), "p_value": r.p_value, "below_0.01": r.p_below(0.01), "lags": r.lags}
    return rec, f"unit root  {name}: Z_tau={r.statistic:.4f} p={p_txt} lags={r.lags}", warn


def _command_line(args) -> str:
    parts = ["mvinegc", "test", "--input", args.input, "--cause", args.cause, "--effect", args.effect]
    if args.diff:
        parts.append("--diff")
    if args.no_header:
        parts.append("--no-header")
    parts += ["--index-col", str(args.index_col), "--k", str(args.k), "--N", str(args.N), "--B", str(args.B)]
    if args.T0 is not None:
        parts += ["--T0", str(args.T0)]
    parts += ["--alpha", repr(args.alpha), "--seed", str(args.seed)]
    if args.variant:
        parts += ["--variant", args.variant]
    if args.one_way:
        parts.append("--one-way")
    if args.families:
        parts += ["--families", ",".join(args.families)]
    parts += ["--format", args.format]
    return " ".join(shlex.quote(p) for p in parts)


def cmd_test(args) -> int:
    table, x, y = _load_pair(args)
    families = tuple(args.families) if args.families else ALL_FAMILIES
    cfg = GCConfig(k=args.k, N=args.N, B=args.B, T0=args.T0, alpha=args.alpha, candidates=families, seed=args.seed, workers=args.workers)
    variants = (args.variant,) if args.variant else ("full", "split")
    directions = [(args.cause, args.effect, x, y)]
    if not args.one_way:
        directions.append((args.effect, args.cause, y, x))

    pp_recs, pp_lines, warns = [], [], []
    for name, s in ((args.effect, x), (args.cause, y)):
        rec, line, warn = _pp_line(name, s)
        pp_recs.append(rec)
        pp_lines.append(line)
        if warn:
            warns.append(warn)
    for w in warns:
        print(w, file=sys.stderr)

    rows = []
    for cause, effect, eff, cau in directions:
        res = mvine_test_variants(eff, cau, cfg, variants)
        k = next(iter(res.values())).k_used
        lin = granger_linear(eff, cau, k)
        row = {"cause": cause, "effect": effect, "k": k, "T": int(eff.size)}
        for v, r in res.items():
            row[v] = {"statistic": r.statistic, "p_value": r.p_value, "B": r.B_effective, "n_failed": r.n_failed, "aic_x": r.model_x["aic"], "aic_xy": r.model_xy["aic"]}
        row["linear"] = {"statistic": lin.S, "p_value": lin.p_value, "lags": lin.p}
        rows.append(row)

    conf = cfg.to_dict()
    conf.update(input=args.input, cause=args.cause, effect=args.effect, diff=args.diff, variants=list(variants), rows_dropped=table.n_dropped)
    if args.format == "machine":
        recs = [{"format": CLI_FORMAT, "record": "config", "command": _command_line(args), **conf}]
        recs += [{"format": CLI_FORMAT, "record": "unit_root", **r} for r in pp_recs]
        recs += [{"format": CLI_FORMAT, "record": "test", **r} for r in rows]
        _emit("\n".join(json.dumps(r, sort_keys=True) for r in recs), args.out)
        return EXIT_OK

    labels = {"full": "M-vine", "split": "Split", "linear": "Linear"}
    cols = list(variants) + ["linear"]
    lines = [
        f"# {_command_line(args)}",
        f"# seed={cfg.seed} k={args.k} N={cfg.N} B={cfg.B} T0={cfg.T0 if cfg.T0 else 'ceil(T/2)'} alpha={cfg.alpha}",
        f"# families={','.join(conf['candidates'])} diff={args.diff} rows_dropped={table.n_dropped}",
        "",
        *pp_lines,
        "",
        f"{'direction':<30} {'k':>2} " + " ".join(f"{labels[c]:>11}" for c in cols),
    ]
    for r in rows:
        cells = " ".join(f"{r[c]['p_value']:>8.4f}{_stars(r[c]['p_value']):<3}" for c in cols)
        lines.append(f"{r['cause'] + ' -> ' + r['effect']:<30} {r['k']:>2} {cells}")
    lines.append("")
    lines.append("p-values; * p < 0.1, ** p < 0.05, *** p < 0.01")
    failed = [f"{r['cause']} -> {r['effect']}" for r in rows for v in variants if r[v]["n_failed"]]
    if failed:
        lines.append(f"bootstrap replicates failed for: {', '.join(failed)}")
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    table, x, y = _load_pair(args)
    families = tuple(parse_family(f) for f in args.families) if args.families else ALL_FAMILIES
    xy = np.column_stack([x, y])
    k_best, models = mvine.select_order(xy, 4, families)
    k_save = k_best if args.k == "auto" else args.k
    p_max = max(1, min(4, (x.size - 3) // 3))
    _, var_aics = var_aic(x, y, p_max)
    if args.model_out:
        with open(args.model_out, "w") as fh:
            fh.write(models[k_save - 1].to_json())
    if args.format == "machine":
        recs = [{"format": CLI_FORMAT, "record": "fit_config", "input": args.input, "cause": args.cause, "effect": args.effect, "diff": args.diff, "families": [f.value for f in families]}]
        recs += [{"format": CLI_FORMAT, "record": "vine", "k": m.k, "aic": m.aic, "loglik": m.loglik, "n_params": m.n_params} for m in models]
        recs += [{"format": CLI_FORMAT, "record": "var", "p": p + 1, "aic": float(a)} for p, a in enumerate(var_aics)]
        recs.append({"format": CLI_FORMAT, "record": "selected", "k": k_best, "saved_k": k_save, "model_file": args.model_out})
        _emit("\n".join(json.dumps(r, sort_keys=True) for r in recs), args.out)
        return EXIT_OK
    lines = [f"# input={args.input} X={args.effect} Y={args.cause} diff={args.diff} T={x.size}", "", f"{'model':<12} {'AIC':>12} {'loglik':>12} {'params':>7}"]
    for m in models:
        mark = " <" if m.k == k_best else ""
        lines.append(f"{'M-vine k=' + str(m.k):<12} {m.aic:>12.4f} {m.loglik:>12.4f} {m.n_params:>7}{mark}")
    for p, a in enumerate(var_aics):
        lines.append(f"{'VAR p=' + str(p + 1):<12} {a:>12.4f}")
    lines += ["", f"selected k = {k_best}", FIT_NOTE]
    if args.model_out:
        lines.append(f"model (k={k_save}) written to {args.model_out}")
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        base, S_size, S_power = simstudy.preset_config(args.preset, alpha=args.alpha)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sys.stderr.flush()
    for m in args.models:
        if m not in simstudy.MODEL_NAMES:
            raise InputError(f"unknown model {m!r}; valid names: {', '.join(simstudy.MODEL_NAMES)}")
    try:
        Ts = [int(t) for t in args.T]
    except ValueError:
        raise InputError(f"--T must be a comma-separated list of integers, got {','.join(args.T)}")
    cfg = GCConfig(N=args.N or base.N, B=args.B or base.B, alpha=args.alpha)
    cells = []
    for m in args.models:
        S = args.S or (S_size if m in simstudy.SIZE_MODELS else S_power)
        rep = simstudy.run_study([m], Ts, args.methods, S, cfg, args.workers, args.seed)
        cells += rep.cells
    report = simstudy.MonteCarloReport(cells, {"alpha": cfg.alpha, "seed": args.seed, "B": cfg.B, "N": cfg.N, "preset": args.preset})
    if args.out:
        paths = report.write(args.out)
        print("\n".join(f"wrote {p}" for p in paths), file=sys.stderr)
    if args.format == "machine":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(report.to_text() + "\n")
    return EXIT_OK


def cmd_prep(args) -> int:
    idx = None if args.index_col < 0 else args.index_col
    table = load_csv(args.input, args.columns, header=not args.no_header, index_col=idx)
    names = table.names
    data = {n: table.column(n) for n in names}
    index = list(table.index)
    if args.diff:
        data = {n: first_difference(v) for n, v in data.items()}
        index = index[1:]
    recs, lines = [], [f"# input={args.input} rows={len(table)} dropped={table.n_dropped} diff={args.diff}"]
    for n in names:
        rec, line, warn = _pp_line(n, data[n])
        recs.append(rec)
        lines.append(line)
        if warn:
            print(warn, file=sys.stderr)
    if args.format == "machine":
        text = "\n".join(json.dumps({"format": CLI_FORMAT, "record": "unit_root", **r}, sort_keys=True) for r in recs)
    else:
        text = "\n".join(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(",".join(["period"] + names) + "\n")
            for i, label in enumerate(index):
                fh.write(",".join([label] + [repr(float(data[n][i])) for n in names]) + "\n")
    sys.stdout.write(text + "\n")
    return EXIT_OK


COMMANDS = {"test": cmd_test, "fit": cmd_fit, "simulate": cmd_simulate, "prep": cmd_prep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, CapabilityError) as exc:
        print(f"mvinegc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"mvinegc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"mvinegc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
