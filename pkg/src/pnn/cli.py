"""``pnn`` command line: run, param-count, compare, seeds.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

from .errors import ConfigError, DegenerateTestError, PnnError
from .models import SPECS, build_network, get_spec, param_count
from .rng import SeededRng
from .stats import descriptive, kruskal_wallis, mann_whitney_u, median, systematic_seeds

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_run(args) -> int:
    from .experiment import load_config, run_experiment, summary_line

    cfg = load_config(args.config)
    outcome = run_experiment(cfg, args.out, workers=args.workers)
    print(summary_line(cfg.model_label, outcome.summary))
    print(f"results in {outcome.out}")
    if outcome.failures:
        for f in outcome.failures:
            print(f"seed {f['seed']} failed: {f['error']}: {f['message']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_param_count(args) -> int:
    try:
        spec = get_spec(args.name)
    except KeyError:
        raise UsageError(f"unknown model {args.name!r}; available: {', '.join(sorted(SPECS))}")
    print(param_count(build_network(spec, SeededRng(0, "param-count"))))
    return EXIT_OK


def cmd_seeds(args) -> int:
    if args.take < 1 or args.take > args.strata:
        raise UsageError(f"need 1 <= take <= strata, got take={args.take}, strata={args.strata}")
    for s in systematic_seeds(args.population, args.strata, args.take):
        print(s)
    return EXIT_OK


# ------------------------------------------------------------------ compare

def read_groups(paths, metric: str) -> dict[str, list[float]]:
    """Group the ``metric`` column of aggregate CSVs by model, in first-seen order."""
    groups: dict[str, list[float]] = {}
    for p in paths:
        try:
            with open(p, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or metric not in reader.fieldnames \
                        or "model" not in reader.fieldnames:
                    raise UsageError(f"{p}: needs 'model' and {metric!r} columns")
                for row in reader:
                    if row[metric] in ("", None):
                        continue
                    groups.setdefault(row["model"], []).append(float(row[metric]))
        except FileNotFoundError:
            raise UsageError(f"no such file {p}") from None
    return groups


def compare(groups: dict[str, list[float]], pairs=None, alpha: float = 0.05,
            method: str = "normal") -> dict:
    """Kruskal-Wallis over every group plus Mann-Whitney U per pair, as one report dict."""
    warnings = []
    kept = {}
    for name, vals in groups.items():
        if len(vals) < 2:
            warnings.append(f"group {name!r} has {len(vals)} observation(s); excluded")
        else:
            kept[name] = vals
    if len(kept) < 2:
        raise UsageError(f"need at least 2 groups with >= 2 observations, got {len(kept)}")

    rows = []
    for name, vals in kept.items():
        d = descriptive(vals) if len(vals) >= 3 else None
        rows.append({"group": name, "n": len(vals), "mean": sum(vals) / len(vals),
                     "trimmed_mean": d.trimmed_mean if d else None, "median": median(vals)})

    try:
        kw = kruskal_wallis(list(kept.values()))
        kw_entry = {"test": "kruskal-wallis", "groups": list(kept), "statistic": kw.statistic,
                    "p_value": kw.p_value, "df": kw.df, "method": "chi-square, tie-corrected",
                    "reject": kw.significant(alpha)}
    except DegenerateTestError as exc:
        kw_entry = {"test": "kruskal-wallis", "groups": list(kept), "degenerate": str(exc),
                    "reject": False}

    if pairs is None:
        pairs = list(itertools.combinations(kept, 2))
    u_entries = []
    for a, b in pairs:
        for g in (a, b):
            if g not in kept:
                raise UsageError(f"pair group {g!r} not among {list(kept)}")
        entry = {"test": "mann-whitney-u", "x": a, "y": b}
        try:
            r = mann_whitney_u(kept[a], kept[b], method=method)
            entry.update(statistic=r.statistic, U_y=r.details["U_y"], p_value=r.p_value,
                         method=method + (", continuity-corrected" if r.method.continuity else ""),
                         reject=r.significant(alpha))
        except DegenerateTestError as exc:
            entry.update(degenerate=str(exc), reject=False)
        u_entries.append(entry)
    return {"alpha": alpha, "warnings": warnings, "descriptive": rows,
            "kruskal_wallis": kw_entry, "mann_whitney": u_entries}


def _num(v, fmt=".2f"):
    return "n/a" if v is None else format(v, fmt)


def _decision(entry, alpha):
    if "degenerate" in entry:
        return f"degenerate ({entry['degenerate']})"
    verdict = "reject" if entry["reject"] else "do not reject"
    return f"{verdict} H0 at alpha={alpha:g}"


def format_report(report: dict) -> str:
    alpha = report["alpha"]
    lines = [f"warning: {w}" for w in report["warnings"]]
    width = max(len(r["group"]) for r in report["descriptive"])
    lines.append(f"{'group':<{width}}  {'n':>3}  {'mean':>8}  {'trimmed':>8}  {'median':>8}")
    for r in report["descriptive"]:
        lines.append(f"{r['group']:<{width}}  {r['n']:>3}  {_num(r['mean']):>8}  "
                     f"{_num(r['trimmed_mean']):>8}  {_num(r['median']):>8}")
    kw = report["kruskal_wallis"]
    if "degenerate" in kw:
        lines.append(f"Kruskal-Wallis: {_decision(kw, alpha)}")
    else:
        lines.append(f"Kruskal-Wallis H={kw['statistic']:.4f} df={kw['df']} "
                     f"p={kw['p_value']:.4f} ({kw['method']}): {_decision(kw, alpha)}")
    for u in report["mann_whitney"]:
        head = f"Mann-Whitney {u['x']} vs {u['y']}"
        if "degenerate" in u:
            lines.append(f"{head}: {_decision(u, alpha)}")
        else:
            lines.append(f"{head}: U={u['statistic']:.2f} p={u['p_value']:.4f} "
                         f"({u['method']}): {_decision(u, alpha)}")
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    groups = read_groups(args.csv, args.metric)
    pairs = None
    if args.pair:
        pairs = []
        for p in args.pair:
            parts = p.split(",")
            if len(parts) != 2:
                raise UsageError(f"--pair expects A,B, got {p!r}")
            pairs.append((parts[0], parts[1]))
    report = compare(groups, pairs, args.alpha, args.method)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    text = format_report(report)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare_report.txt").write_text(text)
        (out / "compare_report.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pnn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config over its seeds")
    r.add_argument("--config", required=True, help="JSON experiment config")
    r.add_argument("--out", help="results directory (overrides the config's 'out')")
    r.add_argument("--workers", type=int, default=1, help="concurrent seed runs")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("param-count", help="print a model's trainable parameter count")
    c.add_argument("name")
    c.set_defaults(func=cmd_param_count)

    m = sub.add_parser("compare", help="Kruskal-Wallis and Mann-Whitney U on aggregate CSVs")
    m.add_argument("csv", nargs="+")
    m.add_argument("--metric", default="ensemble_err")
    m.add_argument("--pair", action="append", help="A,B group pair for a U test (repeatable)")
    m.add_argument("--alpha", type=float, default=0.05)
    m.add_argument("--method", choices=("normal", "exact"), default="normal")
    m.add_argument("--out", help="directory for compare_report.txt/.json")
    m.set_defaults(func=cmd_compare)

    s = sub.add_parser("seeds", help="print the systematic seed sample")
    s.add_argument("--strata", type=int, default=60)
    s.add_argument("--take", type=int, default=5)
    s.add_argument("--population", type=int, default=2**32 - 1)
    s.set_defaults(func=cmd_seeds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("pnn: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"pnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PnnError, OSError, ArithmeticError) as exc:
        print(f"pnn: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
