"""Command line entry point: ``tailcv <subcommand> --config cfg.json [--set key=value ...]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .. import bounds
from ..masks import verify_mask_property, verify_train_balance
from ..sim import derive_rng, sample
from . import runner, verify
from .config import ExperimentConfig


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n")


def _write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    header = list(rows[0])
    for r in rows[1:]:
        header += [k for k in r if k not in header]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config, args.set or ())
    if args.out:
        cfg = cfg.replace(output_dir=args.out)
    return cfg


def _out(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir)


def _echo(cfg: ExperimentConfig) -> dict:
    """Config as recorded in reports; the output location is not part of the experiment."""
    d = cfg.to_dict()
    d.pop("output_dir")
    return d


def _pick_n(cfg: ExperimentConfig, n: int | None) -> int:
    return cfg.n_grid[0] if n is None else n


def _report_failures(trials) -> int:
    fails = runner.hard_failures(trials)
    for n, t, name in fails[:20]:
        print(f"hard assertion failed: {name} (n={n}, trial={t})", file=sys.stderr)
    return 1 if fails else 0


# -- subcommands ----------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _load_config(args)
    n = _pick_n(cfg, args.n)
    data = sample(cfg.generator, n, derive_rng(cfg.master_seed, "data", n, args.trial))
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    data.to_csv(out / f"data_n{n}_t{args.trial}.csv")
    (out / "generator.json").write_text(cfg.generator.to_json() + "\n")
    return 0


def cmd_masks(args) -> int:
    cfg = _load_config(args)
    n = _pick_n(cfg, args.n)
    masks = cfg.masks(n, args.trial)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    masks.save(out / f"masks_n{n}_t{args.trial}.json")
    ok = verify_mask_property(masks).ok and verify_train_balance(masks).ok
    if not ok:
        print("mask balance violated", file=sys.stderr)
    return 0 if ok else 1


def cmd_cv(args) -> int:
    cfg = _load_config(args)
    n = _pick_n(cfg, args.n)
    tr = runner.run_trial(cfg, n, args.trial)
    summary = {"trial": tr.to_row(), "report": tr.report.to_dict(), "checks": tr.checks,
               "config": _echo(cfg)}
    _write_json(_out(cfg) / f"cv_n{n}_t{args.trial}.json", summary)
    return _report_failures([tr])


def _bound_rows(inputs: bounds.BoundInputs, K, p) -> list[dict]:
    rows = []
    for v in bounds.all_radii(inputs, K=K, p=p):
        rows.append({"formula_id": v.formula_id, "radius": v.radius, "coverage": v.coverage,
                     "n": inputs.n, "n_T": inputs.n_T, "n_V": inputs.n_V, "alpha": inputs.alpha,
                     "vc": inputs.vc, "delta": inputs.delta, "M": v.M, "M5": inputs.M5,
                     "note": v.note})
    return rows


def _inputs_from_flags(args) -> tuple[bounds.BoundInputs, int | None, int | None]:
    p = {}
    if args.inputs:
        p = json.loads(Path(args.inputs).read_text())
    for key in ("n", "n_T", "n_V", "alpha", "vc", "M", "M5", "delta", "K", "p"):
        v = getattr(args, "b_" + key)
        if v is not None:
            p[key] = v
    K, lp = p.pop("K", None), p.pop("p", None)
    n = p.get("n")
    if n is None:
        raise SystemExit("bounds: n is required")
    if K is not None and "n_V" not in p:
        p["n_V"], p["n_T"] = n // K, n - n // K
    if lp is not None and "n_V" not in p:
        p["n_V"], p["n_T"] = lp, n - lp
    return bounds.BoundInputs(**p), K, lp


def _resized(inp: bounds.BoundInputs, n: int, K, p) -> bounds.BoundInputs:
    if K is not None:
        n_V = n // K
    elif p is not None:
        n_V = p
    else:
        n_V = max(1, round(n * inp.n_V / inp.n))
    return bounds.BoundInputs(n, n - n_V, n_V, inp.alpha, inp.vc, inp.M, inp.M5, inp.delta)


def cmd_bounds(args) -> int:
    if args.config:
        cfg = _load_config(args)
        vc = cfg.build_class().vc_proxy
        K = cfg.K if cfg.scheme == "kfold" else None
        p = cfg.p if cfg.scheme.startswith("lpo") else None
        rows = []
        for n in cfg.n_grid:
            n_T, n_V = cfg.fold_sizes(n)
            for M in cfg.M:
                for delta in cfg.delta_grid:
                    rows += _bound_rows(bounds.BoundInputs(n, n_T, n_V, cfg.alpha, vc, M, cfg.M5,
                                                           delta), K, p)
        out = _out(cfg)
        _write_json(out / "bounds.json", rows)
        _write_csv(out / "bounds_sweep.csv", rows)
        return 0
    inp, K, p = _inputs_from_flags(args)
    rows = _bound_rows(inp, K, p)
    out = Path(args.out or ".")
    _write_json(out / "bounds.json", rows)
    if args.sweep:
        sweep = []
        for v in args.grid:
            if args.sweep == "n":
                cur = _resized(inp, int(v), K, p)
            else:
                cur = bounds.BoundInputs(inp.n, inp.n_T, inp.n_V, inp.alpha, inp.vc, inp.M,
                                         inp.M5, float(v))
            sweep += _bound_rows(cur, K, p)
        _write_csv(out / f"bounds_sweep_{args.sweep}.csv", sweep)
    if not args.quiet:
        print(json.dumps(rows, sort_keys=True, indent=2))
    return 0


def _progress(args):
    if args.quiet:
        return None
    return lambda n, t: print(f"n={n}: {t} trials done", file=sys.stderr)


def cmd_rate(args) -> int:
    cfg = _load_config(args)
    report, trials = runner.rate_experiment(cfg, progress=_progress(args))
    out = _out(cfg)
    _write_csv(out / "rate_trials.csv", [t.to_row() for t in trials])
    _write_csv(out / "rate_plot.csv", list(report.rows))
    _write_json(out / "rate.json", {**report.to_dict(), "checks": runner.summarize_checks(trials),
                                    "config": _echo(cfg)})
    if not args.quiet:
        print(f"fitted slope {report.slope:.4f} (theory -0.5), R^2 {report.r2:.4f}")
    return _report_failures(trials)


def cmd_coverage(args) -> int:
    cfg = _load_config(args)
    rows, trials = runner.coverage_diagnostic(cfg, progress=_progress(args))
    out = _out(cfg)
    _write_csv(out / "coverage_trials.csv", [t.to_row() for t in trials])
    _write_csv(out / "coverage.csv", rows)
    _write_json(out / "coverage.json", {"label": "DIAGNOSTIC", "rows": rows,
                                        "checks": runner.summarize_checks(trials),
                                        "config": _echo(cfg)})
    return _report_failures(trials)


def cmd_ztail(args) -> int:
    cfg = _load_config(args)
    reports = runner.z_tail_check(cfg)
    out = _out(cfg)
    rows = [{"n": r.n, **row} for r in reports for row in r.rows]
    _write_csv(out / "ztail.csv", rows)
    _write_json(out / "ztail.json", {"reports": [r.to_dict() for r in reports],
                                     "config": _echo(cfg)})
    if not args.quiet:
        for r in reports:
            print(f"n={r.n}: mean Z {r.mean_z:.4f}, dominated={r.dominated}")
    # dominance is a statistical expectation, not a hard assertion
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(args.seed, args.identity_trials, args.oracle_instances)
    out = Path(args.out or ".")
    _write_json(out / "verify.json", [r.to_dict() for r in results])
    for r in results:
        if not args.quiet or not r.ok:
            print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.cases} cases, "
                  f"{len(r.failures)} failures")
    return 0 if all(r.ok for r in results) else 1


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailcv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config JSON")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (value parsed as JSON)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--quiet", action="store_true")

    for name, fn, help_ in [("generate", cmd_generate, "sample one dataset to CSV + sidecar"),
                            ("masks", cmd_masks, "build and save one mask sequence"),
                            ("cv", cmd_cv, "one trial: CV estimate and error decomposition")]:
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--n", type=int, help="sample size (default: first of n_grid)")
        p.add_argument("--trial", type=int, default=0)
        p.set_defaults(func=fn)

    p = sub.add_parser("bounds", help="evaluate bound radii")
    common(p, config_required=False)
    p.add_argument("--inputs", help="JSON file with bound inputs")
    for key, typ in [("n", int), ("n_T", int), ("n_V", int), ("alpha", float), ("vc", float),
                     ("M", float), ("M5", float), ("delta", float), ("K", int), ("p", int)]:
        p.add_argument(f"--{key.replace('_', '-')}", dest="b_" + key, type=typ)
    p.add_argument("--sweep", choices=("n", "delta"))
    p.add_argument("--grid", type=float, nargs="+", default=[])
    p.set_defaults(func=cmd_bounds)

    for name, fn, help_ in [("rate", cmd_rate, "deviation-vs-k rate experiment"),
                            ("coverage", cmd_coverage, "DIAGNOSTIC coverage table"),
                            ("ztail", cmd_ztail, "empirical tail of Z vs Bernstein envelope")]:
        p = sub.add_parser(name, help=help_)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="run the exact-identity, mask and oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity-trials", type=int, default=1000)
    p.add_argument("--oracle-instances", type=int, default=200)
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
