"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data or contract error,
4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .datamodel import PREDICTORS, Subregion, load_csv, save_csv
from .errors import ConfigError, ContractError, DataError, StageError
from .pipeline import RunConfig, build_report, load_config, run_pipeline, table_rows
from .policy import rank_sites, reliability_flag
from .report import (OutputDir, dumps, figure_flags, figure_picp, figure_scatter, utc_now,
                     validate_report, write_csv)
from .shift import regional_shift, shift_report
from .synth import SynthConfig, generate

log = logging.getLogger("geoconform")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code_for(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, ContractError, OSError)):
        return EXIT_DATA
    return EXIT_INTERNAL


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.config:
        cfg = SynthConfig.from_file(args.config)
    else:
        cfg = SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    ds = generate(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    try:
        save_csv(ds, tmp)
        tmp.replace(out)
    finally:
        tmp.unlink(missing_ok=True)
    print(f"wrote {len(ds)} rows from {len(ds.by_location)} locations to {out}")
    return EXIT_OK


def _run_config(args) -> tuple[RunConfig, SynthConfig | None, dict]:
    raw, synth = {}, None
    if args.config:
        raw, run, synth = load_config(args.config)
        base = run.to_dict()
    else:
        base = RunConfig().to_dict()
    overrides = {"seed": args.seed, "folds": args.folds, "alpha": args.alpha, "cv": args.cv,
                 "conformal_mode": args.conformal_mode}
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig.from_dict(base)
    if synth is not None and args.seed is not None:
        synth = SynthConfig.from_dict({**synth.to_dict(), "seed": args.seed})
    return cfg, synth, raw


def cmd_run(args) -> int:
    cfg, synth, _ = _run_config(args)
    if args.data:
        try:
            dataset, audit = load_csv(args.data)
        except DataError as exc:
            raise StageError("audit", exc) from exc
        source = {"data": {"path": str(args.data)}}
    elif synth is not None:
        dataset = generate(synth)
        audit = None
        source = {"synth": synth.to_dict()}
    else:
        raise ConfigError("run needs --data or a config with a 'synth' section")

    result = run_pipeline(dataset, cfg, audit, source)
    report = build_report(result, utc_now())
    validate_report(report)

    with OutputDir(args.out) as out:
        out.path("report.json").write_text(dumps(report), encoding="utf-8")
        for name, (header, rows) in table_rows(result).items():
            write_csv(out.path(f"{name}.csv"), header, rows)
        cv_res = result.interval_cv()
        figure_scatter(dataset.pm25, cv_res.oof, out.path("scatter.svg"),
                       title=f"{cfg.interval_model}, {cfg.cv} CV")
        figure_picp(result.conformal.coverage, cfg.alpha, out.path("picp_by_region.svg"))
        figure_flags(result.flags, out.path("flags_by_region.svg"))

    cov = result.conformal.coverage["overall"]
    print(f"{len(dataset)} rows, {len(dataset.by_location)} locations; "
          f"overall PICP {cov.picp:.3f}, MPIW {cov.mpiw:.1f}; report in {args.out}")
    return EXIT_OK


def _features(text):
    if not text:
        return PREDICTORS
    return tuple(f.strip() for f in text.split(",") if f.strip())


def cmd_shift(args) -> int:
    features = _features(args.features)
    if args.region:
        if not args.data:
            raise ConfigError("--region needs --data")
        ds, _ = load_csv(args.data)
        try:
            region = Subregion.parse(args.region)
        except ValueError:
            raise ConfigError(f"unknown region {args.region!r}") from None
        report = regional_shift(ds, region, features)
    else:
        if not (args.train and args.test):
            raise ConfigError("shift needs --train and --test, or --data with --region")
        train, _ = load_csv(args.train)
        test, _ = load_csv(args.test)
        report = shift_report(train, test, features, label="test vs train")
    rows = [[e.feature, e.ks, e.severity.label, e.n_train, e.n_test] for e in report.entries]
    _emit_table(args.out, ["feature", "ks", "severity", "n_train", "n_test"], rows,
                report.to_dict())
    return EXIT_OK


def _read_table(path, required) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = [c for c in required if c not in cols]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        return list(reader)


def _float(row, key, path):
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise DataError(f"{path}: bad {key} value {row.get(key)!r}") from None


def cmd_flags(args) -> int:
    """Flags from a regional table with ``region, r2`` and ``mpiw`` or ``half_width``."""
    rows = _read_table(args.data, ["region", "r2"])
    out = []
    for row in rows:
        r2 = _float(row, "r2", args.data)
        if row.get("half_width") not in (None, ""):
            w = _float(row, "half_width", args.data)
        elif row.get("mpiw") not in (None, ""):
            w = _float(row, "mpiw", args.data) / 2.0
        else:
            raise DataError(f"{args.data}: row needs mpiw or half_width")
        if w < 0:
            raise DataError(f"{args.data}: negative width for {row['region']!r}")
        out.append([row["region"], r2, w, reliability_flag(r2, w).label])
    _emit_table(args.out, ["region", "r2", "half_width", "flag"], out,
                {"flags": [dict(zip(["region", "r2", "half_width", "flag"], r)) for r in out]})
    return EXIT_OK


def cmd_prioritize(args) -> int:
    rows = _read_table(args.data, ["site_id", "half_width", "pop_density"])
    sites = [(r["site_id"], _float(r, "half_width", args.data), _float(r, "pop_density", args.data))
             for r in rows]
    if any(w < 0 or rho < 0 for _, w, rho in sites):
        raise DataError(f"{args.data}: half_width and pop_density must be non-negative")
    ranked = rank_sites(sites)
    _emit_table(args.out, ["rank", "site_id", "half_width", "pop_density", "score"],
                [[s.rank, s.site_id, s.half_width, s.pop_density, s.score] for s in ranked],
                {"ranking": [s.to_dict() for s in ranked]})
    return EXIT_OK


def _emit_table(out, header, rows, doc) -> None:
    """CSV to stdout or ``out``; a ``.json`` suffix writes the JSON document instead."""
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    try:
        if out.suffix == ".json":
            tmp.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
        else:
            write_csv(tmp, header, rows)
        tmp.replace(out)
    finally:
        tmp.unlink(missing_ok=True)


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    p = argparse.ArgumentParser(prog="geoconform", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset CSV")
    s.add_argument("--config", help="JSON config (a 'synth' section or a bare synth object)")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_synth)

    r = sub.add_parser("run", parents=[common], help="full pipeline: CV, conformal, shift, flags, ranking")
    r.add_argument("--data", help="input CSV; if omitted the config's synth section is generated")
    r.add_argument("--config", help="JSON config with 'run' and/or 'synth' sections")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--folds", type=int, help="number of CV folds (default 5)")
    r.add_argument("--alpha", type=float, help="miscoverage level (default 0.1)")
    r.add_argument("--cv", choices=("spatial", "random"))
    r.add_argument("--conformal-mode", choices=("pooled", "per-region"))
    r.set_defaults(fn=cmd_run)

    sh = sub.add_parser("shift", parents=[common], help="KS covariate-shift report")
    sh.add_argument("--train")
    sh.add_argument("--test")
    sh.add_argument("--data", help="single dataset, compared region vs rest with --region")
    sh.add_argument("--region")
    sh.add_argument("--features", help="comma-separated feature names (default: all predictors)")
    sh.add_argument("--out", help="CSV or .json path (default: CSV to stdout)")
    sh.set_defaults(fn=cmd_shift)

    f = sub.add_parser("flags", parents=[common], help="reliability flags from a regional metrics CSV")
    f.add_argument("--data", required=True, help="CSV with region, r2 and mpiw or half_width")
    f.add_argument("--out")
    f.set_defaults(fn=cmd_flags)

    pr = sub.add_parser("prioritize", parents=[common], help="rank candidate monitor sites")
    pr.add_argument("--data", required=True, help="CSV with site_id, half_width, pop_density")
    pr.add_argument("--out")
    pr.set_defaults(fn=cmd_prioritize)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - mapped onto exit codes
        code = exit_code_for(exc)
        print(f"geoconform {args.command}: error: {exc}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            log.debug("internal error", exc_info=True)
        return code


if __name__ == "__main__":
    sys.exit(main())
