"""Command-line front end: sense, region, sweep, validate."""

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import default_delta_grid, region_sweep
from .config import REPORT_STREAM, RunConfig
from .sensing import FusionRule, SensingDesign, detection_probs, fuse_decisions, per_su_probs, threshold_for_pf

log = logging.getLogger("effcap")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3

REGION_COLUMNS = [
    "sweep_axis", "sweep_value", "strategy", "rule", "delta", "c1", "c2", "c1_indep", "c2_indep",
    "se1", "se2", "gamma1", "gamma2", "iterations", "residual1", "residual2", "error",
    "snr_db", "beta", "theta1", "theta2", "rho", "bandwidth", "frame_duration", "sense_duration",
    "threshold", "per_su_pf", "per_su_pd", "fused_pf", "fused_pd", "mean_z1", "mean_z2",
    "estimator", "samples", "seed",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "name"):
        return v.name.lower()
    return "" if v is None else str(v)


def _csv_text(columns, rows, meta):
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _json_text(columns, rows, meta):
    clean = lambda v: None if isinstance(v, float) and not math.isfinite(v) else (
        v.name.lower() if hasattr(v, "name") else v)
    doc = {"metadata": meta, "columns": columns,
           "rows": [{c: clean(r[c]) for c in columns} for r in rows]}
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def emit(columns, rows, meta, cfg, path=None):
    text = (_json_text if cfg.format == "json" else _csv_text)(columns, rows, meta)
    path = path or cfg.out
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
        log.info("wrote %s", path)


def _meta(cfg, command):
    return {"tool": f"effcap {__version__}", "command": command, "config_hash": cfg.digest(),
            "seed": cfg.seed}


# -- commands -------------------------------------------------------------

def cmd_sense(cfg, args):
    nu = cfg.sample_count
    if args.target_pf:
        lams = []
        for p in args.target_pf:
            if not 0 < p < 1:
                raise UsageError("--target-pf values must lie in (0, 1)")
            lams.append(threshold_for_pf(p, nu, cfg.noise_var))
    else:
        lo = args.lambda_min if args.lambda_min is not None else 0.5 * cfg.noise_var
        hi = args.lambda_max if args.lambda_max is not None else 1.5 * (cfg.noise_var + cfg.pu_power_var)
        if not (0 < lo < hi) or args.lambda_steps < 2:
            raise UsageError("need 0 < lambda-min < lambda-max and lambda-steps >= 2")
        lams = list(np.linspace(lo, hi, args.lambda_steps))
    columns = ["threshold", "sample_count", "beta", "per_su_pf", "per_su_pd"]
    for r in FusionRule:
        columns += [f"{r.name.lower()}_pf", f"{r.name.lower()}_pd"]
    rows = []
    for lam in lams:
        design = SensingDesign(float(lam), nu, FusionRule.MAJORITY, cfg.noise_var, cfg.pu_power_var)
        pf, pd = per_su_probs(design)
        row = {"threshold": float(lam), "sample_count": nu, "beta": cfg.beta,
               "per_su_pf": pf, "per_su_pd": pd}
        for r in FusionRule:
            fpf, fpd = fuse_decisions(r, pf, pd)
            row[f"{r.name.lower()}_pf"], row[f"{r.name.lower()}_pd"] = fpf, fpd
        rows.append(row)
    emit(columns, rows, _meta(cfg, "sense"), cfg)
    return EXIT_OK


def region_rows(cfg):
    """All output rows for the configured sweep, strategies and rules."""
    rows = []
    grid = default_delta_grid(cfg.delta_steps)
    est = cfg.make_estimator()
    report = cfg.make_estimator(REPORT_STREAM) if cfg.estimator == "mc" else None
    for strategy in cfg.strategies():
        for rule in cfg.rules():
            for value, point_cfg in cfg.sweep_points():
                params, qos = point_cfg.system_params(), point_cfg.qos()
                det = point_cfg.detection(rule)
                scen = point_cfg.scenarios(det)
                log.info("region %s %s %s=%s", strategy.name, rule.name, cfg.sweep, value)
                res = region_sweep(grid, strategy, est, params, qos, det, scen, rule=rule,
                                   report_estimator=report, tol=cfg.tol, workers=cfg.workers)
                for p in res.points:
                    rows.append({
                        "sweep_axis": cfg.sweep, "sweep_value": value, "strategy": strategy.value,
                        "rule": rule, "delta": p.delta, "c1": p.c1, "c2": p.c2,
                        "c1_indep": p.c1_indep, "c2_indep": p.c2_indep, "se1": p.se1, "se2": p.se2,
                        "gamma1": p.gamma1, "gamma2": p.gamma2, "iterations": p.iterations,
                        "residual1": p.residual1, "residual2": p.residual2, "error": p.error,
                        "snr_db": point_cfg.snr_db, "beta": point_cfg.beta,
                        "theta1": point_cfg.theta1, "theta2": point_cfg.theta2,
                        "rho": point_cfg.rho, "bandwidth": point_cfg.bandwidth,
                        "frame_duration": point_cfg.frame_duration,
                        "sense_duration": point_cfg.sense_duration,
                        "threshold": point_cfg.threshold_value(), "per_su_pf": det.per_su_pf,
                        "per_su_pd": det.per_su_pd, "fused_pf": det.fused_pf,
                        "fused_pd": det.fused_pd, "mean_z1": point_cfg.mean_z1,
                        "mean_z2": point_cfg.mean_z2, "estimator": point_cfg.estimator,
                        "samples": point_cfg.samples, "seed": point_cfg.seed,
                    })
    return rows


def _combo_path(out, strategy, rule):
    p = Path(out)
    return p.with_name(f"{p.stem}_s{strategy}_{rule.name.lower()}{p.suffix}")


def cmd_region(cfg, args):
    rows = region_rows(cfg)
    meta = _meta(cfg, args.command)
    combos = sorted({(r["strategy"], r["rule"].value) for r in rows})
    if cfg.out is not None and len(combos) > 1:
        for s, rv in combos:
            rule = FusionRule(rv)
            sub = [r for r in rows if r["strategy"] == s and r["rule"] is rule]
            emit(REGION_COLUMNS, sub, meta, cfg, path=_combo_path(cfg.out, s, rule))
    emit(REGION_COLUMNS, rows, meta, cfg)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        log.error("solver failure at delta=%s (%s): %s", r["delta"], r["strategy"], r["error"])
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_validate(cfg, args):
    from .oracles import run_validation

    report = run_validation(cfg, kkt_states=args.kkt_states)
    text = report.to_text()
    if cfg.format == "json":
        text = report.to_json()
    if cfg.out:
        Path(cfg.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.summary:
        Path(args.summary).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_VALIDATION


# -- argument handling ----------------------------------------------------

_FLAG_KEYS = {
    "snr_db": "snr_db", "theta1": "theta1", "theta2": "theta2", "beta": "beta",
    "samples": "samples", "seed": "seed", "out": "out", "format": "format", "rule": "rule",
    "strategy": "strategy", "delta_steps": "delta_steps", "workers": "workers",
    "estimator": "estimator", "rho": "rho", "pf": "target_pf", "threshold": "threshold",
    "tol": "tol", "frames": "frames",
}


def build_parser():
    keys = ", ".join(RunConfig.keys())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"key = value file; keys: {keys}")
    common.add_argument("--strategy", choices=["1", "2", "both"])
    common.add_argument("--rule", choices=["or", "majority", "and", "all"])
    common.add_argument("--delta-steps", type=int)
    common.add_argument("--snr-db", type=float, nargs="+", metavar="DB",
                        help="one value, or several to sweep SNR")
    common.add_argument("--theta1", type=float)
    common.add_argument("--theta2", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--pf", type=float, help="per-sensor false-alarm target used to set the threshold")
    common.add_argument("--threshold", type=float, help="explicit detection threshold")
    common.add_argument("--samples", type=int, help="Monte Carlo fading samples")
    common.add_argument("--estimator", choices=["mc", "quadrature"])
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--frames", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--sweep", nargs="+", metavar="AXIS_OR_VALUE",
                        help="axis (snr, theta, beta) followed by its values")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="effcap", description="Effective-capacity regions of a cognitive radio "
                                           "broadcast channel with cooperative sensing.")
    p.add_argument("--version", action="version", version=f"effcap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("sense", parents=[common], help="detection probabilities vs threshold")
    s.add_argument("--target-pf", type=float, nargs="+")
    s.add_argument("--lambda-min", type=float)
    s.add_argument("--lambda-max", type=float)
    s.add_argument("--lambda-steps", type=int, default=21)
    sub.add_parser("region", parents=[common], help="effective-capacity region over delta")
    sub.add_parser("sweep", parents=[common], help="regions across a swept parameter")
    v = sub.add_parser("validate", parents=[common], help="run the oracle validation suite")
    v.add_argument("--kkt-states", type=int, default=1000)
    v.add_argument("--summary", help="also write the machine-readable JSON summary here")
    return p


def config_from_args(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    over = {}
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            over[key] = val
    snr = over.pop("snr_db", None)
    if snr is not None:
        if len(snr) == 1:
            over["snr_db"] = snr[0]
        else:
            over["sweep"], over["sweep_values"] = "snr", tuple(snr)
    if args.sweep:
        axis, *vals = args.sweep
        if axis not in ("snr", "theta", "beta"):
            raise UsageError(f"unknown sweep axis {axis!r}")
        try:
            over["sweep"], over["sweep_values"] = axis, tuple(float(v) for v in vals)
        except ValueError:
            raise UsageError("sweep values must be numbers") from None
    cfg = cfg.updated(over)
    if args.command == "sweep" and (cfg.sweep == "none" or not cfg.sweep_values):
        raise UsageError("sweep needs --sweep AXIS VALUES... (or sweep/sweep_values in the config)")
    if cfg.sweep != "none" and not cfg.sweep_values:
        raise UsageError("sweep axis given without values")
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        handler = {"sense": cmd_sense, "region": cmd_region, "sweep": cmd_region,
                   "validate": cmd_validate}[args.command]
        return handler(cfg, args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"effcap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
