"""Command line entry point: ``dsst {check,run,design-d,decode}``.

Exit codes: 0 success, 1 validation failure or refusal, 2 parse/IO error.
All reports are YAML on stdout; node ids are 1-based.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from .compress import design_compression, validate_compression
from .config import build_scenario, build_system, dump_yaml, load_config
from .decoder import error_bound_beta, ssr_decode
from .errors import BudgetExceeded, CertificationError, ConfigError, DecoderRankError, DsstError
from .sim import format_support, run_scenario, validate_scenario, write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _one_based(K):
    return None if K is None else [int(i) + 1 for i in K]


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.run["seed"] = args.seed
        if cfg.compression["mode"] == "design":
            cfg.compression["seed"] = args.seed
    return cfg


def check_report(cfg) -> tuple[dict, bool]:
    """Validator report for a parsed config and whether every check passed."""
    sc, comp_err = build_scenario(cfg)
    report = validate_scenario(sc)
    checks = []
    for c in report.checks:
        entry = {"name": c.name, "passed": bool(c.passed), "detail": c.detail}
        data = dict(c.data)
        for key in ("witness", "support"):
            if key in data:
                data[key] = _one_based(data[key])
        if data:
            entry["data"] = data
        if c.name == "compression" and comp_err and not c.passed:
            entry["detail"] = comp_err
        checks.append(entry)
    solv = report["solvability"] if "solvability" in [c.name for c in report.checks] else None
    doc = {
        "verdict": solv.detail if solv is not None else "not evaluated",
        "passed": bool(report.ok),
        "checks": checks,
    }
    return doc, report.ok


def cmd_check(args) -> int:
    cfg = _load(args)
    doc, ok = check_report(cfg)
    sys.stdout.write(dump_yaml(doc))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args) -> int:
    cfg = _load(args)
    sc, comp_err = build_scenario(cfg)
    report = validate_scenario(sc)
    if not report.ok and not args.force:
        sys.stderr.write(
            "refusing to run, failed checks: " + ", ".join(report.failures()) + " (use --force)\n"
        )
        return EXIT_FAIL
    trace = run_scenario(sc, validate=False)
    try:
        error_beta = error_bound_beta(sc.sys, sc.compression.D, sc.s)
    except DsstError as exc:
        error_beta = f"undefined: {exc}"
    summary = {
        "checks_passed": bool(report.ok),
        "failed_checks": report.failures(),
        "forced": bool(args.force and not report.ok),
        "beta": error_beta,
        **trace.summary(),
    }
    last_support = next((s for s in reversed(trace.support) if s is not None), None)
    summary["final_support"] = [format_support(K) for K in last_support] if last_support else None
    if comp_err:
        summary["notes"].append(f"compression not certified: {comp_err}")
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    write_trace_csv(trace, os.path.join(out, os.path.basename(cfg.output["trace"])))
    with open(os.path.join(out, os.path.basename(cfg.output["summary"])), "w") as fh:
        fh.write(dump_yaml(summary))
    sys.stdout.write(dump_yaml(summary))
    return EXIT_OK


def cmd_design_d(args) -> int:
    cfg = _load(args)
    sysm = build_system(cfg)
    s = cfg.security["s"]
    mode = cfg.compression["mode"]
    try:
        if mode == "design":
            comp = design_compression(
                sysm, s, seed=cfg.compression["seed"], max_tries=cfg.compression["max_tries"]
            )
        else:
            D = np.eye(sysm.p) if mode == "identity" else np.array(cfg.compression["D"])
            comp = validate_compression(sysm, D, s)
    except CertificationError as exc:
        sys.stdout.write(
            dump_yaml(
                {
                    "certified": False,
                    "reason": "compressed measurements cannot support secure tracking: " + str(exc),
                    "witness": _one_based(exc.witness),
                }
            )
        )
        return EXIT_FAIL
    except (BudgetExceeded, ValueError) as exc:
        sys.stdout.write(dump_yaml({"certified": False, "reason": str(exc)}))
        return EXIT_FAIL
    doc = {"certified": True, "s": s, "v": comp.v, "D": comp.D, "N": comp.kernel}
    try:
        doc["beta"] = error_bound_beta(sysm, comp.D, s)
    except DecoderRankError as exc:
        doc["beta"] = None
        doc["beta_error"] = str(exc)
    sys.stdout.write(dump_yaml(doc))
    return EXIT_OK


def _read_w(spec: str) -> np.ndarray:
    if os.path.exists(spec):
        with open(spec) as fh:
            data = yaml.safe_load(fh)
        if isinstance(data, dict):
            data = data.get("W")
    else:
        data = [float(v) for v in spec.replace(",", " ").split()]
    return np.asarray(data, dtype=float).ravel()


def cmd_decode(args) -> int:
    cfg = _load(args)
    sc, comp_err = build_scenario(cfg)
    if comp_err:
        sys.stderr.write(f"compression not certified: {comp_err}\n")
        return EXIT_FAIL
    try:
        W = _read_w(args.w)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read W: {exc}", "--w") from None
    try:
        res = ssr_decode(W, sc.sys, sc.compression.D, sc.s)
    except DecoderRankError as exc:
        sys.stdout.write(dump_yaml({"decoded": False, "reason": str(exc), "support": _one_based(exc.support)}))
        return EXIT_FAIL
    except ValueError as exc:
        raise ConfigError(str(exc), "--w") from None
    doc = {
        "decoded": True,
        "x_hat": res.x_hat,
        "x_hat_now": res.x_hat_now,
        "support_hat": _one_based(res.support_hat),
        "residual": res.residual,
        "residuals": [
            {"support": _one_based(K), "residual": r} for K, r in res.residuals.items()
        ],
    }
    sys.stdout.write(dump_yaml(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="scenario YAML file")
    common.add_argument("--seed", type=int, default=None, metavar="N", help="override run/design seed")

    parser = argparse.ArgumentParser(prog="dsst", description="Decentralized secure state tracking.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="run every validator on a scenario").set_defaults(func=cmd_check)
    run = sub.add_parser("run", parents=[common], help="simulate and write trace + summary")
    run.add_argument("--out", metavar="DIR", default=None, help="output directory (default: cwd)")
    run.add_argument("--force", action="store_true", help="run even when checks fail")
    run.set_defaults(func=cmd_run)
    sub.add_parser("design-d", parents=[common], help="certify or design the compression matrix").set_defaults(
        func=cmd_design_d
    )
    dec = sub.add_parser("decode", parents=[common], help="decode one tracked estimate W_i")
    dec.add_argument("--w", required=True, metavar="VALUES|PATH", help="comma-separated W_i or a YAML file")
    dec.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except BudgetExceeded as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
