"""Command line driver.

Exit codes: 0 success, 1 validation error, 2 identity or acceptance
failure, 3 resolution or precision error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import PrecisionError, QuadratureError, ResolutionError, VarqError
from .martingale import random_martingale, witness_linfty
from .spaces import Space
from .variation import SamplePath, vq_dp

EXIT_OK, EXIT_VALIDATION, EXIT_FAIL, EXIT_NUMERIC = 0, 1, 2, 3


class ValidationError(Exception):
    pass


def parse_space(label: str, dim: int) -> Space:
    """'l1', 'l2', 'linf' or 'l<r>' plus a dimension."""
    label = label.strip().lower()
    if not label.startswith("l"):
        raise ValidationError(f"space must look like l1, l2, linf or l<r>, got {label!r}")
    r = label[1:]
    try:
        return Space.lr(dim, float("inf") if r == "inf" else float(r))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def parse_axis(spec: str) -> tuple[str, list[float]]:
    """'q=2,2.5,3' -> ('q', [2.0, 2.5, 3.0])."""
    name, sep, vals = spec.partition("=")
    if not sep or not vals:
        raise ValidationError(f"axis must look like name=v1,v2,..., got {spec!r}")
    try:
        values = [float(v) for v in vals.split(",")]
    except ValueError as exc:
        raise ValidationError(f"bad axis values in {spec!r}") from exc
    return name.strip(), values


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _write(rows, out: str | None):
    if out is None:
        sys.stdout.write(harness.dumps(rows, "csv"))
        return
    fmt = "json" if out.endswith(".json") else "csv"
    harness.emit(rows, out, fmt)


def _summary(rows):
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.family:22s} {r.estimate!r}")


def cmd_variation(args) -> int:
    path = SamplePath.from_dict(_load_json(args.path))
    res = vq_dp(path, args.q)
    print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = harness.ExperimentConfig.from_dict(_load_json(args.config))
    row = harness.estimate_constant(cfg.replace(kind="estimate"))
    _write([row], args.out)
    print(f"estimate {row.estimate!r} (lower-bound estimate, Richardson gap {row.diagnostic['richardson_gap']!r})",
          file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = harness.ExperimentConfig.from_dict(_load_json(args.config))
    axis, values = parse_axis(args.axis)
    if axis in ("dim", "grid"):
        values = [int(v) for v in values]
    rows = harness.sweep(cfg, axis, values)
    _write(rows, args.out)
    if args.out:
        stem = Path(args.out).with_suffix("")
        harness.emit_plot([(r.diagnostic["axis_value"], r.estimate) for r in rows], f"{stem}.tsv")
        harness.emit_plot(harness.fixed_curve(rows), f"{stem}.fixed.tsv")
    return EXIT_OK


def cmd_identities(args) -> int:
    rows = harness.identity_suite(args.seed, tamper=args.tamper, count=args.count)
    _summary(rows)
    if args.out:
        _write(rows, args.out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def cmd_cotype(args) -> int:
    space = parse_space(args.space, args.dim)
    kind = args.martingale or ("witness" if space.norm.is_inf else "random")
    row = harness.cotype_row(space, args.m, args.q, kind, args.seed)
    print(f"ratio {row.estimate!r} numerator {row.diagnostic['numerator']!r} "
          f"denominator {row.diagnostic['denominator']!r}")
    if args.out:
        _write([row], args.out)
    return EXIT_OK


def cmd_transfer(args) -> int:
    dim = args.dim or args.m
    space = parse_space(args.space, dim)
    if args.martingale == "witness":
        if not space.norm.is_inf:
            raise ValidationError("the witness martingale needs --space linf")
        M = witness_linfty(dim, args.m)
    else:
        M = random_martingale(args.seed, space, args.m)
    row = harness.transfer_row(M, args.q, args.eps, args.fejer, args.seed)
    for ln in row.results["links"]:
        status = "PASS" if ln["holds"] else "FAIL"
        print(f"{status} {ln['name']:20s} {ln['lhs']!r} vs {ln['rhs']!r} gap {ln['richardson_gap']:.2e}")
    _write([row], args.out)
    return EXIT_OK if row.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varq", description="q-variation experiments for operator families")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("variation", help="V_q of a sample path stored as JSON")
    p.add_argument("--path", required=True)
    p.add_argument("--q", type=float, required=True)
    p.set_defaults(func=cmd_variation)

    p = sub.add_parser("estimate", help="lower-bound estimate of a variational constant")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="repeat estimate along an axis (q, dim or grid)")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, help="e.g. q=2,2.5,3,4")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("identities", help="run the identity suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--tamper", action="store_true", help="corrupt the Poisson kernel (must fail)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("cotype", help="martingale cotype ratio")
    p.add_argument("--space", default="linf")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--martingale", choices=("witness", "random"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cotype)

    p = sub.add_parser("transfer", help="transference pipeline and inequality chain")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--fejer", type=int, default=31)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--space", default="linf")
    p.add_argument("--dim", type=int)
    p.add_argument("--martingale", choices=("witness", "random"), default="witness")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transfer)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except (ResolutionError, PrecisionError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, VarqError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
