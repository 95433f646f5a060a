"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 solver abort, 4 partial sweep.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import harness, scales
from .config import load_config
from .errors import DomainError

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_PARTIAL = 0, 2, 3, 4


def _parse_overrides(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"override {item!r} must look like name=value")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise DomainError(f"override {key!r} needs a number, got {value!r}") from None
    return out


def _config(args, **extra):
    variant = getattr(args, "init_variant", None)
    return load_config(args.config, output_dir=args.out, init_variant=variant, **extra)


def cmd_scales(args):
    reg = scales.Regime.parse(args.regime, args.weather)
    groups = harness.scales_report(reg, _parse_overrides(args.set))
    text = scales.format_text(groups)
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stem = f"scales-{reg.kind.value}-{reg.weather.value}"
        with open(os.path.join(args.out, stem + ".txt"), "w") as fh:
            fh.write(text)
        with open(os.path.join(args.out, stem + ".csv"), "w") as fh:
            fh.write(scales.format_csv(groups))
    return EXIT_OK


def cmd_run_full(args):
    cfg = _config(args)
    if args.eps is not None:
        eps = args.eps
    elif len(cfg.eps) == 1:
        eps = cfg.eps[0]
    else:
        raise DomainError("run-full needs a single eps: pass --eps or give a one-element list")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    path, result = harness.run_full(cfg, eps)
    print(f"{path}: {result.steps} steps, sup h4 = {result.summary()['h4_sup']:.6g}")
    if result.aborted:
        print(f"aborted: {result.message}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_run_limit(args):
    cfg = _config(args)
    if args.manufactured:
        path, rows = harness.run_manufactured(cfg)
        for r in rows:
            print(f"n={r['n']:4d}  error={r['error']:.3e}")
        print(path)
        return EXIT_OK
    variant = "curl" if cfg.init_variant == "both" else cfg.init_variant
    path, result = harness.run_limit(cfg, variant)
    s = result.summary()
    print(f"{path}: {result.steps} steps, max constraint residual = {s['max_constraint_residual']:.3g}")
    if result.aborted:
        print(f"aborted: {result.message}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_compare(args):
    cfg = _config(args)
    path, report = harness.compare(cfg)
    for variant, r in report["variants"].items():
        print(f"[{variant}]")
        for eps, errs in zip(report["eps"], r["relative_errors"]):
            cells = "failed" if errs is None else "  ".join(f"{e:.3e}" for e in errs)
            print(f"  eps={eps:.6g}  {cells}")
        print(f"  monotone: {r['monotone']}")
    print(f"best variant: {report['best_variant']}")
    print(path)
    return EXIT_OK if report["complete"] else EXIT_PARTIAL


def cmd_residual(args):
    cfg = _config(args)
    reg = scales.Regime.parse(args.regime, args.weather)
    groups, rows = harness.residual_audit(reg, cfg)
    text = harness.residual_csv(rows)
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"residual-{reg.kind.value}-{reg.weather.value}.csv"), "w") as fh:
            fh.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="tidal-perturbation", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, variant=True):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory")
        if variant:
            sp.add_argument("--init-variant", choices=["literal", "curl"], dest="init_variant")

    def regime_flags(sp):
        sp.add_argument("--regime", choices=[k.value for k in scales.RegimeKind], default="shelf")
        sp.add_argument("--weather", choices=[w.value for w in scales.Weather], default="calm")

    sp = sub.add_parser("scales", help="dimensionless groups and eps-power tags")
    regime_flags(sp)
    sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                    help="override a preset value (units as documented)")
    sp.add_argument("--out", help="also write text and CSV tables here")
    sp.set_defaults(func=cmd_scales)

    sp = sub.add_parser("run-full", help="integrate the eps-dependent system")
    common(sp, variant=False)
    sp.add_argument("--eps", type=float)
    sp.set_defaults(func=cmd_run_full)

    sp = sub.add_parser("run-limit", help="integrate the limit model")
    common(sp)
    sp.add_argument("--manufactured", action="store_true", help="run the manufactured-solution study")
    sp.set_defaults(func=cmd_run_limit)

    sp = sub.add_parser("compare", help="pairing convergence of the eps sweep to the limit")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("residual", help="per-term magnitudes of a regime right-hand side")
    common(sp, variant=False)
    regime_flags(sp)
    sp.set_defaults(func=cmd_residual)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
