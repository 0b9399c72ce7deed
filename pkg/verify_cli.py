"""
Verify CLI - command-line front end for the submersion lab

Usage:
    python verify_cli.py verify --bundle hyperbolic:n=3 --suites cshd,torsion --output report.json
    python verify_cli.py verify --config configs/example_suite.json --workers 8
    python verify_cli.py geodesic --bundle hyperbolic:n=2 --p0 0,2 --v0 1,0 --output out/semicircle
    python verify_cli.py lift --bundle warped_line:psi=x --p0 0.5,0 --base-v0 1 --output out/lift
    python verify_cli.py list-bundles

Exit codes: 0 all identities pass, 1 an identity failed, 2 configuration
error, 3 numerical breakdown (domain exit, singular matrix, ...).
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from loguru import logger

from chart_core import ConfigError, GeometryError, IntegrationError
from gallery import BUNDLE_FACTORIES, BUNDLE_DESCRIPTIONS, build_bundle, resolve_bundle
from geodesic_lab import (
    CurveRecord,
    geodesic_defect,
    geodesic_ivp,
    lift_geodesic_check,
    project_curve,
    projection_audit,
)
import settings
from settings import SuiteConfig, load_suite_config
import suite_runner
from suite_runner import EXIT_CONFIG_ERROR, EXIT_IDENTITY_FAILURE, EXIT_NUMERICAL_BREAKDOWN, EXIT_OK
import identity_registry


def _banner(title: str, lines: Dict[str, object]) -> None:
    print(f"\n{'='*60}")
    print(title)
    print(f"{'='*60}")
    for key, value in lines.items():
        print(f"{key}: {value}")
    print(f"{'='*60}\n")


def _vector(text: Optional[str], name: str) -> Optional[np.ndarray]:
    if text is None:
        return None
    try:
        return np.array([float(v) for v in text.split(',') if v.strip()], dtype=float)
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _tolerance_overrides(items: Optional[List[str]]) -> Dict[str, float]:
    overrides = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"--tolerance expects identity=value, got {item!r}")
        try:
            overrides[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--tolerance value for {key} is not a number: {value!r}") from None
    return overrides


def _write_json(path: Path, payload: Dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


#%% verify

def _suite_config(args) -> SuiteConfig:
    if args.config:
        config = load_suite_config(args.config)
    elif args.bundle:
        config = SuiteConfig(bundle=args.bundle)
    else:
        raise ConfigError("verify needs --bundle or --config")
    suites = None if args.suites is None else [s.strip() for s in args.suites.split(',') if s.strip()]
    tolerances = dict(config.tolerances, **_tolerance_overrides(args.tolerance)) if args.tolerance else None
    return config.merged(bundle=args.bundle, suites=suites, points=args.points, fd_step=args.fd_step,
                         tolerances=tolerances, seed=args.seed, output=args.output, workers=args.workers)


def print_summary(outcome: suite_runner.SuiteOutcome) -> None:
    """Per-identity verdicts in the console summary block."""
    summary = suite_runner.summarize(outcome.reports)
    print("\n" + "="*60)
    print("Verification Summary")
    print("="*60)
    for row in summary.itertuples(index=False):
        checked = row.checks - row.inapplicable
        if checked == 0:
            mark = "➖"
        elif row.passed == checked:
            mark = "✅"
        else:
            mark = "⚠️ " if row.exploratory else "❌"
        tag = " (exploratory)" if row.exploratory else ""
        print(f"{mark} {row.identity_id:<24} max {row.max_residual:.3e}  tol {row.tolerance:.1e}  "
              f"{row.passed}/{checked} passed{tag}")
    if outcome.failures:
        print(f"\n❌ Numerical breakdowns: {len(outcome.failures)}")
        for f in outcome.failures:
            print(f"   • {f.suite} / {f.task}: {f.error}: {f.message} at {f.point}")
    if outcome.failing_identities:
        print(f"\n❌ Failing identities: {', '.join(outcome.failing_identities)}")
    print()


def cmd_verify(args) -> int:
    config = _suite_config(args)
    bundle = resolve_bundle(config.bundle)
    _banner("Identity Verification", {
        'Bundle': bundle.spec,
        'Suites': ', '.join(config.suites),
        'Points': config.points,
        'FD step': config.fd_step,
        'Seed': config.seed,
        'Workers': config.workers,
    })

    def progress(done, total, task):
        print(f"[{done}/{total}] {task.suite}: {task.label}")

    outcome = suite_runner.run_suites(bundle, config, progress=progress)
    print_summary(outcome)
    output = Path(config.output)
    _write_json(output, suite_runner.build_report_payload(bundle, config, outcome))
    print(f"📊 Report saved to: {output}")
    return outcome.exit_code


#%% geodesic

def cmd_geodesic(args) -> int:
    bundle = resolve_bundle(args.bundle)
    S = bundle.S
    p0, v0 = _vector(args.p0, 'p0'), _vector(args.v0, 'v0')
    if p0 is None or v0 is None or len(p0) != S.n or len(v0) != S.n:
        raise ConfigError(f"--p0 and --v0 need {S.n} coordinates for {bundle.spec}")
    h = args.fd_step or settings.get_default_fd_step()
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _banner("Geodesic Projection", {'Bundle': bundle.spec, 'p0': p0.tolist(), 'v0': v0.tolist(),
                                    'Steps': args.steps, 't_end': args.t_end})

    energy = S.g_m if suite_runner.metric_compatible(bundle) else None
    try:
        curve = geodesic_ivp(bundle.conn_m, p0, v0, args.t_end, args.steps, domain=S.source.domain,
                             energy_metric=energy)
    except IntegrationError as e:
        if e.partial is not None:
            e.partial.to_csv(f"{prefix}.partial.csv")
            print(f"❌ {e}; partial curve ({len(e.partial)} samples) saved to {prefix}.partial.csv")
        raise

    overrides = _tolerance_overrides(args.tolerance)
    samples = range(2, len(curve) - 2)
    reports, summary = projection_audit(S, bundle.conn_m, bundle.conn_b, bundle.phi, curve, samples, h, overrides)
    curve.to_csv(f"{prefix}.csv")
    project_curve(S, curve).to_csv(f"{prefix}_base.csv")
    pd.DataFrame({
        't': curve.times[list(samples)],
        'condition_residual': [r.residual_norm for r in reports],
        'projected_defect': [r.details['projected_defect'] for r in reports],
        'vertical_speed': [r.details['vertical_speed'] for r in reports],
    }).to_csv(f"{prefix}_projection.csv", index=False, float_format="%.17g")

    tol = identity_registry.get_tolerance('projection_condition', overrides)
    condition_holds = bool(summary.details['max_condition'] <= tol)
    measured_geodesic = bool(summary.details['max_projected_defect'] <= tol)
    _write_json(Path(f"{prefix}.json"), {
        'bundle': bundle.manifest(),
        'geodesic_defect': f"{geodesic_defect(bundle.conn_m, curve):.16e}",
        'projection_equivalence': summary.to_dict(),
        'verdict': {'condition_holds': condition_holds, 'projection_is_geodesic': measured_geodesic},
    })
    print(f"projection geodesic: {'yes' if condition_holds else 'no'}")
    if condition_holds != measured_geodesic:
        print(f"❌ condition and measured sigma_*'' disagree ({summary.residual_norm:.0f} samples)")
    print(f"✅ Saved to: {prefix}.csv, {prefix}_base.csv, {prefix}_projection.csv, {prefix}.json")
    return EXIT_OK if summary.passed else EXIT_IDENTITY_FAILURE


#%% lift

def _base_curve(args, bundle) -> CurveRecord:
    S = bundle.S
    if args.curve:
        try:
            if Path(args.curve).suffix.lower() == ".json":
                return CurveRecord.from_json(args.curve, S.target.chart_id)
            return CurveRecord.from_csv(args.curve, S.target.chart_id)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read base curve {args.curve}: {e}") from e
    w0 = _vector(args.base_v0, 'base-v0')
    if w0 is None or len(w0) != S.m:
        raise ConfigError(f"lift needs --curve or --base-v0 with {S.m} components")
    b0 = _vector(args.base_p0, 'base-p0')
    b0 = S.project(_vector(args.p0, 'p0')) if b0 is None else b0
    energy = S.g_b if suite_runner.metric_compatible(bundle, base=True) else None
    return geodesic_ivp(bundle.conn_b, b0, w0, args.t_end, args.steps, domain=S.target.domain,
                        energy_metric=energy)


def cmd_lift(args) -> int:
    bundle = resolve_bundle(args.bundle)
    S = bundle.S
    p0 = _vector(args.p0, 'p0')
    if p0 is None or len(p0) != S.n:
        raise ConfigError(f"--p0 needs {S.n} coordinates for {bundle.spec}")
    h = args.fd_step or settings.get_default_fd_step()
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    alpha = _base_curve(args, bundle)
    _banner("Horizontal Lift", {'Bundle': bundle.spec, 'p0': p0.tolist(), 'Base samples': len(alpha)})

    report, lift = lift_geodesic_check(S, bundle.conn_m, bundle.conn_b, bundle.phi, alpha, p0, h=h,
                                       overrides=_tolerance_overrides(args.tolerance))
    lift.to_csv(f"{prefix}.csv")
    alpha.to_csv(f"{prefix}_base.csv")
    _write_json(Path(f"{prefix}.json"), {'bundle': bundle.manifest(), 'lift_equivalence': report.to_dict()})

    if report.status != "ok":
        print(f"➖ {report.note}")
        code = EXIT_OK
    elif report.passed:
        d = report.details
        print(f"✅ verdicts agree: lift geodesic {'yes' if d['lift_is_geodesic'] else 'no'}, "
              f"condition {'holds' if d['condition_holds'] else 'fails'}")
        code = EXIT_OK
    else:
        print("❌ lift geodesic defect and the conformal condition disagree")
        code = EXIT_IDENTITY_FAILURE
    print(f"   drift {report.details['drift']:.3e}, A_ZZ {report.details['A_ZZ']:.3e}")
    print(f"✅ Saved to: {prefix}.csv, {prefix}_base.csv, {prefix}.json")
    return code


#%% list-bundles

def cmd_list_bundles(args) -> int:
    print(f"\n{'='*60}")
    print("Available Bundles")
    print(f"{'='*60}")
    for name in BUNDLE_FACTORIES:
        manifest = build_bundle(name).manifest()
        claims = ', '.join(k for k, v in manifest['claims'].items() if v)
        print(f"• {manifest['spec']}")
        print(f"    {BUNDLE_DESCRIPTIONS.get(name, '')}")
        print(f"    dims {manifest['dims']['total']} -> {manifest['dims']['base']}; claims: {claims}")
    print("\nModifiers: perturb=<seed> (symmetric non-Levi-Civita nabla), broken=<delta> (CSHD violated)")
    return EXIT_OK


#%% Parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fd-step", type=float, default=None, help="Finite-difference step (default: GEOLAB_FD_STEP or 1e-4)")
    p.add_argument("--tolerance", action="append", metavar="ID=VALUE",
                   help="Override an identity tolerance (repeatable)")
    p.add_argument("--log-level", type=str, default=None, help="Log level for stderr (default: GEOLAB_LOG_LEVEL)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Numerical checks for conformal submersions with horizontal distribution")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("verify", help="Run identity suites on a bundle")
    p.add_argument("--config", type=str, help="Path to a suite_config.v1 JSON file")
    p.add_argument("--bundle", "-b", type=str, help='Bundle spec (e.g., "hyperbolic:n=3") or manifest path')
    p.add_argument("--suites", "-s", type=str, help="Comma-separated suites (default: all)")
    p.add_argument("--points", type=int, default=None, help="Sample points per suite (default: 10)")
    p.add_argument("--seed", type=int, default=None, help="Seed for points and test fields (default: 0)")
    p.add_argument("--workers", type=int, default=None, help="Worker threads (default: GEOLAB_WORKERS or 4)")
    p.add_argument("--output", "-o", type=str, default=None, help="Report path (default: report.json)")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("geodesic", help="Integrate a geodesic and check its projection")
    p.add_argument("--bundle", "-b", type=str, required=True)
    p.add_argument("--p0", type=str, required=True, help="Start point, comma-separated")
    p.add_argument("--v0", type=str, required=True, help="Start velocity, comma-separated")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--output", "-o", type=str, default="geodesic", help="Output path prefix")
    _add_common(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("lift", help="Lift a base curve horizontally and check the lift criterion")
    p.add_argument("--bundle", "-b", type=str, required=True)
    p.add_argument("--p0", type=str, required=True, help="Start point of the lift on M")
    p.add_argument("--curve", type=str, help="Base curve CSV (t, x1.., v1..) or JSON written by CurveRecord.to_json")
    p.add_argument("--base-p0", type=str, help="Base geodesic start (default: pi(p0))")
    p.add_argument("--base-v0", type=str, help="Base geodesic velocity")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--output", "-o", type=str, default="lift", help="Output path prefix")
    _add_common(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("list-bundles", help="List built-in bundles")
    p.add_argument("--log-level", type=str, default=None)
    p.set_defaults(func=cmd_list_bundles)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        settings.configure_logging(args.log_level)
        return args.func(args)
    except ConfigError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except GeometryError as e:
        point = None if e.point is None else np.asarray(e.point, dtype=float).ravel().tolist()
        print(f"❌ {type(e).__name__}: {e} at {point}", file=sys.stderr)
        logger.opt(exception=e).debug("numerical breakdown")
        return EXIT_NUMERICAL_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
