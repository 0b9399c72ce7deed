"""
Suite Runner - fans identity suites out over sample points and reduces the results

A run turns a bundle and a SuiteConfig into tasks, one per (suite, point)
or (suite, point, equation), evaluates them on a thread pool and sorts the
reports so identical configs give identical output whatever the worker count.
A GeometryError inside a task is kept as a TaskFailure with the offending
point; it does not stop the other tasks.
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from chart_core import GeometryError, as_coords, coordinate_field
from connection_ops import torsion
from gallery import GeometryBundle, random_test_fields
from geodesic_lab import (
    geodesic_ivp,
    horizontal_geodesic_condition,
    horizontal_self_pairing,
    lift_geodesic_check,
    projection_audit,
    projection_condition,
    sigma_dd_residuals,
)
from settings import SuiteConfig
from submersion_core import (
    ResidualReport,
    _fmt,
    conformality_reports,
    cshd_max_defect,
    duality_proposition_check,
    fiber_connection,
    fundamental_equation_residual,
    horizontal_lift_matrix,
    induced_connection,
    make_report,
    torsion_lemma_residuals,
)
import identity_registry

REPORT_SCHEMA = "residual_report.v1"

EXIT_OK = 0
EXIT_IDENTITY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_BREAKDOWN = 3

GEODESIC_T_END = 1.0
GEODESIC_SPEED = 0.5
SIGMA_DD_SAMPLES = 5
AUDIT_STRIDE = 10


@dataclass(frozen=True)
class Task:
    suite: str
    label: str
    run: Callable[[], List[ResidualReport]]


@dataclass
class TaskFailure:
    """A task that stopped on a numerical breakdown."""
    suite: str
    task: str
    error: str
    message: str
    point: Optional[List[float]] = None

    def to_dict(self) -> Dict:
        return {'suite': self.suite, 'task': self.task, 'error': self.error, 'message': self.message,
                'point': _fmt(self.point) if self.point is not None else None}


@dataclass
class SuiteOutcome:
    reports: List[ResidualReport] = field(default_factory=list)
    failures: List[TaskFailure] = field(default_factory=list)

    @property
    def failing_identities(self) -> List[str]:
        return sorted({r.identity_id for r in self.reports if r.counts_as_failure})

    @property
    def exit_code(self) -> int:
        if self.failures:
            return EXIT_NUMERICAL_BREAKDOWN
        if self.failing_identities:
            return EXIT_IDENTITY_FAILURE
        return EXIT_OK


def _report_key(report: ResidualReport) -> Tuple:
    return report.identity_id, report.point, report.inputs


#%% Per-suite task builders

def metric_compatible(bundle: GeometryBundle, base: bool = False) -> bool:
    """Built-in connections are Levi-Civita unless a modifier replaced them."""
    if 'perturb' in bundle.params:
        return False
    return not (base and 'broken' in bundle.params)


def _torsion_free_reports(bundle: GeometryBundle, x: np.ndarray, h: float,
                          overrides: Dict[str, float]) -> List[ResidualReport]:
    """Torsion of nabla* and of the fiber connection when nabla itself is torsion-free."""
    S = bundle.S
    dom = S.source.domain
    tor_m = max(float(np.linalg.norm(torsion(bundle.conn_m, coordinate_field(S.n, i), coordinate_field(S.n, j),
                                             x, h, dom)))
                for i in range(S.n) for j in range(i + 1, S.n))
    if tor_m > identity_registry.get_tolerance('torsion_free_base', overrides):
        note = f"inapplicable: nabla has torsion (measured {tor_m:.3e})"
        return [make_report(i, x, "coordinate pairs", float('nan'), overrides, status="inapplicable", note=note)
                for i in ('torsion_free_base', 'torsion_free_fiber')]

    b = S.project(x)
    tor_b = max((float(np.linalg.norm(torsion(bundle.conn_b, coordinate_field(S.m, i), coordinate_field(S.m, j),
                                              b, h, S.target.domain)))
                 for i in range(S.m) for j in range(i + 1, S.m)), default=0.0)
    reports = [make_report('torsion_free_base', x, "base coordinate pairs", tor_b, overrides)]

    if S.vertical_coords is None:
        reports.append(make_report('torsion_free_fiber', x, "fiber coordinate pairs", float('nan'), overrides,
                                   status="inapplicable", note="fibers not parametrised by vertical coordinates"))
        return reports
    vert = list(S.vertical_coords)
    k = len(vert)
    fiber = fiber_connection(S, bundle.conn_m, b)
    tor_f = max((float(np.linalg.norm(torsion(fiber, coordinate_field(k, i), coordinate_field(k, j), x[vert], h)))
                 for i in range(k) for j in range(i + 1, k)), default=0.0)
    reports.append(make_report('torsion_free_fiber', x, "fiber coordinate pairs", tor_f, overrides))
    return reports


def _initial_conditions(bundle: GeometryBundle, config: SuiteConfig, dim: int, on_base: bool):
    """Seeded start points and velocities (Euclidean norm GEODESIC_SPEED) for the curve suites."""
    starts = bundle.sample_points(config.geodesics, config.seed + 1)
    out = []
    for k, p0 in enumerate(starts):
        rng = np.random.default_rng([config.seed, k, int(on_base)])
        v0 = rng.normal(size=dim)
        out.append((p0, GEODESIC_SPEED * v0 / np.linalg.norm(v0)))
    return out


def _geodesic_reports(bundle: GeometryBundle, config: SuiteConfig, p0, v0) -> List[ResidualReport]:
    S, h, overrides = bundle.S, config.fd_step, config.tolerances
    energy = S.g_m if metric_compatible(bundle) else None
    curve = geodesic_ivp(bundle.conn_m, p0, v0, GEODESIC_T_END, config.geodesic_steps,
                         domain=S.source.domain, energy_metric=energy)
    reports = []
    for i in np.linspace(2, len(curve) - 3, SIGMA_DD_SAMPLES).astype(int):
        reports.extend(sigma_dd_residuals(S, bundle.conn_m, bundle.conn_b, bundle.phi, curve, int(i), h,
                                          overrides=overrides))
    _, summary = projection_audit(S, bundle.conn_m, bundle.conn_b, bundle.phi, curve,
                                  range(2, len(curve) - 2, AUDIT_STRIDE), h, overrides)
    reports.append(summary)
    return reports


def _horizontal_geodesic_report(bundle: GeometryBundle, config: SuiteConfig, p0, w0) -> List[ResidualReport]:
    """
    Horizontal geodesic from p0 with pi_* sigma'(0) = w0; the reduced condition
    must equal the measured ||sigma_*''|| at the middle sample
    """
    S, h, overrides = bundle.S, config.fd_step, config.tolerances
    a_zz = horizontal_self_pairing(S, bundle.conn_m, p0, h)
    if a_zz > identity_registry.get_tolerance('lift_hypothesis', overrides):
        return [make_report('horizontal_geodesic', p0, "horizontal geodesic", float('nan'), overrides,
                            status="inapplicable",
                            note=f"inapplicable: A_ZZ != 0 (measured {a_zz:.3e}), geodesics leave H")]
    v0 = horizontal_lift_matrix(S, p0) @ w0
    energy = S.g_m if metric_compatible(bundle) else None
    curve = geodesic_ivp(bundle.conn_m, p0, v0, GEODESIC_T_END, config.geodesic_steps,
                         domain=S.source.domain, energy_metric=energy)
    i = len(curve) // 2
    reduced = horizontal_geodesic_condition(S, bundle.conn_m, bundle.phi, curve, i, h, overrides)
    measured = projection_condition(S, bundle.conn_m, bundle.conn_b, bundle.phi, curve, i, h, overrides=overrides)
    projected = measured.details['projected_defect']
    return [make_report('horizontal_geodesic', reduced.point, reduced.inputs,
                        abs(reduced.residual_norm - projected), overrides,
                        details={'condition': reduced.residual_norm, 'projected_defect': projected})]


def _lift_reports(bundle: GeometryBundle, config: SuiteConfig, p0, w0) -> List[ResidualReport]:
    S, overrides = bundle.S, config.tolerances
    energy = S.g_b if metric_compatible(bundle, base=True) else None
    alpha = geodesic_ivp(bundle.conn_b, S.project(p0), w0, GEODESIC_T_END, config.geodesic_steps,
                         domain=S.target.domain, energy_metric=energy)
    report, lift = lift_geodesic_check(S, bundle.conn_m, bundle.conn_b, bundle.phi, alpha, p0,
                                       h=config.fd_step, overrides=overrides)
    drift = make_report('lift_drift', p0, report.inputs, report.details['drift'], overrides)
    return [report, drift]


def build_tasks(bundle: GeometryBundle, config: SuiteConfig) -> List[Task]:
    """Expand the configured suites into independent tasks."""
    S, h, overrides = bundle.S, config.fd_step, config.tolerances
    conn, conn_b, phi = bundle.conn_m, bundle.conn_b, bundle.phi
    points = [as_coords(x) for x in bundle.sample_points(config.points, config.seed)]
    tasks: List[Task] = []

    def add(suite, label, fn):
        tasks.append(Task(suite, label, fn))

    for suite in config.suites:
        if suite == 'conformality':
            for k, x in enumerate(points):
                add(suite, f"point {k}", lambda x=x: conformality_reports(S, phi, x, overrides))
        elif suite == 'cshd':
            for k, x in enumerate(points):
                add(suite, f"point {k}", lambda x=x: [make_report(
                    'cshd', x, "base coordinate pairs", cshd_max_defect(S, conn, conn_b, phi, x, h=h), overrides)])
            add(suite, "induced connection",
                lambda: [induced_connection(S, conn, phi, strict=False, h=h,
                                            tolerance=identity_registry.get_tolerance('induced_projectability',
                                                                                      overrides))[1]])
        elif suite == 'torsion':
            for k, x in enumerate(points):
                add(suite, f"point {k}", lambda x=x: list(torsion_lemma_residuals(S, conn, conn_b, phi, x, h, overrides))
                    + _torsion_free_reports(bundle, x, h, overrides))
        elif suite == 'duality':
            for k, x in enumerate(points):
                add(suite, f"point {k}",
                    lambda x=x: list(duality_proposition_check(S, conn, conn_b, phi, [x], h=h, overrides=overrides)))
        elif suite == 'fundamental':
            for k, x in enumerate(points):
                fields = random_test_fields(bundle, config.seed * 1000 + k)
                for eq_id in identity_registry.FUNDAMENTAL_EQUATIONS:
                    add(suite, f"point {k} {eq_id}",
                        lambda x=x, eq_id=eq_id, fields=fields: [fundamental_equation_residual(
                            S, conn, eq_id, fields, x, h, overrides)])
        elif suite == 'geodesic':
            for k, (p0, v0) in enumerate(_initial_conditions(bundle, config, S.n, on_base=False)):
                add(suite, f"geodesic {k}", lambda p0=p0, v0=v0: _geodesic_reports(bundle, config, p0, v0))
            for k, (p0, w0) in enumerate(_initial_conditions(bundle, config, S.m, on_base=True)):
                add(suite, f"horizontal geodesic {k}",
                    lambda p0=p0, w0=w0: _horizontal_geodesic_report(bundle, config, p0, w0))
        elif suite == 'lift':
            for k, (p0, w0) in enumerate(_initial_conditions(bundle, config, S.m, on_base=True)):
                add(suite, f"lift {k}", lambda p0=p0, w0=w0: _lift_reports(bundle, config, p0, w0))
    return tasks


#%% Execution

def _run_task(task: Task) -> Tuple[List[ResidualReport], Optional[TaskFailure]]:
    try:
        return task.run(), None
    except GeometryError as e:
        point = None if e.point is None else np.asarray(e.point, dtype=float).ravel().tolist()
        logger.warning("{} / {}: {} at {}", task.suite, task.label, e, point)
        return [], TaskFailure(task.suite, task.label, type(e).__name__, str(e), point)


def run_suites(bundle: GeometryBundle, config: SuiteConfig,
               progress: Optional[Callable[[int, int, Task], None]] = None) -> SuiteOutcome:
    """
    Evaluate every configured suite on a bundle

    Args:
        bundle: geometry to check
        config: suites, point count, step, tolerances, seed and worker count
        progress: optional callback (done, total, task) for console progress

    Returns:
        SuiteOutcome with sorted reports and any numerical breakdowns
    """
    tasks = build_tasks(bundle, config)
    logger.info("{}: {} tasks over suites {} on {} workers", bundle.spec, len(tasks), config.suites, config.workers)
    outcome = SuiteOutcome()

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = {executor.submit(_run_task, task): task for task in tasks}
        for done, future in enumerate(as_completed(futures), 1):
            reports, failure = future.result()
            outcome.reports.extend(reports)
            if failure is not None:
                outcome.failures.append(failure)
            if progress is not None:
                progress(done, len(tasks), futures[future])

    outcome.reports.sort(key=_report_key)
    outcome.failures.sort(key=lambda f: (f.suite, f.task))
    return outcome


#%% Reduction and report payload

def summarize(reports: Sequence[ResidualReport]) -> pd.DataFrame:
    """Max residual and pass counts per identity."""
    columns = ['identity_id', 'suite', 'exploratory', 'tolerance', 'max_residual', 'checks', 'passed',
               'inapplicable']
    if not reports:
        return pd.DataFrame(columns=columns)
    df = pd.DataFrame([{
        'identity_id': r.identity_id,
        'suite': identity_registry.suite_of(r.identity_id),
        'exploratory': r.exploratory,
        'tolerance': r.tolerance,
        'residual': r.residual_norm,
        'passed': r.passed and r.status == "ok",
        'inapplicable': r.status != "ok",
    } for r in reports])
    summary = df.groupby('identity_id', sort=True).agg(
        suite=('suite', 'first'),
        exploratory=('exploratory', 'first'),
        tolerance=('tolerance', 'max'),
        max_residual=('residual', 'max'),
        checks=('residual', 'size'),
        passed=('passed', 'sum'),
        inapplicable=('inapplicable', 'sum'),
    ).reset_index()
    return summary[columns]


def environment_echo(config: SuiteConfig) -> Dict:
    """Run parameters that determine the report (the worker count does not)."""
    ids = [i for suite in config.suites for i in identity_registry.identities_for_suite(suite)]
    return {
        'suites': list(config.suites),
        'points': config.points,
        'fd_step': _fmt(config.fd_step),
        'seed': config.seed,
        'geodesics': config.geodesics,
        'geodesic_steps': config.geodesic_steps,
        'tolerance_overrides': _fmt(dict(sorted(config.tolerances.items()))),
        'tolerances': _fmt({i: identity_registry.get_tolerance(i, config.tolerances) for i in sorted(ids)}),
    }


def build_report_payload(bundle: GeometryBundle, config: SuiteConfig, outcome: SuiteOutcome) -> Dict:
    """JSON-ready report; generated_at is the only field that changes between identical runs."""
    summary = summarize(outcome.reports)
    return {
        'schema': REPORT_SCHEMA,
        'generated_at': datetime.now(timezone.utc).isoformat(timespec='seconds'),
        'bundle': bundle.manifest(),
        'environment': environment_echo(config),
        'conventions': dict(identity_registry.CONVENTIONS),
        'exit_code': outcome.exit_code,
        'failing_identities': outcome.failing_identities,
        'failures': [f.to_dict() for f in outcome.failures],
        'summary': [_fmt(row) for row in summary.to_dict(orient='records')],
        'reports': [r.to_dict() for r in outcome.reports],
    }
