import json

import numpy as np
import pytest

import gallery
import suite_runner
from chart_core import DomainError
from settings import SuiteConfig
from suite_runner import Task, build_report_payload, build_tasks, environment_echo, run_suites, summarize


def config(**kwargs):
    defaults = dict(points=2, workers=2, geodesics=1, geodesic_steps=100, fd_step=1e-4)
    defaults.update(kwargs)
    return SuiteConfig(**defaults)


def test_task_expansion(flat):
    tasks = build_tasks(flat, config(bundle="flat_product", suites=['conformality', 'cshd', 'fundamental']))
    by_suite = {}
    for t in tasks:
        by_suite[t.suite] = by_suite.get(t.suite, 0) + 1
    # one induced-connection task on top of the per-point cshd tasks
    assert by_suite == {'conformality': 2, 'cshd': 3, 'fundamental': 24}


def test_hyperbolic_core_suites_pass(hyperbolic2):
    outcome = run_suites(hyperbolic2, config(bundle="hyperbolic:n=2", suites=['conformality', 'cshd', 'torsion']))
    assert outcome.failures == []
    assert outcome.failing_identities == []
    assert outcome.exit_code == suite_runner.EXIT_OK
    ids = {r.identity_id for r in outcome.reports}
    assert {'conformality', 'cshd', 'induced_projectability', 'torsion_free_base'} <= ids


def test_results_do_not_depend_on_worker_count(hyperbolic3):
    one = run_suites(hyperbolic3, config(bundle="hyperbolic:n=3", suites=['cshd', 'duality'], workers=1))
    many = run_suites(hyperbolic3, config(bundle="hyperbolic:n=3", suites=['cshd', 'duality'], workers=4))
    assert [r.to_dict() for r in one.reports] == [r.to_dict() for r in many.reports]


def test_broken_base_fails_cshd():
    bundle = gallery.resolve_bundle("flat_product:broken=0.1")
    outcome = run_suites(bundle, config(bundle=bundle.spec, suites=['cshd']))
    assert 'cshd' in outcome.failing_identities
    assert outcome.exit_code == suite_runner.EXIT_IDENTITY_FAILURE
    worst = max(r.residual_norm for r in outcome.reports if r.identity_id == 'cshd')
    assert worst == pytest.approx(0.1, rel=1e-6)


def test_lift_suite_inapplicable_on_hyperbolic(hyperbolic2):
    outcome = run_suites(hyperbolic2, config(bundle="hyperbolic:n=2", suites=['lift']))
    lift = [r for r in outcome.reports if r.identity_id == 'lift_equivalence']
    assert lift and all(r.status == "inapplicable" for r in lift)
    assert outcome.exit_code == suite_runner.EXIT_OK
    row = summarize(outcome.reports).set_index('identity_id').loc['lift_equivalence']
    assert row['inapplicable'] == row['checks']


def test_drift_tolerance_does_not_gate_the_lift_hypothesis(hyperbolic2):
    loose = config(bundle="hyperbolic:n=2", suites=['geodesic', 'lift'], tolerances={'lift_drift': 10.0})
    outcome = run_suites(hyperbolic2, loose)
    gated = [r for r in outcome.reports if r.identity_id in ('lift_equivalence', 'horizontal_geodesic')]
    assert gated and all(r.status == "inapplicable" for r in gated)


def test_curve_suites_on_warped_line(warped_x):
    outcome = run_suites(warped_x, config(bundle="warped_line:psi=x", suites=['geodesic', 'lift'], geodesics=2))
    assert outcome.failures == []
    assert outcome.exit_code == suite_runner.EXIT_OK
    assert {'sigma_dd_horizontal', 'projection_equivalence', 'horizontal_geodesic', 'lift_equivalence',
            'lift_drift'} <= {r.identity_id for r in outcome.reports}


def test_breakdown_is_recorded_not_raised(flat, monkeypatch):
    def explode():
        raise DomainError("stencil left the chart", np.array([0.0, -1.0, 0.0]))

    monkeypatch.setattr(suite_runner, "build_tasks", lambda bundle, cfg: [Task('cshd', 'point 0', explode)])
    outcome = run_suites(flat, config(bundle="flat_product", suites=['cshd']))
    assert outcome.exit_code == suite_runner.EXIT_NUMERICAL_BREAKDOWN
    [failure] = outcome.failures
    assert failure.error == "DomainError"
    assert failure.point == [0.0, -1.0, 0.0]


def test_summary_columns_for_empty_run():
    df = summarize([])
    assert list(df.columns) == ['identity_id', 'suite', 'exploratory', 'tolerance', 'max_residual', 'checks',
                                'passed', 'inapplicable']


def test_environment_echo_ignores_workers():
    a = environment_echo(config(bundle="flat_product", suites=['cshd'], workers=1))
    b = environment_echo(config(bundle="flat_product", suites=['cshd'], workers=8))
    assert a == b
    c = environment_echo(config(bundle="flat_product", suites=['cshd'], tolerances={'cshd': 1e-3}))
    assert c['tolerances']['cshd'] == "1.0000000000000000e-03"
    assert c['tolerance_overrides'] == {'cshd': "1.0000000000000000e-03"}


def test_report_payload_is_json(flat):
    cfg = config(bundle="flat_product", suites=['conformality'])
    outcome = run_suites(flat, cfg)
    payload = build_report_payload(flat, cfg, outcome)
    assert payload['schema'] == suite_runner.REPORT_SCHEMA
    assert payload['exit_code'] == 0
    text = json.dumps(payload, sort_keys=True)
    assert json.loads(text)['summary'][0]['identity_id'] == 'conformal_factor_match'
