import json

import numpy as np
import pandas as pd
import pytest

import verify_cli
from geodesic_lab import ParametricCurve


def write_config(tmp_path, **fields):
    payload = {'schema': 'suite_config.v1', 'points': 2, 'geodesics': 1, 'geodesic_steps': 100}
    payload.update(fields)
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(payload))
    return str(path)


def load_report(path):
    data = json.loads(path.read_text())
    data.pop('generated_at')
    return data


class TestVerify:

    def test_flat_product_passes_and_report_is_stable(self, tmp_path, capsys):
        config = write_config(tmp_path, bundle="flat_product", suites=['conformality', 'cshd', 'torsion',
                                                                       'duality', 'geodesic', 'lift'])
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert verify_cli.main(["verify", "--config", config, "--workers", "1", "--output", str(first)]) == 0
        assert verify_cli.main(["verify", "--config", config, "--workers", "3", "--output", str(second)]) == 0
        assert load_report(first) == load_report(second)
        out = capsys.readouterr().out
        assert "Verification Summary" in out
        assert "✅ cshd" in out

    def test_report_contents(self, tmp_path):
        output = tmp_path / "report.json"
        code = verify_cli.main(["verify", "--bundle", "hyperbolic:n=3", "--suites", "conformality,cshd",
                                "--points", "2", "--tolerance", "cshd=1e-4", "--output", str(output)])
        assert code == 0
        report = json.loads(output.read_text())
        assert report['schema'] == "residual_report.v1"
        assert report['bundle']['dims'] == {'total': 3, 'base': 2}
        assert report['environment']['tolerance_overrides'] == {'cshd': "1.0000000000000000e-04"}
        assert report['failing_identities'] == []
        assert set(report['conventions']) >= {'curvature', 'conformal_factor'}
        assert all(isinstance(r['residual_norm'], str) for r in report['reports'])

    def test_coarse_step_fails_fundamental_equations(self, tmp_path):
        output = tmp_path / "coarse.json"
        code = verify_cli.main(["verify", "--bundle", "random_conformal:seed=1,n=3,m=2", "--suites", "fundamental",
                                "--points", "2", "--fd-step", "0.1", "--output", str(output)])
        assert code == 1
        report = json.loads(output.read_text())
        assert report['exit_code'] == 1
        assert report['failing_identities']
        exploratory = {'HUVW', 'VUVX', 'HUXV', 'VUXY', 'HXYU', 'VXYZ'}
        assert not exploratory & set(report['failing_identities'])

    def test_broken_base_exits_one(self, tmp_path):
        output = tmp_path / "broken.json"
        code = verify_cli.main(["verify", "-b", "flat_product:broken=0.1", "-s", "cshd", "--points", "2",
                                "-o", str(output)])
        assert code == 1
        assert json.loads(output.read_text())['failing_identities'] == ['cshd']

    @pytest.mark.parametrize("argv", [
        ["verify", "--bundle", "flat_product", "--suites", "curvature"],
        ["verify", "--bundle", "sphere"],
        ["verify"],
        ["verify", "--bundle", "flat_product", "--tolerance", "cshd"],
        ["verify", "--bundle", "flat_product", "--tolerance", "cshd=-1"],
        ["verify", "--bundle", "flat_product", "--log-level", "LOUD"],
    ])
    def test_configuration_errors_exit_two(self, argv, tmp_path, capsys):
        assert verify_cli.main(argv + ["--output", str(tmp_path / "r.json")]) == 2
        assert "Configuration error" in capsys.readouterr().err


class TestGeodesic:

    def test_vertical_geodesic_projects_to_geodesic(self, tmp_path, capsys):
        prefix = tmp_path / "vertical"
        code = verify_cli.main(["geodesic", "--bundle", "hyperbolic:n=2", "--p0", "0,2", "--v0", "0,1",
                                "--steps", "200", "--output", str(prefix)])
        assert code == 0
        assert "projection geodesic: yes" in capsys.readouterr().out
        curve = pd.read_csv(f"{prefix}.csv")
        assert list(curve.columns) == ['t', 'x1', 'x2', 'v1', 'v2']
        np.testing.assert_allclose(curve['x2'], 2.0 * np.exp(curve['t'] / 2.0), rtol=1e-8)

    def test_semicircle_projection_is_not_geodesic(self, tmp_path, capsys):
        prefix = tmp_path / "semicircle"
        code = verify_cli.main(["geodesic", "--bundle", "hyperbolic:n=2", "--p0", "0,2", "--v0", "1,0",
                                "--steps", "200", "--output", str(prefix)])
        assert code == 0
        assert "projection geodesic: no" in capsys.readouterr().out
        summary = json.loads((tmp_path / "semicircle.json").read_text())
        assert summary['verdict'] == {'condition_holds': False, 'projection_is_geodesic': False}
        table = pd.read_csv(f"{prefix}_projection.csv")
        np.testing.assert_allclose(table['condition_residual'], table['projected_defect'], rtol=1e-3)
        assert len(pd.read_csv(f"{prefix}_base.csv").columns) == 3

    def test_domain_exit_writes_partial_curve(self, tmp_path, capsys):
        prefix = tmp_path / "exit"
        code = verify_cli.main(["geodesic", "--bundle", "hyperbolic:n=2", "--p0", "0,0.01", "--v0", "0,-1",
                                "--steps", "2", "--output", str(prefix)])
        assert code == 3
        assert (tmp_path / "exit.partial.csv").exists()
        assert "IntegrationError" in capsys.readouterr().err

    def test_energy_drift_exits_three(self, tmp_path, capsys):
        prefix = tmp_path / "coarse"
        code = verify_cli.main(["geodesic", "--bundle", "hyperbolic:n=2", "--p0", "0,1", "--v0", "2,0",
                                "--t-end", "1", "--steps", "2", "--output", str(prefix)])
        assert code == 3
        captured = capsys.readouterr()
        assert "energy drift" in captured.out + captured.err
        assert (tmp_path / "coarse.partial.csv").exists()

    def test_wrong_dimension(self, tmp_path):
        code = verify_cli.main(["geodesic", "--bundle", "hyperbolic:n=3", "--p0", "0,2", "--v0", "1,0",
                                "--output", str(tmp_path / "g")])
        assert code == 2


class TestLift:

    def test_warped_lift_verdicts_agree(self, tmp_path, capsys):
        prefix = tmp_path / "lift"
        code = verify_cli.main(["lift", "--bundle", "warped_line:psi=x", "--p0", "0,0.3", "--base-v0", "0.5",
                                "--steps", "200", "--output", str(prefix)])
        assert code == 0
        out = capsys.readouterr().out
        assert "lift geodesic no" in out and "condition fails" in out
        report = json.loads((tmp_path / "lift.json").read_text())['lift_equivalence']
        assert report['pass'] is True
        assert float(report['details']['condition_residual']) == pytest.approx(0.25, rel=1e-3)

    def test_lift_of_recorded_curve(self, tmp_path, capsys):
        base = ParametricCurve(lambda t: np.array([0.2 + 0.4 * t]), lambda t: np.array([0.4]))
        path = tmp_path / "base.csv"
        base.sample(np.linspace(0.0, 1.0, 101)).to_csv(path)
        code = verify_cli.main(["lift", "--bundle", "warped_line:psi=const", "--p0", "0.2,-0.5",
                                "--curve", str(path), "--output", str(tmp_path / "lift")])
        assert code == 0
        assert "lift geodesic yes" in capsys.readouterr().out
        lift = pd.read_csv(tmp_path / "lift.csv")
        np.testing.assert_allclose(lift['x2'], -0.5, atol=1e-12)

    def test_lift_of_json_curve(self, tmp_path, capsys):
        base = ParametricCurve(lambda t: np.array([0.2 + 0.4 * t]), lambda t: np.array([0.4]))
        path = tmp_path / "base.json"
        base.sample(np.linspace(0.0, 1.0, 101)).to_json(path)
        code = verify_cli.main(["lift", "--bundle", "warped_line:psi=const", "--p0", "0.2,-0.5",
                                "--curve", str(path), "--output", str(tmp_path / "lift")])
        assert code == 0
        assert "lift geodesic yes" in capsys.readouterr().out
        base_csv = pd.read_csv(tmp_path / "lift_base.csv")
        np.testing.assert_allclose(base_csv["x1"], 0.2 + 0.4 * base_csv["t"], atol=1e-12)

    def test_unreadable_json_curve_exits_two(self, tmp_path):
        path = tmp_path / "base.json"
        path.write_text("{not json")
        code = verify_cli.main(["lift", "--bundle", "warped_line", "--p0", "0,0", "--curve", str(path),
                                "--output", str(tmp_path / "lift")])
        assert code == 2

    def test_hyperbolic_lift_is_inapplicable(self, tmp_path, capsys):
        code = verify_cli.main(["lift", "--bundle", "hyperbolic:n=2", "--p0", "0,2", "--base-v0", "1",
                                "--steps", "100", "--output", str(tmp_path / "lift")])
        assert code == 0
        assert "inapplicable: A_ZZ != 0" in capsys.readouterr().out

    def test_lift_needs_a_base_curve(self, tmp_path):
        code = verify_cli.main(["lift", "--bundle", "warped_line", "--p0", "0,0", "--output", str(tmp_path / "l")])
        assert code == 2


def test_list_bundles(capsys):
    assert verify_cli.main(["list-bundles"]) == 0
    out = capsys.readouterr().out
    for name in ("flat_product", "hyperbolic", "warped_line", "random_conformal"):
        assert name in out
