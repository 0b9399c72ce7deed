import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import gallery
from connection_ops import christoffel_difference
from settings import ConfigError
from submersion_core import conformality_reports, cshd_max_defect


@pytest.mark.parametrize("spec", ["flat_product", "hyperbolic:n=2", "hyperbolic:n=3", "warped_line:psi=sin",
                                  "random_conformal:seed=1,n=3,m=2", "random_conformal:seed=4,n=4,m=2"])
def test_built_in_bundles_are_conformal_with_declared_phi(spec):
    bundle = gallery.resolve_bundle(spec)
    for p in bundle.sample_points(4, seed=2):
        for report in conformality_reports(bundle.S, bundle.phi, p):
            assert report.passed, report.to_dict()


def test_hyperbolic_phi_is_minus_log_height(hyperbolic3):
    p = np.array([0.2, -0.4, 2.5])
    assert hyperbolic3.phi(p) == pytest.approx(-np.log(2.5))
    assert hyperbolic3.S.source.contains(p)
    assert not hyperbolic3.S.source.contains([0.0, 0.0, -1.0])


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=500))
def test_random_conformal_is_deterministic_per_seed(seed):
    a = gallery.make_random_conformal(seed=seed, n=3, m=2)
    b = gallery.make_random_conformal(seed=seed, n=3, m=2)
    p = a.sample_points(1, seed=seed)[0]
    assert_allclose(a.S.g_m(p), b.S.g_m(p))
    assert a.phi(p) == b.phi(p)


def test_broken_base_shifts_one_symbol(flat):
    broken = gallery.with_broken_base(flat, delta=0.1)
    diff = christoffel_difference(broken.conn_b, flat.conn_b, np.zeros(2))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 0.1
    assert_allclose(diff, expected)
    assert not broken.claims_cshd
    assert broken.params['broken'] == 0.1


def test_perturbed_bundle_stays_cshd(hyperbolic2):
    bundle = gallery.with_symmetric_perturbation(hyperbolic2, seed=3)
    K = christoffel_difference(bundle.conn_m, hyperbolic2.conn_m, [0.1, 1.5])
    assert_allclose(K, K.transpose(0, 2, 1))
    p = np.array([0.1, 1.5])
    assert np.linalg.norm(cshd_max_defect(bundle.S, bundle.conn_m, bundle.conn_b, bundle.phi, p)) < 1e-5


def test_random_test_fields_are_seeded(flat):
    a = gallery.random_test_fields(flat, 3)
    b = gallery.random_test_fields(flat, 3)
    assert sorted(a) == list('UVWXYZ')
    p = np.array([0.1, 0.2, 0.3])
    assert_allclose(a['X'](p), b['X'](p))
    assert not np.allclose(a['X'](p), a['Y'](p))


class TestRegistry:

    def test_parse_bundle_spec_types_values(self):
        name, params = gallery.parse_bundle_spec("random_conformal: seed=3, n=4 ,m=2,broken=0.25")
        assert name == "random_conformal"
        assert params == {'seed': 3, 'n': 4, 'm': 2, 'broken': 0.25}
        assert gallery.parse_bundle_spec("warped_line:psi=sin")[1] == {'psi': 'sin'}

    def test_bad_parameter_syntax(self):
        with pytest.raises(ConfigError):
            gallery.parse_bundle_spec("hyperbolic:n")

    def test_unknown_bundle(self):
        with pytest.raises(ConfigError):
            gallery.build_bundle("sphere")

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError):
            gallery.build_bundle("hyperbolic", {'radius': 2})

    def test_invalid_dimensions(self):
        with pytest.raises(ConfigError):
            gallery.build_bundle("flat_product", {'n': 2, 'm': 2})
        with pytest.raises(ConfigError):
            gallery.build_bundle("warped_line", {'psi': 'cubic'})

    def test_spec_round_trips_through_manifest(self, tmp_path):
        bundle = gallery.resolve_bundle("hyperbolic:n=3,broken=0.1")
        manifest = bundle.manifest()
        assert manifest['dims'] == {'total': 3, 'base': 2}
        assert manifest['claims']['cshd'] is False
        path = tmp_path / "bundle.json"
        path.write_text(json.dumps(manifest))
        again = gallery.resolve_bundle(str(path))
        assert again.spec == bundle.spec

    def test_manifest_without_name(self, tmp_path):
        path = tmp_path / "bundle.json"
        path.write_text(json.dumps({'params': {}}))
        with pytest.raises(ConfigError):
            gallery.resolve_bundle(str(path))

    def test_list_bundles_has_descriptions(self):
        listing = gallery.list_bundles()
        assert {b['name'] for b in listing} == set(gallery.BUNDLE_FACTORIES)
        assert all(b['description'] for b in listing)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hyperbolic_halfspace_is_cshd_on_a_point_cloud(n):
    bundle = gallery.make_hyperbolic_halfspace(n)
    worst = max(cshd_max_defect(bundle.S, bundle.conn_m, bundle.conn_b, bundle.phi, p)
                for p in bundle.sample_points(20, seed=0))
    assert worst <= 1e-4
