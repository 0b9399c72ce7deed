import pytest

import identity_registry as reg


def test_every_identity_belongs_to_a_known_suite():
    for identity_id, spec in reg.IDENTITY_TABLE.items():
        assert isinstance(spec, reg.IdentitySpec)
        assert spec.suite in reg.SUITES, identity_id
        assert spec.tolerance >= 0.0
        assert isinstance(spec.exploratory, bool)


def test_fundamental_equations_are_registered():
    assert len(reg.FUNDAMENTAL_EQUATIONS) == 12
    assert set(reg.FUNDAMENTAL_EQUATIONS) == set(reg.identities_for_suite('fundamental'))


def test_derivative_equations_are_exploratory():
    exploratory = {i for i in reg.FUNDAMENTAL_EQUATIONS if reg.is_exploratory(i)}
    assert exploratory == {'HUVW', 'VUVX', 'HUXV', 'VUXY', 'HXYU', 'VXYZ'}
    assert all(reg.get_tolerance(i) == 1e-3 for i in exploratory)


def test_overrides_take_precedence():
    assert reg.get_tolerance('cshd') == 1e-5
    assert reg.get_tolerance('cshd', {'cshd': 1e-3}) == 1e-3
    assert reg.get_tolerance('cshd', {'HXYZ': 1e-3}) == 1e-5


def test_equivalence_identities_allow_no_disagreement():
    assert reg.get_tolerance('projection_equivalence') == 0.0
    assert reg.get_tolerance('lift_equivalence') == 0.0


def test_unknown_ids_raise():
    with pytest.raises(KeyError):
        reg.get_tolerance('nope')
    with pytest.raises(KeyError):
        reg.identities_for_suite('nope')


def test_list_all_identities_covers_table():
    grouped = reg.list_all_identities()
    assert list(grouped) == list(reg.SUITES)
    assert sum(len(v) for v in grouped.values()) == len(reg.IDENTITY_TABLE)
    assert reg.suite_of('lift_drift') == 'lift'


def test_lift_hypothesis_has_its_own_tolerance():
    assert reg.suite_of('lift_hypothesis') == 'lift'
    assert reg.get_tolerance('lift_hypothesis', {'lift_drift': 1.0}) == 1e-6
    assert reg.get_tolerance('lift_drift', {'lift_hypothesis': 1.0}) == 1e-6
