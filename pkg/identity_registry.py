"""
Identity Registry - maps every checked identity to its suite and tolerance

Each identity id names one displayed equation (or one numerical certificate)
checked by the lab. The suite runner looks identities up here to decide which
tolerance applies and whether a failure counts against the exit status.
Add new identities here as new checks are written.
"""
from typing import Dict, List, Mapping, NamedTuple, Optional


class IdentitySpec(NamedTuple):
    suite: str
    tolerance: float
    exploratory: bool


# Identity → (suite, default tolerance, exploratory)
IDENTITY_TABLE: Dict[str, IdentitySpec] = {
    # horizontal conformality of pi
    'conformality': IdentitySpec('conformality', 1e-9, False),
    'conformal_factor_match': IdentitySpec('conformality', 1e-9, False),

    # CSHD defect and the induced base connection
    'cshd': IdentitySpec('cshd', 1e-5, False),
    'induced_projectability': IdentitySpec('cshd', 1e-5, False),

    # torsion splitting
    'torsion_horizontal': IdentitySpec('torsion', 1e-6, False),
    'torsion_vertical': IdentitySpec('torsion', 1e-6, False),
    'torsion_free_base': IdentitySpec('torsion', 1e-6, False),
    'torsion_free_fiber': IdentitySpec('torsion', 1e-6, False),

    # dual connections
    'duality_primal': IdentitySpec('duality', 1e-4, False),
    'duality_dual': IdentitySpec('duality', 1e-4, False),

    # curvature equations, algebraic
    'VVV_W': IdentitySpec('fundamental', 1e-4, False),
    'HUVX': IdentitySpec('fundamental', 1e-4, False),
    'VUXV': IdentitySpec('fundamental', 1e-4, False),
    'HUXY': IdentitySpec('fundamental', 1e-4, False),
    'VXYU': IdentitySpec('fundamental', 1e-4, False),
    'HXYZ': IdentitySpec('fundamental', 1e-4, False),

    # curvature equations with covariant derivatives of T and A
    'HUVW': IdentitySpec('fundamental', 1e-3, True),
    'VUVX': IdentitySpec('fundamental', 1e-3, True),
    'HUXV': IdentitySpec('fundamental', 1e-3, True),
    'VUXY': IdentitySpec('fundamental', 1e-3, True),
    'HXYU': IdentitySpec('fundamental', 1e-3, True),
    'VXYZ': IdentitySpec('fundamental', 1e-3, True),

    # geodesics and their projections
    'sigma_dd_horizontal': IdentitySpec('geodesic', 1e-4, False),
    'sigma_dd_vertical': IdentitySpec('geodesic', 1e-4, False),
    'projection_condition': IdentitySpec('geodesic', 1e-4, False),
    'projection_equivalence': IdentitySpec('geodesic', 0.0, False),
    'horizontal_geodesic': IdentitySpec('geodesic', 1e-4, False),

    # horizontal lifts; equivalence ids count disagreeing verdicts.
    # lift_hypothesis bounds A_ZZ along the lift before the verdicts apply
    'lift_drift': IdentitySpec('lift', 1e-6, False),
    'lift_hypothesis': IdentitySpec('lift', 1e-6, False),
    'lift_equivalence': IdentitySpec('lift', 0.0, False),
}

SUITES = ('conformality', 'cshd', 'torsion', 'duality', 'fundamental', 'geodesic', 'lift')

FUNDAMENTAL_EQUATIONS = ('VVV_W', 'HUVW', 'VUVX', 'HUVX', 'VUXV', 'HUXV',
                         'VUXY', 'HUXY', 'VXYU', 'HXYU', 'VXYZ', 'HXYZ')

# Conventions echoed into every report so other implementations can compare
CONVENTIONS = {
    'curvature': 'R(E,F)G = nabla_[E,F]G - nabla_E nabla_F G + nabla_F nabla_E G',
    'conformal_factor': 'g_m(X,Y) = exp(2 phi) g_b(pi_* X, pi_* Y) on horizontal vectors; hyperbolic phi = -log x_n',
    'tensor_derivative': '(nabla_E S)_F G = nabla_E(S_F G) - S_(nabla_E F) G - S_F(nabla_E G)',
    'horizontal_distribution': 'g_m-orthogonal complement of ker pi_*',
    'finite_differences': 'central, O(h^2); nested derivatives on fresh stencils',
}


def _lookup(identity_id: str) -> IdentitySpec:
    try:
        return IDENTITY_TABLE[identity_id]
    except KeyError:
        raise KeyError(f"Unknown identity: {identity_id}") from None


def get_tolerance(identity_id: str, overrides: Optional[Mapping[str, float]] = None) -> float:
    """
    Get the tolerance for an identity, honouring per-run overrides

    Args:
        identity_id: Identity name (e.g., 'cshd', 'HXYZ')
        overrides: Optional map identity → tolerance from the suite config

    Returns:
        float: Tolerance the residual is compared against
    """
    if overrides and identity_id in overrides:
        return float(overrides[identity_id])
    return _lookup(identity_id).tolerance


def is_exploratory(identity_id: str) -> bool:
    """Exploratory identities are reported but never fail a run."""
    return _lookup(identity_id).exploratory


def suite_of(identity_id: str) -> str:
    return _lookup(identity_id).suite


def identities_for_suite(suite: str) -> List[str]:
    if suite not in SUITES:
        raise KeyError(f"Unknown suite: {suite}")
    return [i for i, spec in IDENTITY_TABLE.items() if spec.suite == suite]


def list_all_identities() -> Dict[str, List[str]]:
    """
    List all registered identities

    Returns:
        dict: Identity ids grouped by suite
    """
    return {suite: identities_for_suite(suite) for suite in SUITES}
