"""
Submersions with a metric-orthogonal horizontal distribution.

Covers the vertical/horizontal splitting, horizontal lifts, the conformal
factor, the CSHD compatibility between a connection on M and one on B, the
induced base connection, the fundamental tensors T and A, projected
curvatures and the twelve fundamental equations.

Vector fields are plain callables x -> components. Base fields are lifted
pointwise, so every lift is basic by construction.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import null_space

from chart_core import (
    DEFAULT_STEP,
    Chart,
    DegenerateInputError,
    NotASubmersionError,
    PreconditionError,
    ProjectabilityError,
    ScalarField,
    UnsupportedGeometryError,
    VectorField,
    as_coords,
    constant_field,
    coordinate_field,
    lie_bracket,
    partials,
    sample_points,
)
from connection_ops import (
    ConnectionField,
    MetricField,
    covariant_along,
    covariant_derivative,
    curvature,
    dual_connection,
    torsion,
)
import identity_registry

FIBER_MATCH_TOL = 1e-10


#%% Submersion map

@dataclass(frozen=True)
class SubmersionMap:
    """pi: M -> B with its differential and a fiber sampler.

    Attributes:
        map_fn: x -> pi(x) in base coordinates
        source: Chart of M carrying g_m
        target: Chart of B carrying g_b
        differential_fn: x -> m x n Jacobian; finite differences of map_fn when omitted
        fiber_sampler_fn: (b, count) -> list of points of M with pi(x) = b
        vertical_coords: indices of the source coordinates that parametrise the fibers, if any
    """
    map_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    source: Chart
    target: Chart
    differential_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    fiber_sampler_fn: Optional[Callable[[np.ndarray, int], Sequence]] = field(default=None, repr=False)
    vertical_coords: Optional[Tuple[int, ...]] = None
    fd_step: float = DEFAULT_STEP
    label: str = "pi"

    def __post_init__(self):
        if not isinstance(self.source.metric, MetricField) or not isinstance(self.target.metric, MetricField):
            raise ValueError(f"{self.label}: source and target charts must carry a MetricField")
        if self.target.dim >= self.source.dim:
            raise ValueError(f"{self.label}: base dimension {self.target.dim} must be below total {self.source.dim}")

    @property
    def n(self) -> int:
        return self.source.dim

    @property
    def m(self) -> int:
        return self.target.dim

    @property
    def g_m(self) -> MetricField:
        return self.source.metric

    @property
    def g_b(self) -> MetricField:
        return self.target.metric

    @property
    def base_coords(self) -> Tuple[int, ...]:
        if self.vertical_coords is None:
            raise UnsupportedGeometryError(f"{self.label}: fibers are not parametrised by source coordinates")
        return tuple(i for i in range(self.n) if i not in self.vertical_coords)

    def project(self, x) -> np.ndarray:
        return np.asarray(self.map_fn(as_coords(x)), dtype=float)

    def differential(self, x) -> np.ndarray:
        x = as_coords(x)
        if self.differential_fn is not None:
            return np.asarray(self.differential_fn(x), dtype=float)
        return partials(self.map_fn, x, self.fd_step, self.source.domain).T

    def fiber_points(self, b, count: int) -> List[np.ndarray]:
        """Points on the fiber over b, checked against pi."""
        if self.fiber_sampler_fn is None:
            raise UnsupportedGeometryError(f"{self.label}: no fiber sampler")
        b = as_coords(b)
        points = [np.asarray(x, dtype=float) for x in self.fiber_sampler_fn(b, count)]
        for x in points:
            if not np.allclose(self.project(x), b, rtol=0.0, atol=FIBER_MATCH_TOL):
                raise PreconditionError(f"{self.label}: fiber sampler returned a point off the fiber over {b.tolist()}", x)
        return points


#%% Splitting and lifts

def _jacobian(S: SubmersionMap, x: np.ndarray) -> np.ndarray:
    J = S.differential(x)
    if J.shape != (S.m, S.n):
        raise ValueError(f"{S.label}: differential has shape {J.shape}, expected {(S.m, S.n)}")
    if np.linalg.matrix_rank(J) < S.m:
        raise NotASubmersionError(f"{S.label}: differential is not onto (not a submersion at p)", x)
    return J


def vertical_projector(S: SubmersionMap, p) -> np.ndarray:
    """g_m-orthogonal projector onto ker(pi_*) at p: V = N (N^T G N)^{-1} N^T G."""
    x = as_coords(p)
    J = _jacobian(S, x)
    S.g_m.check_spd(x)
    N = null_space(J)
    if N.shape[1] != S.n - S.m:
        raise NotASubmersionError(f"{S.label}: kernel has dimension {N.shape[1]}, expected {S.n - S.m}", x)
    NtG = N.T @ S.g_m(x)
    return N @ np.linalg.solve(NtG @ N, NtG)


def horizontal_projector(S: SubmersionMap, p) -> np.ndarray:
    return np.eye(S.n) - vertical_projector(S, p)


def horizontal_lift_matrix(S: SubmersionMap, p) -> np.ndarray:
    """n x m matrix whose columns are the horizontal lifts of the base coordinate vectors."""
    x = as_coords(p)
    J = _jacobian(S, x)
    ginv_jt = S.g_m.solve(x, J.T)
    return ginv_jt @ np.linalg.inv(J @ ginv_jt)


def horizontal_lift_vector(S: SubmersionMap, b, w, p) -> np.ndarray:
    """The unique horizontal u at p with pi_* u = w.

    Args:
        b: base point; must equal pi(p) within 1e-10 (None skips the check)
        w: base tangent vector at b
        p: point on the fiber over b
    """
    x = as_coords(p)
    if b is not None and not np.allclose(S.project(x), as_coords(b), rtol=0.0, atol=FIBER_MATCH_TOL):
        raise PreconditionError(f"{S.label}: pi(p) = {S.project(x).tolist()} differs from b = {as_coords(b).tolist()}", x)
    return horizontal_lift_matrix(S, x) @ np.asarray(w, dtype=float)


def horizontal_lift_field(S: SubmersionMap, X_base: Callable) -> VectorField:
    """Basic field over X_base, lifted pointwise on every stencil point."""
    label = getattr(X_base, "label", "X")
    return VectorField(lambda x: horizontal_lift_matrix(S, x) @ np.asarray(X_base(S.project(x)), dtype=float),
                       label=f"{label}~")


def vertical_part(S: SubmersionMap, E: Callable) -> VectorField:
    return VectorField(lambda x: vertical_projector(S, x) @ np.asarray(E(x), dtype=float), label="VE")


def horizontal_part(S: SubmersionMap, E: Callable) -> VectorField:
    return VectorField(lambda x: horizontal_projector(S, x) @ np.asarray(E(x), dtype=float), label="HE")


#%% Conformal factor

def recover_conformal_factor(S: SubmersionMap, p) -> Tuple[float, float]:
    """
    Read phi(p) off the metrics and measure how conformal pi is at p

    Lifts a g_b-orthonormal frame, forms its g_m Gram matrix and compares
    it with e^{2 phi} I.

    Returns:
        tuple: (phi, residual) with residual = max |Gram - e^{2 phi} I|
    """
    x = as_coords(p)
    b = S.project(x)
    lower = np.linalg.cholesky(S.g_b(b))
    frame = np.linalg.inv(lower).T  # columns g_b-orthonormal
    lifted = horizontal_lift_matrix(S, x) @ frame
    gram = lifted.T @ S.g_m(x) @ lifted
    if gram[0, 0] <= 0.0 or not np.isfinite(gram[0, 0]):
        raise DegenerateInputError("horizontal test vector has zero g_m norm", x)
    phi = 0.5 * math.log(gram[0, 0])
    residual = float(np.max(np.abs(gram - math.exp(2.0 * phi) * np.eye(S.m))))
    return phi, residual


def grad_conformal(S: SubmersionMap, phi: ScalarField, p, h: float = DEFAULT_STEP) -> np.ndarray:
    """g_m-gradient of phi at p."""
    x = as_coords(p)
    return S.g_m.solve(x, phi.gradient(x, h, S.source.domain))


def conformality_reports(S: SubmersionMap, phi: ScalarField, p,
                         overrides: Optional[Mapping[str, float]] = None) -> List["ResidualReport"]:
    """Conformality residual at p and the match between recovered and declared phi."""
    x = as_coords(p)
    recovered, residual = recover_conformal_factor(S, x)
    return [
        make_report('conformality', x, "g_b-orthonormal frame lifts", residual, overrides,
                    details={'phi': recovered}),
        make_report('conformal_factor_match', x, "recovered phi vs declared phi", abs(recovered - phi(x)),
                    overrides, details={'phi_recovered': recovered, 'phi_declared': phi(x)}),
    ]


#%% CSHD condition and induced connection

def cshd_defect(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                X_base: Callable, Y_base: Callable, p, h: float = DEFAULT_STEP) -> np.ndarray:
    """
    LHS - RHS of the CSHD condition for the base fields X, Y at p:

        H(nabla_X~ Y~) = (nabla*_X Y)~ + X~(phi) Y~ + Y~(phi) X~ - H(grad phi) g_m(X~, Y~)

    Args:
        conn: connection on M
        conn_b: connection on B
        phi: conformal factor on M

    Returns:
        np.ndarray: defect vector at p; zero iff the pair is CSHD there for (X, Y)
    """
    x = as_coords(p)
    dom = S.source.domain
    Xt = horizontal_lift_field(S, X_base)
    Yt = horizontal_lift_field(S, Y_base)
    proj_h = horizontal_projector(S, x)
    lhs = proj_h @ covariant_derivative(conn, Xt, Yt, x, h, dom)

    b = S.project(x)
    star = covariant_derivative(conn_b, X_base, Y_base, b, h, S.target.domain)
    dphi = phi.gradient(x, h, dom)
    xt, yt = Xt(x), Yt(x)
    rhs = (horizontal_lift_vector(S, b, star, x)
           + (dphi @ xt) * yt + (dphi @ yt) * xt
           - (proj_h @ S.g_m.solve(x, dphi)) * S.g_m.inner(x, xt, yt))
    return lhs - rhs


def base_coordinate_pairs(m: int) -> List[Tuple[VectorField, VectorField]]:
    return [(coordinate_field(m, i), coordinate_field(m, j)) for i in range(m) for j in range(m)]


def cshd_max_defect(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField, p,
                    pairs: Optional[Sequence[Tuple[Callable, Callable]]] = None, h: float = DEFAULT_STEP) -> float:
    """Largest CSHD defect norm over field pairs (all base coordinate pairs by default)."""
    pairs = pairs if pairs is not None else base_coordinate_pairs(S.m)
    return max(float(np.linalg.norm(cshd_defect(S, conn, conn_b, phi, X, Y, p, h))) for X, Y in pairs)


def _induced_christoffel(S: SubmersionMap, conn: ConnectionField, phi: ScalarField, b: np.ndarray,
                         x: np.ndarray, h: float) -> np.ndarray:
    """nabla*_{e_i} e_j = pi_*(nabla_{e_i~} e_j~) - e_i~(phi) e_j - e_j~(phi) e_i + e^{2phi} pi_*(grad phi) g_b(e_i, e_j)."""
    m = S.m
    dom = S.source.domain
    J = _jacobian(S, x)
    lifts = horizontal_lift_matrix(S, x)
    dphi = phi.gradient(x, h, dom)
    grad_push = J @ S.g_m.solve(x, dphi)
    scale = math.exp(2.0 * phi(x))
    g_b = S.g_b(b)
    basis = [horizontal_lift_field(S, coordinate_field(m, i)) for i in range(m)]
    eye = np.eye(m)
    gamma = np.zeros((m, m, m))
    for i in range(m):
        for j in range(m):
            pushed = J @ covariant_derivative(conn, basis[i], basis[j], x, h, dom)
            gamma[:, i, j] = (pushed - (dphi @ lifts[:, i]) * eye[j] - (dphi @ lifts[:, j]) * eye[i]
                              + scale * grad_push * g_b[i, j])
    return gamma


def induced_connection(S: SubmersionMap, conn: ConnectionField, phi: ScalarField,
                       check_points: Optional[Sequence] = None, fiber_samples: int = 8,
                       tolerance: Optional[float] = None, strict: bool = True,
                       h: float = DEFAULT_STEP) -> Tuple[ConnectionField, "ResidualReport"]:
    """
    Build nabla* on B from nabla on M and certify it is well defined

    Gamma* at b is assembled on the base coordinate fields at the first
    fiber sample over b. Projectability is checked by recomputing it at
    `fiber_samples` points of each fiber over `check_points` and taking the
    largest spread.

    Returns:
        tuple: (connection on B, projectability report)

    Raises:
        ProjectabilityError: spread above tolerance and strict is set
    """
    tolerance = identity_registry.get_tolerance('induced_projectability') if tolerance is None else tolerance

    def christoffel(b):
        b = as_coords(b)
        return _induced_christoffel(S, conn, phi, b, S.fiber_points(b, 1)[0], h)

    if check_points is None:
        check_points = sample_points(S.target, 4, seed=0)
    if len(check_points) == 0:
        raise DegenerateInputError("projectability check needs at least one base point")

    spread, worst = 0.0, None
    for b in check_points:
        b = as_coords(b)
        values = [_induced_christoffel(S, conn, phi, b, x, h) for x in S.fiber_points(b, fiber_samples)]
        local = max(float(np.max(np.abs(v - values[0]))) for v in values)
        logger.debug("induced connection fiber spread {:.3e} over b={}", local, b.tolist())
        if worst is None or local > spread:
            spread, worst = local, b

    report = ResidualReport('induced_projectability', as_coords(worst).tolist(),
                            f"{fiber_samples} fiber samples over {len(check_points)} base points",
                            spread, tolerance)
    if not report.passed:
        message = f"{S.label}: H(nabla_X~ Y~) is not projectable, fiber spread {spread:.3e} > {tolerance:.1e}"
        if strict:
            raise ProjectabilityError(message, worst, spread=spread)
        logger.warning(message)
    return ConnectionField(christoffel, S.m, S.target.chart_id, f"induced({conn.label})"), report


#%% Fundamental tensors

def tensor_T(S: SubmersionMap, conn: ConnectionField, E: Callable, F: Callable, p,
             h: float = DEFAULT_STEP) -> np.ndarray:
    """T_E F = H nabla_{VE}(VF) + V nabla_{VE}(HF)."""
    x = as_coords(p)
    dom = S.source.domain
    proj_v = vertical_projector(S, x)
    ve = proj_v @ np.asarray(E(x), dtype=float)
    return ((np.eye(S.n) - proj_v) @ covariant_along(conn, ve, vertical_part(S, F), x, h, dom)
            + proj_v @ covariant_along(conn, ve, horizontal_part(S, F), x, h, dom))


def tensor_A(S: SubmersionMap, conn: ConnectionField, E: Callable, F: Callable, p,
             h: float = DEFAULT_STEP) -> np.ndarray:
    """A_E F = V nabla_{HE}(HF) + H nabla_{HE}(VF)."""
    x = as_coords(p)
    dom = S.source.domain
    proj_v = vertical_projector(S, x)
    proj_h = np.eye(S.n) - proj_v
    he = proj_h @ np.asarray(E(x), dtype=float)
    return (proj_v @ covariant_along(conn, he, horizontal_part(S, F), x, h, dom)
            + proj_h @ covariant_along(conn, he, vertical_part(S, F), x, h, dom))


_TENSORS = {'T': tensor_T, 'A': tensor_A}


def covariant_tensor_derivative(S: SubmersionMap, conn: ConnectionField, which: str, E: Callable, F: Callable,
                                G: Callable, p, h: float = DEFAULT_STEP) -> np.ndarray:
    """(nabla_E S)_F G = nabla_E(S_F G) - S_{nabla_E F} G - S_F(nabla_E G), S in {T, A}."""
    if which not in _TENSORS:
        raise ValueError(f"unknown tensor {which!r}, expected 'T' or 'A'")
    tensor = _TENSORS[which]
    x = as_coords(p)
    dom = S.source.domain
    s_fg = lambda q: tensor(S, conn, F, G, q, h)
    nabla_f = constant_field(covariant_derivative(conn, E, F, x, h, dom))
    nabla_g = constant_field(covariant_derivative(conn, E, G, x, h, dom))
    return (covariant_derivative(conn, E, s_fg, x, h, dom)
            - tensor(S, conn, nabla_f, G, x, h)
            - tensor(S, conn, F, nabla_g, x, h))


#%% Fiber connection and torsion lemma

def fiber_embedding(S: SubmersionMap, b) -> Callable[[np.ndarray], np.ndarray]:
    """y -> point of M over b with vertical coordinates y."""
    vert = list(S.vertical_coords or ())
    base = list(S.base_coords)
    b = as_coords(b)

    def embed(y):
        x = np.zeros(S.n)
        x[base] = b
        x[vert] = np.asarray(y, dtype=float)
        return x

    return embed


def fiber_connection(S: SubmersionMap, conn: ConnectionField, b) -> ConnectionField:
    """
    Connection V nabla V induced on the fiber over b, in vertical coordinates

    Raises:
        UnsupportedGeometryError: the fiber is not the coordinate slice over b
    """
    b = as_coords(b)
    vert = list(S.vertical_coords or ())
    embed = fiber_embedding(S, b)

    def christoffel(y):
        x = embed(y)
        if not np.allclose(S.project(x), b, rtol=0.0, atol=FIBER_MATCH_TOL):
            raise UnsupportedGeometryError(f"{S.label}: vertical coordinates do not parametrise the fiber", x)
        if np.max(np.abs(_jacobian(S, x)[:, vert])) > FIBER_MATCH_TOL:
            raise UnsupportedGeometryError(f"{S.label}: vertical coordinate directions are not vertical", x)
        full = np.einsum("kl,lij->kij", vertical_projector(S, x), conn.christoffel(x))
        return full[np.ix_(vert, vert, vert)]

    return ConnectionField(christoffel, len(vert), f"{S.source.chart_id}/fiber", f"fiber({conn.label})")


def torsion_lemma_residuals(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                            p, h: float = DEFAULT_STEP,
                            overrides: Optional[Mapping[str, float]] = None) -> Tuple["ResidualReport", "ResidualReport"]:
    """
    Torsion transfer between M, B and the fibers at p

    Horizontal: H Tor(nabla)(X~, Y~) against (Tor(nabla*)(X, Y))~ over base
    coordinate pairs. Vertical: V Tor(nabla)(V, W) against the fiber torsion
    over fiber coordinate pairs.
    """
    x = as_coords(p)
    dom = S.source.domain
    b = S.project(x)
    proj_h = horizontal_projector(S, x)

    worst_h = 0.0
    for X, Y in base_coordinate_pairs(S.m):
        lhs = proj_h @ torsion(conn, horizontal_lift_field(S, X), horizontal_lift_field(S, Y), x, h, dom)
        rhs = horizontal_lift_vector(S, b, torsion(conn_b, X, Y, b, h, S.target.domain), x)
        worst_h = max(worst_h, float(np.linalg.norm(lhs - rhs)))
    report_h = make_report('torsion_horizontal', x, "base coordinate pairs", worst_h, overrides)

    if S.vertical_coords is None:
        report_v = make_report('torsion_vertical', x, "fiber coordinate pairs", float('nan'), overrides,
                               status="inapplicable", note="fibers not parametrised by vertical coordinates")
        return report_h, report_v

    vert = list(S.vertical_coords)
    k = len(vert)
    proj_v = vertical_projector(S, x)
    fiber = fiber_connection(S, conn, b)
    y = x[vert]
    worst_v = 0.0
    for a in range(k):
        for c in range(k):
            lhs = proj_v @ torsion(conn, coordinate_field(S.n, vert[a]), coordinate_field(S.n, vert[c]), x, h, dom)
            rhs = np.zeros(S.n)
            rhs[vert] = torsion(fiber, coordinate_field(k, a), coordinate_field(k, c), y, h)
            worst_v = max(worst_v, float(np.linalg.norm(lhs - rhs)))
    report_v = make_report('torsion_vertical', x, "fiber coordinate pairs", worst_v, overrides)
    return report_h, report_v


#%% Projected curvature

def _projector_fn(S: SubmersionMap, code: str) -> Callable[[np.ndarray], np.ndarray]:
    if code == 'H':
        return lambda q: horizontal_projector(S, q)
    if code == 'V':
        return lambda q: vertical_projector(S, q)
    raise ValueError(f"projector code must be 'H' or 'V', got {code!r}")


def projected_curvature(S: SubmersionMap, conn: ConnectionField, pattern: str, E: Callable, F: Callable,
                        G: Callable, p, h: float = DEFAULT_STEP) -> np.ndarray:
    """
    R^{P1 P2 P3}(E,F)G = P3 nabla_{[P1E,P2F]} P3G - P3 nabla_{P1E}(P3 nabla_{P2F} P3G)
                         + P3 nabla_{P2F}(P3 nabla_{P1E} P3G)

    Args:
        pattern: three projector codes, e.g. 'VHV'
    """
    if len(pattern) != 3:
        raise ValueError(f"pattern must name three projectors, got {pattern!r}")
    P1, P2, P3 = (_projector_fn(S, c) for c in pattern)
    x = as_coords(p)
    dom = S.source.domain
    pe = lambda q: P1(q) @ np.asarray(E(q), dtype=float)
    pf = lambda q: P2(q) @ np.asarray(F(q), dtype=float)
    pg = lambda q: P3(q) @ np.asarray(G(q), dtype=float)
    inner_f = lambda q: P3(q) @ covariant_derivative(conn, pf, pg, q, h, dom)
    inner_e = lambda q: P3(q) @ covariant_derivative(conn, pe, pg, q, h, dom)
    bracket = lie_bracket(pe, pf, x, h, dom)
    return P3(x) @ (covariant_along(conn, bracket, pg, x, h, dom)
                    - covariant_derivative(conn, pe, inner_f, x, h, dom)
                    + covariant_derivative(conn, pf, inner_e, x, h, dom))


#%% Residual reports

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.16e}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_fmt(v) for v in value]
    if isinstance(value, dict):
        return {k: _fmt(v) for k, v in value.items()}
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass
class ResidualReport:
    """One identity evaluated at one point; passed iff residual_norm <= tolerance."""
    identity_id: str
    point: List[float]
    inputs: str
    residual_norm: float
    tolerance: float
    exploratory: bool = False
    status: str = "ok"
    details: Dict = field(default_factory=dict)
    note: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        self.point = [float(c) for c in np.asarray(self.point, dtype=float).ravel()]
        self.residual_norm = float(self.residual_norm)
        self.tolerance = float(self.tolerance)
        self.passed = bool(self.residual_norm <= self.tolerance)

    @property
    def counts_as_failure(self) -> bool:
        return not self.passed and not self.exploratory and self.status == "ok"

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['pass'] = data.pop('passed')
        data['residual_norm'] = _fmt(self.residual_norm)
        data['tolerance'] = _fmt(self.tolerance)
        data['point'] = _fmt(self.point)
        data['details'] = _fmt(self.details)
        return data


def make_report(identity_id: str, x, inputs: str, residual: float,
                overrides: Optional[Mapping[str, float]] = None, **kwargs) -> ResidualReport:
    """ResidualReport with tolerance and exploratory flag taken from the identity registry."""
    return ResidualReport(identity_id, as_coords(x).tolist(), inputs, residual,
                          identity_registry.get_tolerance(identity_id, overrides),
                          exploratory=identity_registry.is_exploratory(identity_id), **kwargs)


#%% Fundamental equations

_REQUIRED_FIELDS = {
    'VVV_W': 'UVW', 'HUVW': 'UVW', 'VUVX': 'UVX', 'HUVX': 'UVX',
    'VUXV': 'UVX', 'HUXV': 'UVX', 'VUXY': 'UXY', 'HUXY': 'UXY',
    'VXYU': 'UXY', 'HXYU': 'UXY', 'VXYZ': 'XYZ', 'HXYZ': 'XYZ',
}

_DISPLAY_NOTES = {
    'VUXV': "evaluated with +A_X T_U V; the printed display has -A_X T_U V",
    'HUXY': "evaluated with T_U A_X Y; the printed display has T_V A_X Y",
    'VUVX': "evaluated as printed, with an H projector on the first tensor-derivative term",
}
_announced = set()


def fundamental_equation_residual(S: SubmersionMap, conn: ConnectionField, eq_id: str,
                                  fields: Mapping[str, Callable], p, h: float = DEFAULT_STEP,
                                  overrides: Optional[Mapping[str, float]] = None) -> ResidualReport:
    """
    Residual |LHS - RHS| of one of the twelve fundamental equations at p

    U, V, W are projected to vertical fields and X, Y, Z to horizontal ones
    before use. The left side is the projected full curvature; the right side
    is assembled from T, A, projected curvature and torsion. Identities with
    covariant derivatives of T or A are flagged exploratory.

    Args:
        eq_id: one of identity_registry.FUNDAMENTAL_EQUATIONS
        fields: mapping with the raw test fields the equation needs ('U', 'X', ...)
    """
    if eq_id not in _REQUIRED_FIELDS:
        raise ValueError(f"unknown fundamental equation {eq_id!r}")
    missing = [k for k in _REQUIRED_FIELDS[eq_id] if k not in fields]
    if missing:
        raise DegenerateInputError(f"{eq_id} needs test fields {missing}")

    x = as_coords(p)
    dom = S.source.domain
    f = {k: (vertical_part(S, fields[k]) if k in 'UVW' else horizontal_part(S, fields[k]))
         for k in _REQUIRED_FIELDS[eq_id]}
    val = {k: f[k](x) for k in f}
    proj_v = vertical_projector(S, x)
    proj_h = np.eye(S.n) - proj_v

    T = lambda a, b: tensor_T(S, conn, constant_field(a), constant_field(b), x, h)
    A = lambda a, b: tensor_A(S, conn, constant_field(a), constant_field(b), x, h)
    R = lambda a, b, c: curvature(conn, f[a], f[b], f[c], x, h, dom)
    Rp = lambda pattern, a, b, c: projected_curvature(S, conn, pattern, f[a], f[b], f[c], x, h)
    Tor = lambda a, b: torsion(conn, f[a], f[b], x, h, dom)
    dT = lambda e, a, b: covariant_tensor_derivative(S, conn, 'T', f[e], f[a], f[b], x, h)
    dA = lambda e, a, b: covariant_tensor_derivative(S, conn, 'A', f[e], f[a], f[b], x, h)

    if eq_id == 'VVV_W':
        u, v, w = val['U'], val['V'], val['W']
        lhs = proj_v @ R('U', 'V', 'W')
        rhs = Rp('VVV', 'U', 'V', 'W') + T(v, T(u, w)) - T(u, T(v, w))
    elif eq_id == 'HUVW':
        w = val['W']
        lhs = proj_h @ R('U', 'V', 'W')
        rhs = proj_h @ dT('V', 'U', 'W') - proj_h @ dT('U', 'V', 'W') - T(Tor('U', 'V'), w)
    elif eq_id == 'VUVX':
        xv = val['X']
        lhs = proj_v @ R('U', 'V', 'X')
        rhs = proj_h @ dT('V', 'U', 'X') - proj_v @ dT('U', 'V', 'X') - T(Tor('U', 'V'), xv)
    elif eq_id == 'HUVX':
        u, v, xv = val['U'], val['V'], val['X']
        lhs = proj_h @ R('U', 'V', 'X')
        rhs = Rp('VVH', 'U', 'V', 'X') + T(v, T(u, xv)) - T(u, T(v, xv))
    elif eq_id == 'VUXV':
        u, xv, v = val['U'], val['X'], val['V']
        lhs = proj_v @ R('U', 'X', 'V')
        rhs = Rp('VHV', 'U', 'X', 'V') - T(u, A(xv, v)) + A(xv, T(u, v))
    elif eq_id == 'HUXV':
        u, xv, v = val['U'], val['X'], val['V']
        tor = Tor('U', 'X')
        lhs = proj_h @ R('U', 'X', 'V')
        rhs = (proj_h @ dT('X', 'U', 'V') - proj_h @ dA('U', 'X', 'V')
               - A(A(xv, u), v) + T(T(u, xv), v) - T(tor, v) - A(tor, v))
    elif eq_id == 'VUXY':
        u, xv, y = val['U'], val['X'], val['Y']
        tor = Tor('U', 'X')
        lhs = proj_v @ R('U', 'X', 'Y')
        rhs = (proj_v @ dT('X', 'U', 'Y') - proj_v @ dA('U', 'X', 'Y')
               - A(A(xv, u), y) + T(T(u, xv), y) - T(tor, y) - A(tor, y))
    elif eq_id == 'HUXY':
        u, xv, y = val['U'], val['X'], val['Y']
        lhs = proj_h @ R('U', 'X', 'Y')
        rhs = Rp('VHH', 'U', 'X', 'Y') - T(u, A(xv, y)) + A(xv, T(u, y))
    elif eq_id == 'VXYU':
        xv, y, u = val['X'], val['Y'], val['U']
        lhs = proj_v @ R('X', 'Y', 'U')
        rhs = Rp('HHV', 'X', 'Y', 'U') + A(y, A(xv, u)) - A(xv, A(y, u))
    elif eq_id == 'HXYU':
        xv, y, u = val['X'], val['Y'], val['U']
        tor = Tor('X', 'Y')
        lhs = proj_h @ R('X', 'Y', 'U')
        rhs = (proj_h @ dA('Y', 'X', 'U') - proj_h @ dA('X', 'Y', 'U')
               + T(A(xv, y), u) - T(A(y, xv), u) - T(tor, u) - A(tor, u))
    elif eq_id == 'VXYZ':
        xv, y, z = val['X'], val['Y'], val['Z']
        tor = Tor('X', 'Y')
        lhs = proj_v @ R('X', 'Y', 'Z')
        rhs = (proj_v @ dA('Y', 'X', 'Z') - proj_v @ dA('X', 'Y', 'Z')
               + T(A(xv, y), z) - T(A(y, xv), z) - T(tor, z) - A(tor, z))
    else:  # HXYZ
        xv, y, z = val['X'], val['Y'], val['Z']
        lhs = proj_h @ R('X', 'Y', 'Z')
        rhs = Rp('HHH', 'X', 'Y', 'Z') + A(y, A(xv, z)) - A(xv, A(y, z))

    note = _DISPLAY_NOTES.get(eq_id, "")
    if note and eq_id not in _announced:
        _announced.add(eq_id)
        logger.warning("{}: {}", eq_id, note)
    residual = float(np.linalg.norm(lhs - rhs))
    logger.debug("{} at {}: |lhs|={:.3e} residual={:.3e}", eq_id, x.tolist(), np.linalg.norm(lhs), residual)
    inputs = ",".join(f"{k}={getattr(fields[k], 'label', k)}" for k in _REQUIRED_FIELDS[eq_id])
    return make_report(eq_id, x, inputs, residual, overrides, note=note,
                       details={'lhs_norm': float(np.linalg.norm(lhs))})


#%% Duality

def duality_proposition_check(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                              points: Sequence, pairs: Optional[Sequence[Tuple[Callable, Callable]]] = None,
                              h: float = DEFAULT_STEP,
                              overrides: Optional[Mapping[str, float]] = None) -> Tuple[ResidualReport, ResidualReport]:
    """
    CSHD defects of (nabla, nabla*) and of their metric duals over a point set

    The two pairs should pass or fail together. Each report carries the
    per-point verdicts and the number of points where they disagree.

    Returns:
        tuple: (primal report, dual report), each at its worst point
    """
    points = [as_coords(x) for x in points]
    if not points:
        raise DegenerateInputError("duality check needs at least one point")
    dual = dual_connection(S.g_m, conn, h, S.source.domain)
    dual_b = dual_connection(S.g_b, conn_b, h, S.target.domain)
    tol_p = identity_registry.get_tolerance('duality_primal', overrides)
    tol_d = identity_registry.get_tolerance('duality_dual', overrides)

    primal_vals, dual_vals = [], []
    for x in points:
        primal_vals.append(cshd_max_defect(S, conn, conn_b, phi, x, pairs, h))
        dual_vals.append(cshd_max_defect(S, dual, dual_b, phi, x, pairs, h))
    verdicts = [(a <= tol_p, d <= tol_d) for a, d in zip(primal_vals, dual_vals)]
    disagreements = sum(1 for a, d in verdicts if a != d)
    if disagreements:
        logger.warning("primal and dual CSHD verdicts disagree at {} of {} points", disagreements, len(points))

    details = {'points': len(points), 'disagreements': disagreements,
               'primal_defects': primal_vals, 'dual_defects': dual_vals}
    i_p, i_d = int(np.argmax(primal_vals)), int(np.argmax(dual_vals))
    inputs = "base coordinate pairs" if pairs is None else f"{len(pairs)} field pairs"
    return (make_report('duality_primal', points[i_p], inputs, primal_vals[i_p], overrides, details=details),
            make_report('duality_dual', points[i_d], inputs, dual_vals[i_d], overrides, details=details))
