"""
Geodesic Lab - curves on M and B, geodesic integration, curve lifting

Checks the curve-level statements about a CSHD pair:
- the decomposition of a covariant derivative along a curve into base,
  T and A terms (and its specialisation to sigma'')
- when the projection of a geodesic is a geodesic
- when horizontal lifts of base geodesics are geodesics

Integration is fixed-step classical RK4. Curve derivatives are central
differences in the curve parameter, interior samples only.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.interpolate import CubicHermiteSpline

from chart_core import (
    DEFAULT_STEP,
    DegenerateInputError,
    DomainError,
    IntegrationError,
    Point,
    PreconditionError,
    ScalarField,
    UnsupportedGeometryError,
    as_coords,
    constant_field,
)
from connection_ops import ConnectionField, MetricField
from submersion_core import (
    FIBER_MATCH_TOL,
    ResidualReport,
    SubmersionMap,
    horizontal_lift_matrix,
    make_report,
    tensor_A,
    tensor_T,
    vertical_projector,
)
import identity_registry

GEODESIC_INPUT_TOL = 1e-6


#%% Curve types

@dataclass(frozen=True)
class CurveRecord:
    """Sampled curve: times (N,), points (N, n), velocities (N, n)."""
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    chart_id: str = "chart"

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        points = np.atleast_2d(np.array(self.points, dtype=float))
        velocities = np.atleast_2d(np.array(self.velocities, dtype=float))
        if times.ndim != 1 or len(times) != len(points) or points.shape != velocities.shape:
            raise ValueError(f"curve arrays disagree: times {times.shape}, points {points.shape}, "
                             f"velocities {velocities.shape}")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("curve times must be strictly increasing")
        for arr in (times, points, velocities):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "velocities", velocities)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def point(self, i: int) -> Point:
        return Point(self.points[i], self.chart_id)

    def truncated(self, count: int) -> "CurveRecord":
        return CurveRecord(self.times[:count], self.points[:count], self.velocities[:count], self.chart_id)

    def to_frame(self) -> pd.DataFrame:
        n = self.dim
        data = {'t': self.times}
        data.update({f"x{k + 1}": self.points[:, k] for k in range(n)})
        data.update({f"v{k + 1}": self.velocities[:, k] for k in range(n)})
        return pd.DataFrame(data)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_dict(self) -> Dict:
        return {'chart_id': self.chart_id, 'times': self.times.tolist(),
                'points': self.points.tolist(), 'velocities': self.velocities.tolist()}

    def to_json(self, path: Union[str, Path]) -> None:
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_frame(cls, df: pd.DataFrame, chart_id: str = "chart") -> "CurveRecord":
        xs = sorted((c for c in df.columns if c.startswith('x')), key=lambda c: int(c[1:]))
        vs = sorted((c for c in df.columns if c.startswith('v')), key=lambda c: int(c[1:]))
        if 't' not in df.columns or not xs or len(xs) != len(vs):
            raise ValueError(f"curve table needs columns t, x1..xn, v1..vn; got {list(df.columns)}")
        return cls(df['t'].to_numpy(), df[xs].to_numpy(), df[vs].to_numpy(), chart_id)

    @classmethod
    def from_csv(cls, path: Union[str, Path], chart_id: str = "chart") -> "CurveRecord":
        return cls.from_frame(pd.read_csv(path), chart_id)

    @classmethod
    def from_dict(cls, data: Mapping, chart_id: Optional[str] = None) -> "CurveRecord":
        missing = [k for k in ('times', 'points', 'velocities') if k not in data]
        if missing:
            raise ValueError(f"curve record missing keys: {missing}")
        return cls(data['times'], data['points'], data['velocities'],
                   chart_id or data.get('chart_id', "chart"))

    @classmethod
    def from_json(cls, path: Union[str, Path], chart_id: Optional[str] = None) -> "CurveRecord":
        """
        Read a curve written by to_json

        Args:
            path: JSON file holding chart_id, times, points, velocities
            chart_id: Overrides the chart id stored in the file

        Returns:
            CurveRecord: The stored samples, bit-for-bit
        """
        with open(path) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a curve object, got {type(data).__name__}")
        return cls.from_dict(data, chart_id)


@dataclass(frozen=True)
class AlongCurveField:
    """Vector field along a sampled curve, one value per sample."""
    values: np.ndarray
    label: str = "E"

    def __post_init__(self):
        values = np.atleast_2d(np.array(self.values, dtype=float))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, i: int) -> np.ndarray:
        return self.values[i]

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def velocity(cls, curve: CurveRecord) -> "AlongCurveField":
        return cls(curve.velocities, label="sigma'")

    @classmethod
    def from_field(cls, curve: CurveRecord, E: Callable, label: str = "E") -> "AlongCurveField":
        return cls(np.array([E(x) for x in curve.points]), label=label)


@dataclass(frozen=True)
class ParametricCurve:
    """Base curve given by closed-form position and velocity."""
    position: Callable[[float], np.ndarray] = field(repr=False)
    velocity: Callable[[float], np.ndarray] = field(repr=False)
    label: str = "alpha"

    def sample(self, times: Sequence[float], chart_id: str = "chart") -> CurveRecord:
        times = np.asarray(times, dtype=float)
        return CurveRecord(times, np.array([self.position(t) for t in times]),
                           np.array([self.velocity(t) for t in times]), chart_id)


def _interpolant(curve: Union[CurveRecord, ParametricCurve]) -> Tuple[Callable, Callable]:
    if isinstance(curve, ParametricCurve):
        return (lambda t: np.asarray(curve.position(t), dtype=float),
                lambda t: np.asarray(curve.velocity(t), dtype=float))
    spline = CubicHermiteSpline(curve.times, curve.points, curve.velocities, axis=0)
    speed = spline.derivative()
    return spline, speed


#%% Integration

def _rk4_step(rhs: Callable, t: float, state: np.ndarray, dt: float, domain: Optional[Callable],
              split: int) -> np.ndarray:
    def checked(s, tau):
        if domain is not None and not domain(s[:split]):
            raise DomainError("RK4 stage left the chart domain", s[:split])
        return rhs(tau, s)

    k1 = checked(state, t)
    k2 = checked(state + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = checked(state + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = checked(state + dt * k3, t + dt)
    return state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def geodesic_ivp(conn: ConnectionField, p0, v0, t_end: float, steps: int,
                 domain: Optional[Callable] = None, energy_metric: Optional[MetricField] = None,
                 drift_tolerance: float = 1e-4) -> CurveRecord:
    """
    Integrate sigma''^k + Gamma^k_ij sigma'^i sigma'^j = 0 with classical RK4

    Args:
        conn: connection on the chart
        p0, v0: initial point and velocity
        t_end: final parameter value (> 0)
        steps: number of RK4 steps (>= 2)
        domain: chart domain predicate; leaving it stops the integration
        energy_metric: when given, relative drift of g(sigma', sigma') above
            drift_tolerance is treated as divergence

    Returns:
        CurveRecord with steps + 1 samples

    Raises:
        IntegrationError: domain exit or energy drift; carries the partial record
    """
    if steps < 2:
        raise DegenerateInputError(f"geodesic integration needs at least 2 steps, got {steps}")
    if t_end <= 0:
        raise DegenerateInputError(f"t_end must be positive, got {t_end}")
    x0 = as_coords(p0)
    n = len(x0)
    if domain is not None and not domain(x0):
        raise PreconditionError("initial point outside the chart domain", x0)

    def rhs(t, s):
        x, v = s[:n], s[n:]
        return np.concatenate([v, -np.einsum("kij,i,j->k", conn.christoffel(x), v, v)])

    times = np.linspace(0.0, t_end, steps + 1)
    dt = times[1] - times[0]
    states = [np.concatenate([x0, np.asarray(v0, dtype=float)])]
    energy0 = None if energy_metric is None else energy_metric.inner(x0, states[0][n:], states[0][n:])

    def partial():
        arr = np.array(states)
        return CurveRecord(times[:len(arr)], arr[:, :n], arr[:, n:], conn.chart_id)

    for k in range(steps):
        try:
            nxt = _rk4_step(rhs, times[k], states[-1], dt, domain, n)
        except DomainError as e:
            raise IntegrationError(f"geodesic left the chart domain near t={times[k]:.6g}", e.point,
                                   partial=partial()) from None
        if not np.all(np.isfinite(nxt)):
            raise IntegrationError(f"non-finite state at t={times[k + 1]:.6g}", states[-1][:n], partial=partial())
        if domain is not None and not domain(nxt[:n]):
            raise IntegrationError(f"geodesic left the chart domain at t={times[k + 1]:.6g}", nxt[:n],
                                   partial=partial())
        states.append(nxt)
        if energy0 is not None:
            energy = energy_metric.inner(nxt[:n], nxt[n:], nxt[n:])
            drift = abs(energy - energy0) / max(abs(energy0), 1e-300)
            if drift > drift_tolerance:
                raise IntegrationError(f"energy drift {drift:.3e} at t={times[k + 1]:.6g}; step too large",
                                       nxt[:n], partial=partial())

    curve = partial()
    logger.debug("geodesic from {} integrated to t={} in {} steps", x0.tolist(), t_end, steps)
    return curve


def project_curve(S: SubmersionMap, curve: CurveRecord) -> CurveRecord:
    """pi o sigma with velocities pi_* sigma'."""
    points = np.array([S.project(x) for x in curve.points])
    velocities = np.array([S.differential(x) @ v for x, v in zip(curve.points, curve.velocities)])
    return CurveRecord(curve.times, points, velocities, S.target.chart_id)


#%% Along-curve derivatives

def _check_interior(curve: CurveRecord, i: int) -> None:
    if not 0 < i < len(curve) - 1:
        raise UnsupportedGeometryError(f"index {i} is not an interior sample of a {len(curve)}-sample curve")


def _time_derivative(values: np.ndarray, times: np.ndarray, i: int, order: int) -> np.ndarray:
    if order == 4 and 2 <= i <= len(times) - 3:
        dt = (times[i + 2] - times[i - 2]) / 4.0
        return (-values[i + 2] + 8.0 * values[i + 1] - 8.0 * values[i - 1] + values[i - 2]) / (12.0 * dt)
    return (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1])


def _window(curve: CurveRecord, i: int, order: int) -> Tuple[slice, int]:
    """Samples the stencil at i touches, and the index of i inside them."""
    _check_interior(curve, i)
    reach = 2 if order == 4 and 2 <= i <= len(curve) - 3 else 1
    return slice(i - reach, i + reach + 1), reach


def _sub(curve: CurveRecord, window: slice) -> CurveRecord:
    return CurveRecord(curve.times[window], curve.points[window], curve.velocities[window], curve.chart_id)


def covariant_along_curve(conn: ConnectionField, curve: CurveRecord, E: AlongCurveField, i: int,
                          order: int = 2) -> np.ndarray:
    """(E')^k = dE^k/dt + Gamma^k_ij sigma'^i E^j at interior sample i.

    order=4 switches to the five-point stencil where two neighbours exist on each side.
    """
    _check_interior(curve, i)
    if len(E) != len(curve):
        raise ValueError(f"field has {len(E)} samples, curve has {len(curve)}")
    return (_time_derivative(E.values, curve.times, i, order)
            + np.einsum("kij,i,j->k", conn.christoffel(curve.points[i]), curve.velocities[i], E(i)))


def geodesic_defect(conn: ConnectionField, curve: CurveRecord, order: int = 4) -> float:
    """max ||sigma''|| over interior samples."""
    if len(curve) < 3:
        raise DegenerateInputError("geodesic defect needs at least three samples")
    velocity = AlongCurveField.velocity(curve)
    return max(float(np.linalg.norm(covariant_along_curve(conn, curve, velocity, i, order)))
               for i in range(1, len(curve) - 1))


#%% Decomposition along a curve

@dataclass
class _CurveFrame:
    x: np.ndarray
    b: np.ndarray
    J: np.ndarray
    proj_v: np.ndarray
    proj_h: np.ndarray
    X: np.ndarray
    U: np.ndarray
    dphi: np.ndarray
    grad_push: np.ndarray
    scale: float


def _frame(S: SubmersionMap, phi: ScalarField, curve: CurveRecord, i: int, h: float) -> _CurveFrame:
    x = curve.points[i]
    proj_v = vertical_projector(S, x)
    proj_h = np.eye(S.n) - proj_v
    v = curve.velocities[i]
    dphi = phi.gradient(x, h, S.source.domain)
    J = S.differential(x)
    return _CurveFrame(x=x, b=S.project(x), J=J, proj_v=proj_v, proj_h=proj_h, X=proj_h @ v, U=proj_v @ v,
                       dphi=dphi, grad_push=J @ S.g_m.solve(x, dphi), scale=math.exp(2.0 * phi(x)))


def _T(S, conn, a, b, x, h):
    return tensor_T(S, conn, constant_field(a), constant_field(b), x, h)


def _A(S, conn, a, b, x, h):
    return tensor_A(S, conn, constant_field(a), constant_field(b), x, h)


def _conformal_terms(S: SubmersionMap, fr: _CurveFrame, Eh: np.ndarray) -> np.ndarray:
    """X(phi) pi_* E_h + E_h(phi) pi_* X - e^{2phi} pi_*(grad phi) g_b(pi_* X, pi_* E_h)."""
    push_x, push_e = fr.J @ fr.X, fr.J @ Eh
    return ((fr.dphi @ fr.X) * push_e + (fr.dphi @ Eh) * push_x
            - fr.scale * fr.grad_push * S.g_b.inner(fr.b, push_x, push_e))


def decomposition_residual_h(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                             curve: CurveRecord, E: AlongCurveField, i: int, h: float = DEFAULT_STEP,
                             order: int = 2) -> np.ndarray:
    """
    Base-valued residual of the horizontal decomposition of E' at sample i:

        pi_*(H E') = E_*' + pi_*(A_{E_h} U + A_X E_v + T_U E_v)
                     + X(phi) pi_* E_h + E_h(phi) pi_* X - e^{2phi} pi_*(grad phi) g_b(pi_* X, pi_* E_h)

    with X = H sigma', U = V sigma', E_* = pi_* E and E_*' taken with conn_b
    along pi o sigma. Needs a torsion-free conn.
    """
    window, j = _window(curve, i, order)
    local, values = _sub(curve, window), E.values[window]
    fr = _frame(S, phi, local, j, h)
    Eh, Ev = fr.proj_h @ values[j], fr.proj_v @ values[j]

    lhs = fr.J @ fr.proj_h @ covariant_along_curve(conn, local, AlongCurveField(values), j, order)
    pushed = AlongCurveField(np.array([S.differential(x) @ e for x, e in zip(local.points, values)]))
    e_star_prime = covariant_along_curve(conn_b, project_curve(S, local), pushed, j, order)
    tensors = _A(S, conn, Eh, fr.U, fr.x, h) + _A(S, conn, fr.X, Ev, fr.x, h) + _T(S, conn, fr.U, Ev, fr.x, h)
    rhs = e_star_prime + fr.J @ tensors + _conformal_terms(S, fr, Eh)
    return lhs - rhs


def decomposition_residual_v(S: SubmersionMap, conn: ConnectionField, curve: CurveRecord, E: AlongCurveField,
                             i: int, h: float = DEFAULT_STEP, order: int = 2) -> np.ndarray:
    """V(E') - (A_X E_h + T_U E_h + V(E_v')) at sample i."""
    window, j = _window(curve, i, order)
    local, values = _sub(curve, window), E.values[window]
    x = local.points[j]
    proj_v = vertical_projector(S, x)
    proj_h = np.eye(S.n) - proj_v
    v = local.velocities[j]
    X, U = proj_h @ v, proj_v @ v
    Eh = proj_h @ values[j]
    vertical_values = np.array([vertical_projector(S, q) @ e for q, e in zip(local.points, values)])
    Ev_prime = covariant_along_curve(conn, local, AlongCurveField(vertical_values), j, order)
    lhs = proj_v @ covariant_along_curve(conn, local, AlongCurveField(values), j, order)
    rhs = _A(S, conn, X, Eh, x, h) + _T(S, conn, U, Eh, x, h) + proj_v @ Ev_prime
    return lhs - rhs


def sigma_dd_residuals(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                       curve: CurveRecord, i: int, h: float = DEFAULT_STEP, order: int = 2,
                       overrides: Optional[Mapping[str, float]] = None) -> Tuple[ResidualReport, ResidualReport]:
    """Decomposition of sigma'' at sample i (E = sigma')."""
    velocity = AlongCurveField.velocity(curve)
    res_h = decomposition_residual_h(S, conn, conn_b, phi, curve, velocity, i, h, order)
    res_v = decomposition_residual_v(S, conn, curve, velocity, i, h, order)
    x = curve.points[i]
    return (make_report('sigma_dd_horizontal', x, f"sigma' at t={curve.times[i]:.6g}",
                        float(np.linalg.norm(res_h)), overrides),
            make_report('sigma_dd_vertical', x, f"sigma' at t={curve.times[i]:.6g}",
                        float(np.linalg.norm(res_v)), overrides))


#%% Projection of geodesics

def _condition_vector(S: SubmersionMap, conn: ConnectionField, fr: _CurveFrame, h: float,
                      with_tensors: bool = True) -> np.ndarray:
    """pi_*(2 A_X U + T_U U) + 2 X(phi) pi_* X - pi_*(grad phi) ||X||^2."""
    value = 2.0 * (fr.dphi @ fr.X) * (fr.J @ fr.X) - fr.grad_push * float(fr.X @ S.g_m(fr.x) @ fr.X)
    if with_tensors:
        value = value + fr.J @ (2.0 * _A(S, conn, fr.X, fr.U, fr.x, h) + _T(S, conn, fr.U, fr.U, fr.x, h))
    return value


def projection_condition(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                         curve: CurveRecord, i: int, h: float = DEFAULT_STEP, order: int = 4,
                         overrides: Optional[Mapping[str, float]] = None,
                         geodesic_tolerance: float = GEODESIC_INPUT_TOL) -> ResidualReport:
    """
    Geodesic-projection condition at sample i of a geodesic on M

    The residual is the norm of the condition vector, which vanishes exactly
    when pi o sigma is geodesic at that sample. The report also carries the
    directly measured ||sigma_*''|| and whether the two thresholded verdicts agree.

    Raises:
        PreconditionError: ||sigma''|| above geodesic_tolerance at sample i
    """
    accel = covariant_along_curve(conn, curve, AlongCurveField.velocity(curve), i, order)
    if np.linalg.norm(accel) > geodesic_tolerance:
        raise PreconditionError(f"input is not a geodesic: ||sigma''|| = {np.linalg.norm(accel):.3e} "
                                f"at t={curve.times[i]:.6g}", curve.points[i])
    fr = _frame(S, phi, curve, i, h)
    condition = float(np.linalg.norm(_condition_vector(S, conn, fr, h)))
    window, j = _window(curve, i, order)
    base = project_curve(S, _sub(curve, window))
    projected = float(np.linalg.norm(
        covariant_along_curve(conn_b, base, AlongCurveField.velocity(base), j, order)))
    tol = identity_registry.get_tolerance('projection_condition', overrides)
    agree = (condition <= tol) == (projected <= tol)
    return make_report('projection_condition', fr.x, f"geodesic sample t={curve.times[i]:.6g}", condition,
                       overrides, details={'projected_defect': projected, 'agree': agree,
                                           'vertical_speed': float(np.linalg.norm(fr.U))})


def projection_audit(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                     curve: CurveRecord, indices: Optional[Sequence[int]] = None, h: float = DEFAULT_STEP,
                     overrides: Optional[Mapping[str, float]] = None) -> Tuple[List[ResidualReport], ResidualReport]:
    """Per-sample projection reports plus one report counting verdict disagreements."""
    indices = list(indices) if indices is not None else list(range(1, len(curve) - 1))
    reports = [projection_condition(S, conn, conn_b, phi, curve, i, h, overrides=overrides) for i in indices]
    disagreements = sum(1 for r in reports if not r.details['agree'])
    summary = make_report('projection_equivalence', curve.points[0], f"{len(indices)} interior samples",
                          float(disagreements), overrides,
                          details={'samples': len(indices),
                                   'max_condition': max((r.residual_norm for r in reports), default=0.0),
                                   'max_projected_defect': max((r.details['projected_defect'] for r in reports),
                                                               default=0.0)})
    return reports, summary


def horizontal_geodesic_condition(S: SubmersionMap, conn: ConnectionField, phi: ScalarField, curve: CurveRecord,
                                  i: int, h: float = DEFAULT_STEP,
                                  overrides: Optional[Mapping[str, float]] = None) -> ResidualReport:
    """For a horizontal geodesic: |2 X(phi) pi_* X - pi_*(grad phi) ||X||^2| at sample i."""
    _check_interior(curve, i)
    fr = _frame(S, phi, curve, i, h)
    vertical_speed = float(np.linalg.norm(fr.U))
    if vertical_speed > GEODESIC_INPUT_TOL:
        raise PreconditionError(f"curve is not horizontal: ||V sigma'|| = {vertical_speed:.3e}", fr.x)
    residual = float(np.linalg.norm(_condition_vector(S, conn, fr, h, with_tensors=False)))
    return make_report('horizontal_geodesic', fr.x, f"horizontal sample t={curve.times[i]:.6g}", residual,
                       overrides, details={'vertical_speed': vertical_speed})


def halfplane_first_integral(curve: CurveRecord) -> Tuple[np.ndarray, np.ndarray]:
    """
    Centre c and squared radius r^2 of the half-plane semicircle through each sample

    Uses c = x + y y'/x'; samples with x' = 0 (vertical lines) give nan.
    """
    if curve.dim != 2:
        raise UnsupportedGeometryError(f"half-plane first integral needs a 2-d curve, got dim {curve.dim}")
    x, y = curve.points[:, 0], curve.points[:, 1]
    dx, dy = curve.velocities[:, 0], curve.velocities[:, 1]
    with np.errstate(divide='ignore', invalid='ignore'):
        centre = np.where(dx != 0.0, x + y * dy / dx, np.nan)
    return centre, (x - centre) ** 2 + y ** 2


#%% Horizontal lifts of base curves

def horizontal_lift_curve(S: SubmersionMap, alpha: Union[CurveRecord, ParametricCurve], p0,
                          times: Optional[Sequence[float]] = None,
                          drift_tolerance: float = 1e-6) -> CurveRecord:
    """
    Integral curve of the horizontal lift of alpha' through p0

    Args:
        alpha: base curve; a CurveRecord is interpolated with a cubic Hermite spline
        p0: start point on the fiber over alpha(t0)
        times: sample times (required for a ParametricCurve; defaults to alpha.times)
        drift_tolerance: allowed sup distance between pi o sigma and alpha

    Raises:
        PreconditionError: pi(p0) differs from alpha(t0)
        IntegrationError: domain exit or drift above tolerance (partial record attached)
    """
    if times is None:
        if not isinstance(alpha, CurveRecord):
            raise DegenerateInputError("sample times are required to lift a parametric curve")
        times = alpha.times
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise DegenerateInputError("lifting needs at least two sample times")
    position, speed = _interpolant(alpha)
    x0 = as_coords(p0)
    if not np.allclose(S.project(x0), position(times[0]), rtol=0.0, atol=FIBER_MATCH_TOL):
        raise PreconditionError(f"pi(p0) = {S.project(x0).tolist()} differs from alpha(t0) = "
                                f"{np.asarray(position(times[0])).tolist()}", x0)

    rhs = lambda t, x: horizontal_lift_matrix(S, x) @ np.asarray(speed(t), dtype=float)
    points = [x0]

    def record():
        pts = np.array(points)
        return CurveRecord(times[:len(pts)], pts, np.array([rhs(t, x) for t, x in zip(times, pts)]),
                           S.source.chart_id)

    for k in range(len(times) - 1):
        try:
            points.append(_rk4_step(rhs, times[k], points[-1], times[k + 1] - times[k], S.source.domain, S.n))
        except DomainError as e:
            raise IntegrationError(f"lift left the chart domain near t={times[k]:.6g}", e.point,
                                   partial=record()) from None

    lift = record()
    drift = lift_drift(S, lift, alpha)
    if drift > drift_tolerance:
        raise IntegrationError(f"lift drifted {drift:.3e} from the base curve; step too large",
                               lift.points[-1], partial=lift)
    return lift


def lift_drift(S: SubmersionMap, lift: CurveRecord, alpha: Union[CurveRecord, ParametricCurve]) -> float:
    """sup_t |pi(sigma(t)) - alpha(t)|."""
    position, _ = _interpolant(alpha)
    return max(float(np.max(np.abs(S.project(x) - np.asarray(position(t), dtype=float))))
               for t, x in zip(lift.times, lift.points))


def horizontal_self_pairing(S: SubmersionMap, conn: ConnectionField, x, h: float = DEFAULT_STEP) -> float:
    """max ||A_Z Z|| over lifted base coordinate vectors and their pairwise sums."""
    lifts = horizontal_lift_matrix(S, x)
    columns = [lifts[:, a] for a in range(S.m)]
    columns += [lifts[:, a] + lifts[:, c] for a in range(S.m) for c in range(a + 1, S.m)]
    return max(float(np.linalg.norm(_A(S, conn, z, z, x, h))) for z in columns)


def lift_geodesic_check(S: SubmersionMap, conn: ConnectionField, conn_b: ConnectionField, phi: ScalarField,
                        alpha: Union[CurveRecord, ParametricCurve], p0, times: Optional[Sequence[float]] = None,
                        h: float = DEFAULT_STEP, overrides: Optional[Mapping[str, float]] = None,
                        hypothesis_samples: int = 5) -> Tuple[ResidualReport, CurveRecord]:
    """
    Is the horizontal lift of a base geodesic a geodesic, and does the
    conformal condition 2 X(phi) pi_* X = pi_*(grad phi) ||X||^2 predict it?

    The check only applies when A_Z Z = 0 for horizontal Z; otherwise the
    report status is "inapplicable" and carries the measured ||A_Z Z||.

    Returns:
        tuple: (lift_equivalence report, lifted curve)
    """
    if not isinstance(alpha, CurveRecord) and times is None:
        raise DegenerateInputError("sample times are required to check a parametric base curve")
    base = alpha if isinstance(alpha, CurveRecord) else alpha.sample(times, S.target.chart_id)
    base_defect = geodesic_defect(conn_b, base)
    if base_defect > GEODESIC_INPUT_TOL:
        raise PreconditionError(f"base curve is not a geodesic: ||alpha''|| = {base_defect:.3e}", base.points[0])

    lift = horizontal_lift_curve(S, alpha, p0, times if times is not None else base.times)
    tol = identity_registry.get_tolerance('lift_drift', overrides)
    hypothesis_tol = identity_registry.get_tolerance('lift_hypothesis', overrides)
    interior = range(1, len(lift) - 1)
    gate_idx = np.unique(np.linspace(0, len(lift) - 1, hypothesis_samples).astype(int))
    a_zz = max(horizontal_self_pairing(S, conn, lift.points[i], h) for i in gate_idx)
    details = {'A_ZZ': a_zz, 'drift': lift_drift(S, lift, alpha), 'base_defect': base_defect}
    inputs = f"lift of {getattr(alpha, 'label', 'alpha')} from {as_coords(p0).tolist()}"

    if a_zz > hypothesis_tol:
        logger.info("A_ZZ = {:.3e} along the lift; lift check inapplicable", a_zz)
        return make_report('lift_equivalence', as_coords(p0), inputs, float('nan'), overrides,
                           status="inapplicable", details=details,
                           note=f"inapplicable: A_ZZ != 0 (measured {a_zz:.3e})"), lift

    defect = geodesic_defect(conn, lift)
    condition = max(float(np.linalg.norm(_condition_vector(S, conn, _frame(S, phi, lift, i, h), h,
                                                           with_tensors=False)))
                    for i in interior)
    lift_is_geodesic, condition_holds = defect <= tol, condition <= tol
    details.update({'geodesic_defect': defect, 'condition_residual': condition,
                    'lift_is_geodesic': lift_is_geodesic, 'condition_holds': condition_holds})
    return make_report('lift_equivalence', as_coords(p0), inputs,
                       0.0 if lift_is_geodesic == condition_holds else 1.0, overrides, details=details), lift
