"""
Affine connections stored as Christoffel fields.

Index convention: christoffel(x)[k, i, j] = Gamma^k_{ij}, so that
(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_{ij} X^i Y^j.

Curvature follows the sign used by the conformal-submersion fundamental
equations: R(E,F)G = nabla_[E,F] G - nabla_E nabla_F G + nabla_F nabla_E G.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from chart_core import (
    DEFAULT_STEP,
    SingularMetricError,
    as_coords,
    fd_directional,
    lie_bracket,
    partials,
)


@dataclass(frozen=True)
class MetricField:
    """Point -> symmetric positive-definite matrix."""
    eval: Callable[[np.ndarray], np.ndarray]
    dim: int
    chart_id: str = "chart"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(as_coords(x)), dtype=float)

    def _factor(self, x):
        g = self(x)
        if g.shape != (self.dim, self.dim) or not np.all(np.isfinite(g)):
            raise SingularMetricError(f"{self.chart_id}: metric is not a finite {self.dim}x{self.dim} matrix", x)
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise SingularMetricError(f"{self.chart_id}: metric is not symmetric", x)
        try:
            return g, cho_factor(g)
        except LinAlgError as e:
            raise SingularMetricError(f"{self.chart_id}: metric is not positive definite ({e})", x) from e

    def check_spd(self, x) -> None:
        self._factor(as_coords(x))

    def inverse(self, x) -> np.ndarray:
        _, factor = self._factor(as_coords(x))
        return cho_solve(factor, np.eye(self.dim))

    def solve(self, x, rhs) -> np.ndarray:
        """g(x)^{-1} rhs."""
        _, factor = self._factor(as_coords(x))
        return cho_solve(factor, np.asarray(rhs, dtype=float))

    def inner(self, x, u, v) -> float:
        return float(np.asarray(u) @ self(x) @ np.asarray(v))


@dataclass(frozen=True)
class ConnectionField:
    christoffel_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dim: int
    chart_id: str = "chart"
    label: str = "nabla"

    def christoffel(self, x) -> np.ndarray:
        gamma = np.asarray(self.christoffel_fn(as_coords(x)), dtype=float)
        if gamma.shape != (self.dim,) * 3:
            raise ValueError(f"{self.label}: Christoffel array has shape {gamma.shape}, expected {(self.dim,) * 3}")
        return gamma

    def __call__(self, x) -> np.ndarray:
        return self.christoffel(x)

    def perturbed(self, delta: Callable[[np.ndarray], np.ndarray], label: Optional[str] = None) -> "ConnectionField":
        """Connection plus a (1,2)-tensor field delta(x)[k, i, j]."""
        base = self.christoffel
        return ConnectionField(lambda x: base(x) + np.asarray(delta(x), dtype=float),
                               self.dim, self.chart_id, label or f"{self.label}+K")


def flat_connection(dim: int, chart_id: str = "chart") -> ConnectionField:
    zero = np.zeros((dim, dim, dim))
    return ConnectionField(lambda x: zero, dim, chart_id, "flat")


def constant_connection(gamma, chart_id: str = "chart", label: str = "const") -> ConnectionField:
    gamma = np.asarray(gamma, dtype=float)
    return ConnectionField(lambda x: gamma, gamma.shape[0], chart_id, label)


def christoffel_difference(a: ConnectionField, b: ConnectionField, p) -> np.ndarray:
    return a.christoffel(p) - b.christoffel(p)


#%% Covariant derivatives

def covariant_along(conn: ConnectionField, v, Y: Callable, p, h: float = DEFAULT_STEP,
                    domain: Optional[Callable] = None) -> np.ndarray:
    """nabla_v Y at p for a tangent vector v at p."""
    x = as_coords(p)
    v = np.asarray(v, dtype=float)
    y_val = np.asarray(Y(x), dtype=float)
    return fd_directional(Y, x, v, h, domain) + np.einsum("kij,i,j->k", conn.christoffel(x), v, y_val)


def covariant_derivative(conn: ConnectionField, X: Callable, Y: Callable, p, h: float = DEFAULT_STEP,
                         domain: Optional[Callable] = None) -> np.ndarray:
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_{ij} X^i Y^j at p."""
    x = as_coords(p)
    return covariant_along(conn, X(x), Y, x, h, domain)


def covariant_field(conn: ConnectionField, X: Callable, Y: Callable, h: float = DEFAULT_STEP,
                    domain: Optional[Callable] = None) -> Callable[[np.ndarray], np.ndarray]:
    """nabla_X Y as a field, evaluated on fresh stencils wherever it is called."""
    return lambda x: covariant_derivative(conn, X, Y, x, h, domain)


#%% Constructions from a metric

def levi_civita(g: MetricField, h: float = DEFAULT_STEP, domain: Optional[Callable] = None) -> ConnectionField:
    """Koszul formula: Gamma^k_{ij} = 1/2 g^{kl}(d_i g_jl + d_j g_il - d_l g_ij), metric derivatives by FD."""

    def christoffel(x):
        dg = partials(g, x, h, domain)  # dg[a, b, c] = d_a g_bc
        lower = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
        return np.einsum("kl,lij->kij", g.inverse(x), lower)

    return ConnectionField(christoffel, g.dim, g.chart_id, "levi-civita")


def dual_connection(g: MetricField, conn: ConnectionField, h: float = DEFAULT_STEP,
                    domain: Optional[Callable] = None) -> ConnectionField:
    """Dual connection defined by X g(Y,Z) = g(nabla_X Y, Z) + g(Y, dual_X Z).

    In coordinates: dual^m_{ik} = g^{mj} (d_i g_jk - Gamma^l_{ij} g_lk).
    """

    def christoffel(x):
        dg = partials(g, x, h, domain)
        gamma = conn.christoffel(x)
        a = dg - np.einsum("lij,lk->ijk", gamma, g(x))
        return np.einsum("mj,ijk->mik", g.inverse(x), a)

    return ConnectionField(christoffel, g.dim, g.chart_id, f"dual({conn.label})")


def metric_compatibility_defect(g: MetricField, conn: ConnectionField, X: Callable, Y: Callable, Z: Callable,
                                p, h: float = DEFAULT_STEP, domain: Optional[Callable] = None) -> float:
    """X g(Y,Z) - g(nabla_X Y, Z) - g(Y, nabla_X Z); zero for a metric connection."""
    return duality_pairing_defect(g, conn, conn, X, Y, Z, p, h, domain)


def duality_pairing_defect(g: MetricField, conn: ConnectionField, dual: ConnectionField, X: Callable,
                           Y: Callable, Z: Callable, p, h: float = DEFAULT_STEP,
                           domain: Optional[Callable] = None) -> float:
    """X g(Y,Z) - g(nabla_X Y, Z) - g(Y, dual_X Z)."""
    x = as_coords(p)
    pairing = lambda q: g.inner(q, Y(q), Z(q))
    lhs = float(fd_directional(pairing, x, X(x), h, domain))
    rhs = g.inner(x, covariant_derivative(conn, X, Y, x, h, domain), Z(x)) \
        + g.inner(x, Y(x), covariant_derivative(dual, X, Z, x, h, domain))
    return lhs - rhs


#%% Torsion and curvature

def torsion(conn: ConnectionField, X: Callable, Y: Callable, p, h: float = DEFAULT_STEP,
            domain: Optional[Callable] = None) -> np.ndarray:
    """Tor(X,Y) = nabla_X Y - nabla_Y X - [X,Y]."""
    x = as_coords(p)
    return (covariant_derivative(conn, X, Y, x, h, domain)
            - covariant_derivative(conn, Y, X, x, h, domain)
            - lie_bracket(X, Y, x, h, domain))


def _curvature_at_step(conn, E, F, G, x, h, domain):
    bracket = lie_bracket(E, F, x, h, domain)
    nabla_f_g = covariant_field(conn, F, G, h, domain)
    nabla_e_g = covariant_field(conn, E, G, h, domain)
    return (covariant_along(conn, bracket, G, x, h, domain)
            - covariant_derivative(conn, E, nabla_f_g, x, h, domain)
            + covariant_derivative(conn, F, nabla_e_g, x, h, domain))


def curvature(conn: ConnectionField, E: Callable, F: Callable, G: Callable, p, h: float = DEFAULT_STEP,
              domain: Optional[Callable] = None, tolerance: Optional[float] = None) -> np.ndarray:
    """R(E,F)G = nabla_[E,F] G - nabla_E(nabla_F G) + nabla_F(nabla_E G).

    Inner covariant derivatives are re-evaluated as fields on fresh stencils.
    With a tolerance, the stacked FD error is estimated by step doubling and
    a warning is logged when the estimate exceeds it.
    """
    x = as_coords(p)
    value = _curvature_at_step(conn, E, F, G, x, h, domain)
    if tolerance is not None:
        coarse = _curvature_at_step(conn, E, F, G, x, 2.0 * h, domain)
        estimate = float(np.max(np.abs(coarse - value))) / 3.0
        if estimate > tolerance:
            logger.warning("curvature at {}: estimated FD error {:.3e} exceeds tolerance {:.1e} (h={})",
                           x.tolist(), estimate, tolerance, h)
    return value
