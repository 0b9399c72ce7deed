"""
Chart core: points, fields and the finite-difference engine.

Every derivative in the lab (Christoffel symbols, brackets, covariant
derivatives, curvature) goes through `fd_directional` or `partials`, so the
whole toolkit shares one error model: central differences, O(h^2).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import qmc

DEFAULT_STEP = 1e-4

ArrayLike = Union[np.ndarray, Sequence[float]]


#%% Errors

class GeometryError(RuntimeError):
    """Base class for every numerical breakdown raised by the lab."""

    def __init__(self, message: str, point: Optional[ArrayLike] = None):
        self.point = None if point is None else np.asarray(point, dtype=float).tolist()
        if self.point is not None:
            message = f"{message} (at point {self.point})"
        super().__init__(message)


class DomainError(GeometryError):
    """A stencil point or trajectory left the chart domain."""

    def __init__(self, message: str, point: Optional[ArrayLike] = None, endpoint: Optional[str] = None):
        self.endpoint = endpoint
        super().__init__(message, point)


class SingularMetricError(GeometryError):
    pass


class NotASubmersionError(GeometryError):
    pass


class DegenerateInputError(GeometryError):
    pass


class ProjectabilityError(GeometryError):
    def __init__(self, message: str, point: Optional[ArrayLike] = None, spread: float = float("nan")):
        self.spread = spread
        super().__init__(message, point)


class PreconditionError(GeometryError):
    pass


class UnsupportedGeometryError(GeometryError):
    pass


class IntegrationError(GeometryError):
    """Integration stopped early; `partial` holds what was integrated so far."""

    def __init__(self, message: str, point: Optional[ArrayLike] = None, partial=None):
        self.partial = partial
        super().__init__(message, point)


class ConfigError(ValueError):
    pass


#%% Domain types

def as_coords(p) -> np.ndarray:
    """Return chart coordinates of a Point or array-like as a float vector."""
    if isinstance(p, Point):
        return p.coords
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class Chart:
    """A single global coordinate chart.

    Attributes:
        dim: chart dimension
        domain: predicate on coordinates, True inside the open domain
        metric: optional MetricField (see connection_ops)
        label: human readable name, also used as chart id
        sample_box: (lower, upper) box used for deterministic sample clouds
    """
    dim: int
    domain: Callable[[np.ndarray], bool] = field(default=lambda x: True, repr=False)
    metric: Optional[object] = field(default=None, repr=False)
    label: str = "chart"
    sample_box: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Chart dimension must be >= 1, got {self.dim}")

    @property
    def chart_id(self) -> str:
        return self.label

    def contains(self, x: ArrayLike) -> bool:
        x = as_coords(x)
        return x.shape == (self.dim,) and bool(np.all(np.isfinite(x))) and bool(self.domain(x))

    def point(self, coords: ArrayLike) -> "Point":
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dim,):
            raise ValueError(f"{self.label}: expected {self.dim} coordinates, got shape {coords.shape}")
        if not self.contains(coords):
            raise DomainError(f"{self.label}: point outside chart domain", coords)
        return Point(coords=coords, chart_id=self.chart_id)


@dataclass(frozen=True)
class Point:
    coords: np.ndarray
    chart_id: str = "chart"

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class ScalarField:
    """Scalar field with an optional analytic gradient."""
    eval: Callable[[np.ndarray], float]
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "f"

    def __call__(self, x) -> float:
        return float(self.eval(as_coords(x)))

    def gradient(self, x, h: float = DEFAULT_STEP, domain: Optional[Callable] = None) -> np.ndarray:
        """Coordinate gradient (d f)_i; analytic when supplied, else central differences."""
        x = as_coords(x)
        if self.gradient_fn is not None:
            return np.asarray(self.gradient_fn(x), dtype=float)
        return partials(self.eval, x, h, domain)


@dataclass(frozen=True)
class VectorField:
    eval: Callable[[np.ndarray], np.ndarray]
    label: str = "X"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(as_coords(x)), dtype=float)


def constant_field(vector: ArrayLike, label: str = "const") -> VectorField:
    vector = np.asarray(vector, dtype=float)
    return VectorField(lambda x: vector, label=label)


def coordinate_field(dim: int, index: int) -> VectorField:
    e = np.zeros(dim)
    e[index] = 1.0
    return constant_field(e, label=f"d{index + 1}")


def scaled_field(f: Callable[[np.ndarray], float], X: Callable) -> VectorField:
    """The field x -> f(x) X(x)."""
    return VectorField(lambda x: f(x) * np.asarray(X(x), dtype=float), label="fX")


#%% Finite differences

def _check_stencil(domain: Optional[Callable], x_plus: np.ndarray, x_minus: np.ndarray):
    if domain is None:
        return
    if not domain(x_plus):
        raise DomainError("stencil endpoint p+h*dir left the chart domain", x_plus, endpoint="plus")
    if not domain(x_minus):
        raise DomainError("stencil endpoint p-h*dir left the chart domain", x_minus, endpoint="minus")


def fd_directional(f: Callable, p, direction: ArrayLike, h: float = DEFAULT_STEP,
                   domain: Optional[Callable] = None):
    """Central difference (f(p + h dir) - f(p - h dir)) / 2h.

    Works for scalar, vector or array valued f. Raises DomainError naming
    the stencil endpoint that left the domain.
    """
    if h <= 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x = as_coords(p)
    d = np.asarray(direction, dtype=float)
    if not np.any(d):
        return np.zeros_like(np.asarray(f(x), dtype=float))
    x_plus = x + h * d
    x_minus = x - h * d
    _check_stencil(domain, x_plus, x_minus)
    return (np.asarray(f(x_plus), dtype=float) - np.asarray(f(x_minus), dtype=float)) / (2.0 * h)


def partials(f: Callable, p, h: float = DEFAULT_STEP, domain: Optional[Callable] = None) -> np.ndarray:
    """All first partials of f at p, stacked on a leading axis: out[i] = d_i f."""
    x = as_coords(p)
    n = x.shape[0]
    eye = np.eye(n)
    return np.stack([fd_directional(f, x, eye[i], h, domain) for i in range(n)])


def lie_bracket(X: Callable, Y: Callable, p, h: float = DEFAULT_STEP,
                domain: Optional[Callable] = None) -> np.ndarray:
    """[X,Y]^k = X^j d_j Y^k - Y^j d_j X^k at p."""
    x = as_coords(p)
    x_val = np.asarray(X(x), dtype=float)
    y_val = np.asarray(Y(x), dtype=float)
    return fd_directional(Y, x, x_val, h, domain) - fd_directional(X, x, y_val, h, domain)


def richardson_order(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Observed convergence order: slope of log(error) against log(step)."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if errors.shape != steps.shape or errors.size < 2:
        raise DegenerateInputError("need at least two (step, error) pairs")
    if np.any(errors <= 0):
        raise DegenerateInputError("errors must be positive to fit a convergence order")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


#%% Sample clouds

def sample_points(chart: Chart, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic scrambled-Halton cloud inside the chart's sample box."""
    if count < 1:
        raise DegenerateInputError("sample count must be positive")
    if chart.sample_box is None:
        raise DegenerateInputError(f"{chart.label} declares no sample box")
    lower, upper = (np.asarray(b, dtype=float) for b in chart.sample_box)
    sampler = qmc.Halton(d=chart.dim, scramble=True, seed=seed)
    points = qmc.scale(sampler.random(count), lower, upper)
    outside = [x for x in points if not chart.contains(x)]
    if outside:
        raise DomainError(f"{chart.label}: sample box is not inside the chart domain", outside[0])
    logger.debug("sampled {} points on {} (seed={})", count, chart.label, seed)
    return points
