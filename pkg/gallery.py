"""
Gallery - built-in geometry bundles and randomized generators

Every bundle packages a submersion pi: (M, nabla, g_m) -> (B, nabla*, g_b)
together with its conformal factor phi. Bundles are looked up by name
through BUNDLE_FACTORIES; add new geometries there.

Spec strings: "name:key=value,..." e.g. "hyperbolic:n=3",
"warped_line:psi=x", "random_conformal:seed=1,n=3,m=2". Two modifiers work on
any bundle: "perturb=<seed>" (symmetric non-Levi-Civita nabla with induced
nabla*) and "broken=<delta>" (nabla* shifted so CSHD fails).
"""
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import qmc

from chart_core import (
    Chart,
    ConfigError,
    DegenerateInputError,
    ScalarField,
    VectorField,
    sample_points,
)
from connection_ops import ConnectionField, MetricField, flat_connection, levi_civita
from submersion_core import SubmersionMap, induced_connection

MAX_DRAWS = 5


#%% Bundle type

@dataclass(frozen=True)
class GeometryBundle:
    """pi: (M, nabla, g_m) -> (B, nabla*, g_b) with conformal factor phi."""
    name: str
    S: SubmersionMap
    phi: ScalarField
    conn_m: ConnectionField
    conn_b: ConnectionField
    provenance: str
    params: Dict = field(default_factory=dict)
    claims_cshd: bool = True
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def spec(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}:" + ",".join(f"{k}={v}" for k, v in self.params.items())

    def sample_points(self, count: int, seed: int = 0) -> np.ndarray:
        return sample_points(self.S.source, count, seed)

    def manifest(self) -> Dict:
        lower, upper = self.S.source.sample_box
        return {
            'name': self.name,
            'spec': self.spec,
            'params': dict(self.params),
            'dims': {'total': self.S.n, 'base': self.S.m},
            'domain_box': {'lower': list(lower), 'upper': list(upper)},
            'claims': {'cshd': self.claims_cshd, 'conformal': True},
            'tolerances': dict(self.tolerances),
            'provenance': self.provenance,
        }


#%% Shared pieces

def _identity_metric(dim: int, label: str) -> MetricField:
    eye = np.eye(dim)
    return MetricField(lambda x: eye, dim, label)


def _coordinate_projection(n: int, m: int) -> Tuple[Callable, Callable]:
    jac = np.hstack([np.eye(m), np.zeros((m, n - m))])
    return (lambda x: np.asarray(x, dtype=float)[:m]), (lambda x: jac)


def _fiber_sampler(n: int, m: int, lower, upper, seed: int = 0) -> Callable:
    """Fibers of a coordinate projection: base coords fixed, fiber coords from a Halton cloud in a box."""
    lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)

    def sampler(b, count):
        unit = qmc.Halton(d=n - m, scramble=True, seed=seed).random(count)
        points = np.zeros((count, n))
        points[:, :m] = np.asarray(b, dtype=float)
        points[:, m:] = qmc.scale(unit, lower, upper)
        return list(points)

    return sampler


def _box(lower, upper) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    return tuple(float(v) for v in lower), tuple(float(v) for v in upper)


def _projection_bundle(n: int, m: int, g_m: MetricField, g_b: MetricField, source_domain: Callable,
                       source_box, fiber_lower, fiber_upper, label: str) -> SubmersionMap:
    project, jac = _coordinate_projection(n, m)
    source = Chart(n, source_domain, g_m, label, source_box)
    base_box = _box(source_box[0][:m], source_box[1][:m])
    target = Chart(m, lambda b: True, g_b, f"{label}/base", base_box)
    return SubmersionMap(project, source, target, jac, _fiber_sampler(n, m, fiber_lower, fiber_upper),
                         tuple(range(m, n)), label=f"pi[{label}]")


#%% Built-in geometries

def make_flat_product(n: int = 3, m: int = 2) -> GeometryBundle:
    """R^n -> R^m coordinate projection with Euclidean metrics; the affine (phi = 0) case."""
    if not n > m >= 1:
        raise ConfigError(f"flat_product needs n > m >= 1, got n={n}, m={m}")
    S = _projection_bundle(n, m, _identity_metric(n, f"R{n}"), _identity_metric(m, f"R{m}"), lambda x: True,
                           _box([-1.0] * n, [1.0] * n), [-1.0] * (n - m), [1.0] * (n - m), f"R{n}")
    phi = ScalarField(lambda x: 0.0, lambda x: np.zeros(n), "phi=0")
    return GeometryBundle('flat_product', S, phi, flat_connection(n, S.source.chart_id),
                          flat_connection(m, S.target.chart_id),
                          "Euclidean product; phi constant so the pair is an affine submersion",
                          params={'n': n, 'm': m}, tolerances={'cshd': 1e-7})


def hyperbolic_christoffel(x: np.ndarray) -> np.ndarray:
    """Gamma^k_ij = d^k_i f_j + d^k_j f_i - d_ij f_k with f = -log x_n."""
    n = len(x)
    df = np.zeros(n)
    df[-1] = -1.0 / x[-1]
    eye = np.eye(n)
    return np.einsum("ki,j->kij", eye, df) + np.einsum("kj,i->kij", eye, df) - np.einsum("ij,k->kij", eye, df)


def make_hyperbolic_halfspace(n: int = 2) -> GeometryBundle:
    """Upper half-space with g = (1/x_n^2) I projected onto the first n-1 coordinates."""
    if n < 2:
        raise ConfigError(f"hyperbolic half-space needs n >= 2, got {n}")
    eye = np.eye(n)
    g_m = MetricField(lambda x: eye / x[-1] ** 2, n, f"H{n}")
    box = _box([-1.0] * (n - 1) + [0.5], [1.0] * (n - 1) + [4.0])
    S = _projection_bundle(n, n - 1, g_m, _identity_metric(n - 1, f"R{n - 1}"), lambda x: x[-1] > 0.0,
                           box, [0.5], [4.0], f"H{n}")

    def grad(x):
        g = np.zeros(n)
        g[-1] = -1.0 / x[-1]
        return g

    phi = ScalarField(lambda x: -math.log(x[-1]), grad, "phi=-log x_n")
    return GeometryBundle('hyperbolic', S, phi, ConnectionField(hyperbolic_christoffel, n, S.source.chart_id, "H-levi-civita"),
                          flat_connection(n - 1, S.target.chart_id),
                          "upper half-space over Euclidean R^(n-1); Levi-Civita connections on both sides",
                          params={'n': n}, tolerances={'cshd': 1e-5})


# psi name -> (psi, psi')
PSI_FAMILIES: Dict[str, Tuple[Callable[[float], float], Callable[[float], float]]] = {
    'const': (lambda s: 0.3, lambda s: 0.0),
    'x': (lambda s: s, lambda s: 1.0),
    'sin': (lambda s: 0.5 * math.sin(s), lambda s: 0.5 * math.cos(s)),
}


def make_warped_line(psi: Union[str, Tuple[Callable, Callable]] = 'x') -> GeometryBundle:
    """
    R^2 with g_m = e^{2 psi(x)} dx^2 + dy^2 over the line, pi(x, y) = x, phi = psi

    Args:
        psi: a PSI_FAMILIES name or a (psi, psi') pair of functions of x
    """
    if isinstance(psi, str):
        if psi not in PSI_FAMILIES:
            raise ConfigError(f"unknown psi {psi!r}; choose from {sorted(PSI_FAMILIES)}")
        name = psi
        psi_fn, dpsi = PSI_FAMILIES[psi]
    else:
        name = "custom"
        psi_fn, dpsi = psi

    g_m = MetricField(lambda x: np.diag([math.exp(2.0 * psi_fn(x[0])), 1.0]), 2, f"warped[{name}]")
    S = _projection_bundle(2, 1, g_m, _identity_metric(1, "R1"), lambda x: True,
                           _box([-1.0, -1.0], [1.0, 1.0]), [-1.0], [1.0], f"warped[{name}]")
    phi = ScalarField(lambda x: psi_fn(x[0]), lambda x: np.array([dpsi(x[0]), 0.0]), f"phi=psi[{name}]")
    return GeometryBundle('warped_line', S, phi, levi_civita(g_m), flat_connection(1, S.target.chart_id),
                          "warped plane over the line; horizontal distribution integrable with A_Z Z = 0",
                          params={'psi': name}, tolerances={'cshd': 1e-5})


def _smooth_spd(rng: np.random.Generator, size: int, inputs: int):
    """x -> C(x) C(x)^T + 0.5 I with C a tanh-bounded affine family."""
    base = rng.normal(scale=0.5, size=(size, size))
    weights = rng.normal(scale=0.5, size=(inputs, size, size))
    offset = rng.normal(scale=0.5, size=(size, size))

    def metric(z):
        c = base + 0.3 * np.tanh(np.einsum("i,ijk->jk", np.asarray(z, dtype=float), weights) + offset)
        return c @ c.T + 0.5 * np.eye(size)

    return metric


def make_random_conformal(seed: int = 1, n: int = 3, m: int = 2) -> GeometryBundle:
    """
    Block metric g_m = e^{2 phi} g_b(x_base) (+) h(x) over a coordinate projection

    g_b and h are smooth SPD families, phi = 0.5 tanh(quadratic). Draws whose
    metrics are badly conditioned on the sample box are redrawn.
    """
    if not n > m >= 1:
        raise ConfigError(f"random_conformal needs n > m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    halton = qmc.scale(qmc.Halton(d=n, scramble=True, seed=seed).random(16), -np.ones(n), np.ones(n))
    for attempt in range(MAX_DRAWS):
        base_metric = _smooth_spd(rng, m, m)
        fiber_metric = _smooth_spd(rng, n - m, n)
        conds = [np.linalg.cond(base_metric(x[:m])) for x in halton] + [np.linalg.cond(fiber_metric(x)) for x in halton]
        if max(conds) < 1e4:
            break
        logger.debug("random_conformal seed={} draw {} rejected (condition {:.2e})", seed, attempt, max(conds))
    else:
        raise DegenerateInputError(f"random_conformal seed={seed}: no well-conditioned metric in {MAX_DRAWS} draws")

    lin = rng.normal(scale=0.5, size=n)
    quad = rng.normal(scale=0.3, size=(n, n))
    quad = 0.5 * (quad + quad.T)
    shift = rng.normal(scale=0.2)

    def phi_fn(x):
        return 0.5 * math.tanh(lin @ x + 0.5 * x @ quad @ x + shift)

    def phi_grad(x):
        s = lin @ x + 0.5 * x @ quad @ x + shift
        return 0.5 * (1.0 - math.tanh(s) ** 2) * (lin + quad @ x)

    def g_m_fn(x):
        g = np.zeros((n, n))
        g[:m, :m] = math.exp(2.0 * phi_fn(x)) * base_metric(x[:m])
        g[m:, m:] = fiber_metric(x)
        return g

    label = f"rand{seed}[{n},{m}]"
    g_m = MetricField(g_m_fn, n, label)
    g_b = MetricField(base_metric, m, f"{label}/base")
    S = _projection_bundle(n, m, g_m, g_b, lambda x: True, _box([-1.0] * n, [1.0] * n),
                           [-1.0] * (n - m), [1.0] * (n - m), label)
    return GeometryBundle('random_conformal', S, ScalarField(phi_fn, phi_grad, "phi"),
                          levi_civita(g_m), levi_civita(g_b),
                          "seeded block metric; conformal by construction, Levi-Civita connections",
                          params={'seed': seed, 'n': n, 'm': m}, tolerances={'cshd': 1e-5})


#%% Variants

def with_symmetric_perturbation(bundle: GeometryBundle, seed: int = 0, scale: float = 0.3) -> GeometryBundle:
    """
    Replace nabla by Levi-Civita + K, K a constant symmetric (1,2)-tensor,
    and nabla* by the connection induced from it
    """
    n = bundle.S.n
    rng = np.random.default_rng(seed)
    K = rng.normal(scale=scale, size=(n, n, n))
    K = 0.5 * (K + K.transpose(0, 2, 1))
    conn_m = bundle.conn_m.perturbed(lambda x: K, label=f"{bundle.conn_m.label}+K{seed}")
    conn_b, report = induced_connection(bundle.S, conn_m, bundle.phi)
    logger.info("{}: induced connection for K{} (fiber spread {:.2e})", bundle.name, seed, report.residual_norm)
    params = dict(bundle.params, perturb=seed)
    return replace(bundle, conn_m=conn_m, conn_b=conn_b, params=params,
                   provenance=bundle.provenance + f"; nabla = Levi-Civita + symmetric K (seed {seed}), nabla* induced")


def with_broken_base(bundle: GeometryBundle, delta: float = 0.1) -> GeometryBundle:
    """Shift Gamma*^1_11 by delta so the CSHD condition fails."""
    m = bundle.S.m
    shift = np.zeros((m, m, m))
    shift[0, 0, 0] = delta
    params = dict(bundle.params, broken=delta)
    return replace(bundle, conn_b=bundle.conn_b.perturbed(lambda b: shift, label=f"{bundle.conn_b.label}+{delta}"),
                   params=params, claims_cshd=False,
                   provenance=bundle.provenance + f"; nabla* shifted by {delta} in Gamma*^1_11")


def random_vector_field(dim: int, seed: int, scale: float = 1.0) -> VectorField:
    """Affine field a + B x with |a| = scale and small B, so |X| stays O(1) on unit boxes."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=dim)
    a = scale * a / np.linalg.norm(a)
    B = scale * 0.3 * rng.normal(size=(dim, dim)) / dim
    return VectorField(lambda x: a + B @ np.asarray(x, dtype=float), label=f"rand{seed}")


def random_test_fields(bundle: GeometryBundle, seed: int) -> Dict[str, VectorField]:
    """Raw U, V, W, X, Y, Z fields on M for the fundamental equations."""
    return {k: random_vector_field(bundle.S.n, seed * 10 + i) for i, k in enumerate('UVWXYZ')}


#%% Registry

BUNDLE_FACTORIES: Dict[str, Callable[..., GeometryBundle]] = {
    'flat_product': make_flat_product,
    'hyperbolic': make_hyperbolic_halfspace,
    'warped_line': make_warped_line,
    'random_conformal': make_random_conformal,
}

BUNDLE_DESCRIPTIONS = {
    'flat_product': "R^n -> R^m, Euclidean, phi = 0 (params n, m)",
    'hyperbolic': "upper half-space H^n -> R^(n-1), phi = -log x_n (param n)",
    'warped_line': "e^{2 psi(x)} dx^2 + dy^2 -> R, phi = psi (param psi: const | x | sin)",
    'random_conformal': "seeded block metric R^n -> R^m (params seed, n, m)",
}

_MODIFIERS = ('perturb', 'broken')


def _parse_value(text: str) -> Union[int, float, str]:
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_bundle_spec(spec: str) -> Tuple[str, Dict]:
    """Split "name:key=value,..." into the name and a typed parameter dict."""
    name, _, rest = spec.strip().partition(':')
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(','))):
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f"bad bundle parameter {item!r} in {spec!r}; expected key=value")
        params[key.strip()] = _parse_value(value.strip())
    return name, params


def build_bundle(name: str, params: Optional[Dict] = None) -> GeometryBundle:
    """
    Build a registered bundle from its name and parameters

    Args:
        name: key of BUNDLE_FACTORIES
        params: factory keyword arguments plus optional 'perturb' / 'broken' modifiers

    Returns:
        GeometryBundle
    """
    if name not in BUNDLE_FACTORIES:
        raise ConfigError(f"unknown bundle {name!r}; available: {', '.join(sorted(BUNDLE_FACTORIES))}")
    params = dict(params or {})
    modifiers = {k: params.pop(k) for k in _MODIFIERS if k in params}
    try:
        bundle = BUNDLE_FACTORIES[name](**params)
    except TypeError as e:
        raise ConfigError(f"bad parameters for {name}: {e}") from e
    if 'perturb' in modifiers:
        bundle = with_symmetric_perturbation(bundle, seed=int(modifiers['perturb']))
    if 'broken' in modifiers:
        bundle = with_broken_base(bundle, delta=float(modifiers['broken']))
    return bundle


def resolve_bundle(spec: str) -> GeometryBundle:
    """Bundle from a spec string or a manifest JSON path."""
    if spec.endswith('.json') or os.path.isfile(spec):
        try:
            with open(spec, 'r') as f:
                manifest = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read bundle manifest {spec}: {e}") from e
        if 'name' not in manifest:
            raise ConfigError(f"bundle manifest {spec} has no 'name'")
        return build_bundle(manifest['name'], manifest.get('params', {}))
    name, params = parse_bundle_spec(spec)
    return build_bundle(name, params)


def list_bundles() -> List[Dict]:
    return [{'name': name, 'description': BUNDLE_DESCRIPTIONS.get(name, '')} for name in BUNDLE_FACTORIES]
