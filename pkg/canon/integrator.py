"""
Integrator Module for Canon

Monte Carlo evaluation of canonical integrals over the Feynman simplex,
batch-based error estimates with deterministic sub-seeds, a scalar
parametric path used as an oracle, and nested quadrature for small graphs.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.stats import qmc
from sympy.polys.rings import PolyElement

from canon.config import Settings, get_settings
from canon.forms import (
    FormSpec, NumericForm, SingularMatrixError, simplex_frame, vanishes_structurally,
)
from canon.graph_core import Graph
from canon.kinematics import Kinematics, KinematicsError, Routing
from canon.laplacian import laplacian_bundle
from canon.polynomial import NumericPoly, to_ring
from canon.symanzik import graph_ring, psi, xi

# Configure logging
logger = logging.getLogger(__name__)

SAMPLERS = ('uniform-dirichlet', 'quasi-random')
PRECISIONS = {'double': np.complex128, 'single': np.complex64}
CHUNK = 8192


class IntegrationError(ValueError):
    """Raised for integrals that cannot be set up."""


@dataclass(frozen=True)
class IntegralConfig:
    """Sampling configuration for one integral."""
    sampler: str = 'uniform-dirichlet'
    samples: int = 200_000
    seed: int = 0
    batches: int = 20
    precision: str = 'double'
    workers: int = 1

    def validate(self) -> None:
        """
        Raises:
            IntegrationError: If the configuration is inconsistent
        """
        if self.sampler not in SAMPLERS:
            raise IntegrationError(f"Unknown sampler {self.sampler!r}; choose from {', '.join(SAMPLERS)}")
        if self.precision not in PRECISIONS:
            raise IntegrationError(f"Unknown precision {self.precision!r}")
        if self.batches < 2:
            raise IntegrationError("At least two batches are needed for an error estimate")
        if self.samples < self.batches:
            raise IntegrationError(f"{self.samples} samples cannot fill {self.batches} batches")
        if self.workers < 1:
            raise IntegrationError("workers must be positive")

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None, **overrides) -> 'IntegralConfig':
        settings = settings or get_settings()
        values = {
            'sampler': settings.sampler,
            'samples': settings.samples,
            'seed': settings.seed,
            'batches': settings.batches,
            'precision': settings.precision,
            'workers': settings.workers,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def with_seed(self, seed: Any) -> 'IntegralConfig':
        return replace(self, seed=seed)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if not isinstance(data['seed'], int):
            data['seed'] = list(data['seed'])
        return data


@dataclass(frozen=True)
class IntegralResult:
    estimate: complex
    stderr: float
    samples: int
    seconds: float
    method: str = 'monte-carlo'

    @property
    def real(self) -> float:
        return float(np.real(self.estimate))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'estimate': [float(np.real(self.estimate)), float(np.imag(self.estimate))],
            'stderr': float(self.stderr),
            'samples': int(self.samples),
            'seconds': round(float(self.seconds), 6),
            'method': self.method,
        }


def exact_result(value: complex, method: str, start: Optional[float] = None) -> IntegralResult:
    seconds = time.perf_counter() - start if start is not None else 0.0
    return IntegralResult(complex(value), 0.0, 0, seconds, method)


def simplex_volume(n: int) -> float:
    """Lebesgue volume of the slice sum a = 1 in the first N-1 coordinates."""
    return 1.0 / math.factorial(max(n - 1, 0))


def sample_simplex(rng: np.random.Generator, n: int, size: int, sampler: str = 'uniform-dirichlet') -> np.ndarray:
    """
    Uniform points of the open simplex {a_i > 0, sum a_i = 1}, shape (size, n).

    The quasi-random sampler maps scrambled Sobol points of the (N-1)-cube
    to the simplex through sorted spacings.
    """
    if n == 1:
        return np.ones((size, 1))
    if sampler == 'uniform-dirichlet':
        return rng.dirichlet(np.ones(n), size=size)
    engine = qmc.Sobol(d=n - 1, scramble=True, seed=rng)
    u = np.sort(engine.random(size), axis=1)
    padded = np.hstack([np.zeros((size, 1)), u, np.ones((size, 1))])
    return np.clip(np.diff(padded, axis=1), np.finfo(float).tiny, None)


def _batch_sizes(cfg: IntegralConfig) -> List[int]:
    per_batch = cfg.samples // cfg.batches
    return [per_batch] * cfg.batches


def run_batches(integrand: Callable[[np.ndarray], np.ndarray], n: int, cfg: IntegralConfig,
                method: str = 'monte-carlo') -> IntegralResult:
    """
    Average an integrand over the simplex in independent batches.

    Args:
        integrand: Maps points (S, N) to values (S,)
        n (int): Number of simplex coordinates
        cfg (IntegralConfig): Sampling configuration

    Returns:
        IntegralResult: Mean of the batch means times the slice volume
    """
    cfg.validate()
    start = time.perf_counter()
    sizes = _batch_sizes(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.batches)

    def batch_mean(args) -> complex:
        child, size = args
        rng = np.random.default_rng(child)
        points = sample_simplex(rng, n, size, cfg.sampler)
        total = 0j
        for lo in range(0, size, CHUNK):
            total += complex(np.sum(integrand(points[lo:lo + CHUNK]), dtype=np.complex128))
        return total / size

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            means = list(pool.map(batch_mean, zip(seeds, sizes)))
    else:
        means = [batch_mean(args) for args in zip(seeds, sizes)]

    means = np.asarray(means, dtype=np.complex128)
    mean = complex(np.mean(means))
    spread = float(np.sum(np.abs(means - mean) ** 2))
    stderr = math.sqrt(spread / (cfg.batches * (cfg.batches - 1)))
    vol = simplex_volume(n)
    seconds = time.perf_counter() - start
    logger.debug(f"{method}: {sum(sizes)} samples in {seconds:.2f}s")
    return IntegralResult(mean * vol, stderr * vol, sum(sizes), seconds, method)


def _log_ratio_limits(graph: Graph, kin: Kinematics) -> Optional[complex]:
    """logF(1,0) - logF(0,1) for F = Xi^h / Psi^(h+1) on a two-edge graph."""
    ring = graph_ring(graph)
    h = graph.loop_number()
    psi_g = NumericPoly(psi(graph, ring))
    xi_g = NumericPoly(xi(graph, kin, ring))
    corners = np.array([[1.0, 0.0], [0.0, 1.0]])
    p = psi_g(corners)
    x = xi_g(corners)
    if np.any(p == 0) or (h and np.any(x == 0)):
        return None
    log_f = h * np.log(x.astype(np.complex128)) - (h + 1) * np.log(p.astype(np.complex128))
    return complex(log_f[0] - log_f[1])


def integrate(graph: Graph, kin: Kinematics, spec: FormSpec, cfg: Optional[IntegralConfig] = None,
              routing: Optional[Routing] = None, basis: Optional[Sequence[Mapping[int, int]]] = None,
              exact: bool = True) -> IntegralResult:
    """
    Integrate a canonical form over the Feynman simplex of a graph.

    The form is pulled back to the slice sum a = 1 with tangent frame
    e_i - e_N; the sign (-1)^N times the graph orientation aligns that frame
    with the orientation of the simplex.

    Args:
        graph (Graph): Connected graph with its orientation
        kin (Kinematics): Generic kinematics
        spec (FormSpec): Form of degree N - 1
        cfg (IntegralConfig, optional): Sampling configuration
        routing, basis: Optional Laplacian choices
        exact (bool): Use the antiderivative for o1 on two-edge graphs

    Returns:
        IntegralResult: Estimate and standard error

    Raises:
        IntegrationError: On a degree mismatch
        KinematicsError: On non-generic kinematics
        SingularMatrixError: If a Laplacian is singular at a sample point
    """
    cfg = cfg or IntegralConfig.from_settings()
    cfg.validate()
    start = time.perf_counter()
    n = graph.num_edges
    if spec.is_zero():
        return exact_result(0, 'zero', start)
    if spec.degree != n - 1:
        raise IntegrationError(f"Form {spec} has degree {spec.degree}, {graph.name!r} needs {n - 1}")
    if not kin.is_generic(graph.leg_indices):
        raise KinematicsError(f"Kinematics are not generic for {graph.name!r}")
    bundle = laplacian_bundle(graph, kin, routing, basis)
    if not spec.is_exceptional() and vanishes_structurally(spec, bundle.h):
        return exact_result(0, 'structural-zero', start)

    sign = graph.orientation * (-1) ** n
    if spec.is_exceptional() and exact and n == 2:
        limits = _log_ratio_limits(graph, kin)
        if limits is not None:
            coeff = complex(next(iter(spec.terms.values())))
            return exact_result(sign * coeff * limits, 'antiderivative', start)

    numeric = NumericForm(spec, bundle, cfg.dtype)
    frame = simplex_frame(n)

    def integrand(points: np.ndarray) -> np.ndarray:
        return sign * numeric.evaluate(points, frame)

    if n == 1:
        value = integrand(np.ones((1, 1)))[0]
        return exact_result(value, 'point', start)
    result = run_batches(integrand, n, cfg)
    logger.info(f"Integral of {spec} over {graph.name!r}: {result.estimate:.6g} +- {result.stderr:.2g}")
    return result


def _parametric_integrand(graph: Graph, kin: Kinematics, a: int, b: int,
                          numerator: Optional[PolyElement]) -> Callable[[np.ndarray], np.ndarray]:
    ring = graph_ring(graph)
    num = NumericPoly(to_ring(numerator, ring) if numerator is not None else ring.one)
    psi_g = NumericPoly(psi(graph, ring))
    xi_g = NumericPoly(xi(graph, kin, ring)) if b else None

    def integrand(points: np.ndarray) -> np.ndarray:
        value = num(points).astype(np.complex128)
        if a:
            value = value / psi_g(points) ** a
        if b:
            value = value / xi_g(points) ** b
        return value

    return integrand


def integrate_parametric(graph: Graph, kin: Kinematics, a: int, b: int,
                         numerator: Optional[PolyElement] = None,
                         cfg: Optional[IntegralConfig] = None) -> IntegralResult:
    """
    Monte Carlo estimate of the positively oriented integral of
    N Omega / (Psi^a Xi^b) over the simplex.

    Args:
        graph (Graph): Connected graph
        kin (Kinematics): Kinematics entering Xi
        a, b (int): Powers of Psi and Xi
        numerator (PolyElement, optional): N, defaults to 1
        cfg (IntegralConfig, optional): Sampling configuration

    Returns:
        IntegralResult: Estimate and standard error
    """
    cfg = cfg or IntegralConfig.from_settings()
    integrand = _parametric_integrand(graph, kin, a, b, numerator)
    n = graph.num_edges
    if n == 1:
        return exact_result(integrand(np.ones((1, 1)))[0], 'point')
    return run_batches(integrand, n, cfg, method='parametric')


def quadrature_parametric(graph: Graph, kin: Kinematics, a: int, b: int,
                          numerator: Optional[PolyElement] = None,
                          epsabs: float = 1e-10, epsrel: float = 1e-8) -> IntegralResult:
    """
    Deterministic nested quadrature of the parametric integral for graphs
    with at most four edges.
    """
    n = graph.num_edges
    if n > 4:
        raise IntegrationError("Nested quadrature is limited to graphs with at most 4 edges")
    start = time.perf_counter()
    integrand = _parametric_integrand(graph, kin, a, b, numerator)
    if n == 1:
        return exact_result(integrand(np.ones((1, 1)))[0], 'quadrature', start)

    def point(args) -> np.ndarray:
        coords = list(args)
        return np.array([coords + [1.0 - sum(coords)]])

    def real_part(*args):
        return float(np.real(integrand(point(args))[0]))

    def imag_part(*args):
        return float(np.imag(integrand(point(args))[0]))

    def bound(i):
        return lambda *outer: [0.0, max(1.0 - sum(outer), 0.0)]

    ranges = [bound(i) for i in range(n - 1)]
    opts = {'epsabs': epsabs, 'epsrel': epsrel, 'limit': 200}
    re, re_err = sp_integrate.nquad(real_part, ranges, opts=opts)
    im, im_err = sp_integrate.nquad(imag_part, ranges, opts=opts)
    seconds = time.perf_counter() - start
    return IntegralResult(complex(re, im), float(math.hypot(re_err, im_err)), 0, seconds, 'quadrature')
