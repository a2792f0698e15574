"""
Stokes Relations Module for Canon

Assembles the Stokes relation of a canonical form: one integral per edge
contraction plus products of integrals over motic subgraphs and their
quotients, summed with the orientations induced on the faces of the
Feynman simplex.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from canon.forms import (
    FIRST_KIND, QUATERNIONIC_KIND, SECOND_KIND, FormSpec, FormSpecError, Generator,
    omega_numerator, realize, shuffle_sign, vanishes_structurally,
)
from canon.graph_core import (
    Graph, GraphError, classify_subgraph, contract, loop_number, motic_subgraphs, subgraph_graph,
)
from canon.integrator import (
    IntegralConfig, IntegralResult, integrate, integrate_parametric,
)
from canon.kinematics import Kinematics, KinematicsError
from canon.symanzik import graph_ring, xi

# Configure logging
logger = logging.getLogger(__name__)

UV_CASE = 'core'
MM_CASE = 'mass-momentum'


class StokesError(ValueError):
    """Raised when a Stokes relation cannot be assembled."""


@dataclass
class StokesReport:
    """
    Terms of one Stokes relation.

    edge_terms hold one row per contracted edge; product_terms one row per
    motic subgraph and coproduct term of the right degree.
    """
    graph: str
    form: str
    edge_terms: List[Dict[str, Any]] = field(default_factory=list)
    product_terms: List[Dict[str, Any]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    cross_checks: List[Dict[str, Any]] = field(default_factory=list)

    def _all_terms(self) -> List[Dict[str, Any]]:
        return self.edge_terms + self.product_terms

    @property
    def total(self) -> complex:
        return complex(sum(complex(*t['estimate']) for t in self._all_terms()))

    @property
    def stderr(self) -> float:
        return math.sqrt(sum(t['stderr'] ** 2 for t in self._all_terms()))

    @property
    def scale(self) -> float:
        return max((abs(complex(*t['estimate'])) for t in self._all_terms()), default=0.0)

    @property
    def residual_ratio(self) -> float:
        scale = self.scale
        return abs(self.total) / scale if scale else 0.0

    def consistent(self, sigmas: float = 3.0) -> bool:
        """True when |total| is within the given number of combined standard errors."""
        return abs(self.total) <= sigmas * self.stderr or self.scale == 0.0

    def passed(self, tolerance: float = 5e-3, sigmas: float = 3.0) -> bool:
        return self.residual_ratio < tolerance or self.consistent(sigmas)

    def to_dict(self) -> Dict[str, Any]:
        total = self.total
        return {
            'graph': self.graph,
            'form': self.form,
            'edge_terms': self.edge_terms,
            'product_terms': self.product_terms,
            'total': [total.real, total.imag],
            'stderr': self.stderr,
            'scale': self.scale,
            'residual_ratio': self.residual_ratio,
            'consistent': self.consistent(),
            'cross_checks': self.cross_checks,
            'config': self.config,
        }

    def to_dataframe(self) -> pd.DataFrame:
        """All terms as one table, edge terms first."""
        rows = []
        for t in self.edge_terms:
            rows.append({
                'Term': f"G/{t['edge']}",
                'Type': 'edge',
                'Estimate (re)': t['estimate'][0],
                'Estimate (im)': t['estimate'][1],
                'Std. Error': t['stderr'],
                'Method': t['method'],
            })
        for t in self.product_terms:
            rows.append({
                'Term': f"{{{','.join(map(str, t['gamma']))}}}: {t['left']} | {t['right']}",
                'Type': t['case'],
                'Estimate (re)': t['estimate'][0],
                'Estimate (im)': t['estimate'][1],
                'Std. Error': t['stderr'],
                'Method': 'structural-zero' if t['structural_zero'] else 'product',
            })
        return pd.DataFrame(rows, columns=['Term', 'Type', 'Estimate (re)', 'Estimate (im)', 'Std. Error', 'Method'])


def recast(spec: FormSpec, mapping: Dict[str, str]) -> FormSpec:
    """
    Change generator kinds; generators with no realization in the new kind
    (first kind in degrees 4k+3) make their monomial vanish.
    """
    terms = {}
    for monomial, coeff in spec.terms.items():
        try:
            terms[tuple(Generator(mapping.get(g.kind, g.kind), g.degree) for g in monomial)] = coeff
        except FormSpecError:
            continue
    return FormSpec(terms)


def _result_row(result: IntegralResult) -> Dict[str, Any]:
    row = result.to_dict()
    row['estimate'] = [float(np.real(result.estimate)), float(np.imag(result.estimate))]
    return row


def _run(tasks: List[Callable[[], Any]], workers: int) -> List[Any]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda task: task(), tasks))
    return [task() for task in tasks]


def product_term_plan(graph: Graph, kin: Kinematics, spec: FormSpec) -> List[Dict[str, Any]]:
    """
    Motic product terms of the Stokes relation, before integration.

    For a core subgraph that is not m.m. the subgraph carries first-kind
    forms and the quotient keeps the original kinds; for an m.m. subgraph
    the quotient is scaleless and carries first-kind forms.

    Returns:
        List of dicts with gamma, case, the two graphs and specs, and sign
    """
    order = graph.edge_ids
    plan = []
    for sub in motic_subgraphs(graph, kin):
        gamma = sub.sorted_edges()
        n = len(gamma)
        rest = [e for e in order if e not in gamma]
        s_gamma = shuffle_sign([order.index(e) for e in list(gamma) + rest])
        flags = classify_subgraph(graph, gamma, kin)
        quotient = contract(graph, gamma).with_orientation(1)
        if flags.mm:
            case = MM_CASE
            left_graph = subgraph_graph(graph, gamma, keep_legs=True)
            left_kin = kin
        else:
            case = UV_CASE
            left_graph = subgraph_graph(graph, gamma, keep_legs=False)
            left_kin = kin.restricted(())
        if not left_graph.is_connected():
            raise StokesError(f"Motic subgraph {set(gamma)} of {graph.name!r} is not connected")
        h_left = loop_number(left_graph)
        h_right = loop_number(quotient)

        for left, right, coproduct_sign in spec.coproduct():
            if left.is_zero() or left.degree != n - 1:
                continue
            if case == MM_CASE:
                left_spec = left
                right_spec = recast(right, {SECOND_KIND: FIRST_KIND, QUATERNIONIC_KIND: FIRST_KIND})
            else:
                left_spec = recast(left, {SECOND_KIND: FIRST_KIND, QUATERNIONIC_KIND: FIRST_KIND})
                right_spec = right
            structural = (
                left_spec.is_zero() or right_spec.is_zero()
                or vanishes_structurally(left_spec, h_left)
                or vanishes_structurally(right_spec, h_right)
            )
            plan.append({
                'gamma': list(gamma),
                'case': case,
                'left': str(left_spec),
                'right': str(right_spec),
                'left_spec': left_spec,
                'right_spec': right_spec,
                'left_graph': left_graph,
                'left_kin': left_kin,
                'right_graph': quotient,
                'sign': graph.orientation * (-1) ** n * s_gamma * coproduct_sign,
                'structural_zero': structural,
            })
    return plan


def stokes_residual(graph: Graph, kin: Kinematics, spec: FormSpec,
                    cfg: Optional[IntegralConfig] = None) -> StokesReport:
    """
    Evaluate every term of the Stokes relation for a form of degree N-2.

    Args:
        graph (Graph): Connected graph with its orientation
        kin (Kinematics): Generic kinematics
        spec (FormSpec): Form of degree e_G - 2 without o1
        cfg (IntegralConfig, optional): Sampling configuration; term j uses
            the sub-seed [seed, j]

    Returns:
        StokesReport: Per-term estimates, total and residual ratio

    Raises:
        StokesError: On a degree mismatch or an o1 factor
        KinematicsError: On non-generic kinematics
    """
    cfg = cfg or IntegralConfig.from_settings()
    cfg.validate()
    if spec.is_exceptional():
        raise StokesError("Stokes relations are not assembled for o1")
    if spec.degree != graph.num_edges - 2:
        raise StokesError(
            f"Form {spec} has degree {spec.degree}; {graph.name!r} needs {graph.num_edges - 2}"
        )
    if not graph.is_connected():
        raise GraphError(f"Graph {graph.name!r} is not connected")
    if not kin.is_generic(graph.leg_indices):
        raise KinematicsError(f"Kinematics are not generic for {graph.name!r}")

    report = StokesReport(graph.name, str(spec), config=cfg.to_dict())
    plan = product_term_plan(graph, kin, spec)
    logger.info(f"Stokes relation of {spec} on {graph.name!r}: "
                f"{graph.num_edges} edge terms, {len(plan)} product terms")

    tasks = []
    for j, edge_id in enumerate(graph.edge_ids):
        quotient = contract(graph, [edge_id])
        sub_cfg = cfg.with_seed([cfg.seed, j])
        tasks.append(lambda q=quotient, c=sub_cfg: integrate(q, kin, spec, c))
    for j, term in enumerate(plan, start=graph.num_edges):
        if term['structural_zero']:
            tasks.append(lambda: None)
            continue
        left_cfg = cfg.with_seed([cfg.seed, j, 0])
        right_cfg = cfg.with_seed([cfg.seed, j, 1])
        tasks.append(lambda t=term, lc=left_cfg, rc=right_cfg: (
            integrate(t['left_graph'], t['left_kin'], t['left_spec'], lc),
            integrate(t['right_graph'], kin, t['right_spec'], rc),
        ))
    results = _run(tasks, cfg.workers)

    for edge_id, result in zip(graph.edge_ids, results):
        row = _result_row(result)
        row['edge'] = edge_id
        report.edge_terms.append(row)

    for term, result in zip(plan, results[graph.num_edges:]):
        row = {k: v for k, v in term.items() if k in ('gamma', 'case', 'left', 'right', 'sign', 'structural_zero')}
        if result is None:
            row.update({'estimate': [0.0, 0.0], 'stderr': 0.0, 'left_estimate': [0.0, 0.0],
                        'right_estimate': [0.0, 0.0]})
        else:
            left, right = result
            value = term['sign'] * left.estimate * right.estimate
            stderr = math.hypot(abs(right.estimate) * left.stderr, abs(left.estimate) * right.stderr)
            row.update({
                'estimate': [value.real, value.imag],
                'stderr': stderr,
                'left_estimate': [left.estimate.real, left.estimate.imag],
                'right_estimate': [right.estimate.real, right.estimate.imag],
            })
        report.product_terms.append(row)

    logger.info(f"Stokes residual ratio for {graph.name!r}: {report.residual_ratio:.3g}")
    return report


def five_term_box(kin: Kinematics, cfg: Optional[IntegralConfig] = None,
                  cross_check: bool = False, pentagon: Optional[Graph] = None) -> StokesReport:
    """
    The five-term relation between massive boxes obtained from the Stokes
    relation of the second-kind 3-form on the pentagon.

    Args:
        kin (Kinematics): Five generic dim 2 momenta and five masses
        cfg (IntegralConfig, optional): Sampling configuration
        cross_check (bool): Also integrate each box through the scalar
            parametric integrand N Omega / Xi^2
        pentagon (Graph, optional): Defaults to the built-in pentagon

    Returns:
        StokesReport: Five edge terms and no product terms
    """
    from canon.library import load_graph

    if kin.dim != 2:
        raise StokesError("The five-term relation uses dim 2 kinematics")
    graph = pentagon or load_graph('pentagon')
    cfg = cfg or IntegralConfig.from_settings()
    spec = FormSpec.parse('p3')
    report = stokes_residual(graph, kin, spec, cfg)
    if report.product_terms:
        logger.warning(f"Pentagon produced {len(report.product_terms)} motic product terms")

    if cross_check:
        for j, (edge_id, row) in enumerate(zip(graph.edge_ids, report.edge_terms)):
            box = contract(graph, [edge_id])
            ring = graph_ring(box)
            base = xi(box, kin, ring)
            numerator = omega_numerator(realize(spec, box, kin), base, 2)
            oracle = integrate_parametric(box, kin, 0, 2, numerator, cfg.with_seed([cfg.seed, 100 + j]))
            value = box.orientation * oracle.estimate
            difference = abs(complex(*row['estimate']) - value)
            combined = math.hypot(row['stderr'], oracle.stderr)
            report.cross_checks.append({
                'edge': edge_id,
                'parametric': [value.real, value.imag],
                'stderr': oracle.stderr,
                'difference': difference,
                'within_3_sigma': difference <= 3 * combined,
            })
    return report
