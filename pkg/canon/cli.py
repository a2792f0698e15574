"""
Command Line Interface for Canon

Subcommands: psi, phi, xi, forest, laplacian, form, integrate,
verify-stokes, five-term and selftest. Exit codes: 0 on success, 1 when a
verification fails, 2 on input errors.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from canon import __version__
from canon.config import configure_logging, get_settings
from canon.exporter import ResultsExporter, RunManifest, render_json
from canon.forms import (
    PROPERTY_CHECKS, FormConsistencyError, FormSpec, FormSpecError, SingularMatrixError,
    denominator_base, omega_numerator, realize,
)
from canon.graph_core import Edge, Graph, GraphError
from canon.integrator import IntegralConfig, IntegrationError, integrate
from canon.kinematics import Kinematics, KinematicsError, route
from canon.laplacian import (
    LaplacianError, laplacian_bundle, verify_det_identity, verify_minor_identities,
    verify_tadpole_factorization,
)
from canon.library import builtin, builtin_names, load_graph, load_kinematics, random_kinematics, suite
from canon.loader import GraphLoader, InputError
from canon.polynomial import poly_to_json, poly_to_text
from canon.stokes import StokesError, five_term_box, stokes_residual
from canon.symanzik import forest_poly, phi, phi_from_forests, psi, xi

# Configure logging
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (InputError, GraphError, KinematicsError, FormSpecError, IntegrationError,
                StokesError, LaplacianError)


def resolve_inputs(args: argparse.Namespace, need_kinematics: bool = True) -> Tuple[Graph, Optional[Kinematics]]:
    """
    Load the graph argument, a file path or a built-in name, with its
    kinematics: --kinematics, a combined file, or the built-in reference.
    """
    target = args.graph
    kin_path = getattr(args, 'kinematics', None)
    if Path(target).exists():
        graph, kin = GraphLoader().load_pair(target, kin_path)
        if kin is None and graph.name in builtin_names():
            kin = load_kinematics(graph.name)
    else:
        name = Path(target).stem if target.endswith('.json') else target
        graph = load_graph(name)
        kin = GraphLoader().load_kinematics(kin_path) if kin_path else load_kinematics(name)
    if need_kinematics and kin is None:
        raise InputError(f"No kinematics for {graph.name!r}; pass --kinematics")
    return graph, kin


def _inputs(args: argparse.Namespace) -> List[str]:
    return [str(x) for x in (getattr(args, 'graph', None), getattr(args, 'kinematics', None)) if x]


def sampling_config(args: argparse.Namespace) -> IntegralConfig:
    return IntegralConfig.from_settings(
        get_settings(),
        samples=args.samples, seed=args.seed, batches=args.batches,
        sampler=args.sampler, workers=args.workers, precision=args.precision,
    )


def parse_partition(text: str) -> List[List[int]]:
    """'1,3;2,4' -> [[1, 3], [2, 4]]"""
    try:
        return [[int(v) for v in block.split(',') if v.strip()] for block in text.split(';')]
    except ValueError as e:
        raise InputError(f"Bad partition {text!r}; expected e.g. '1,3;2,4'") from e


def _ids(text: Optional[str]) -> Tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(','))
    except ValueError as e:
        raise InputError(f"Bad edge list {text!r}") from e


# Subcommands. Each returns (result dict, text lines, success flag).

Outcome = Tuple[Dict[str, Any], List[str], bool]


def cmd_psi(args) -> Outcome:
    graph, _ = resolve_inputs(args, need_kinematics=False)
    p = psi(graph)
    return {'graph': graph.name, 'psi': poly_to_text(p), 'terms': poly_to_json(p)}, [poly_to_text(p)], True


def cmd_phi(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    p = phi(graph, kin)
    result = {'graph': graph.name, 'phi': poly_to_text(p)}
    ok = True
    if args.check_forests:
        routing = route(graph, kin)
        ok = phi_from_forests(graph, kin, routing) == p
        result['forest_expansion_passed'] = ok
    return result, [poly_to_text(p)], ok


def cmd_xi(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    p = xi(graph, kin)
    return {'graph': graph.name, 'xi': poly_to_text(p)}, [poly_to_text(p)], True


def cmd_forest(args) -> Outcome:
    graph, _ = resolve_inputs(args, need_kinematics=False)
    partition = parse_partition(args.partition)
    p = forest_poly(graph, partition)
    return {'graph': graph.name, 'partition': partition, 'forest': poly_to_text(p)}, [poly_to_text(p)], True


def cmd_laplacian(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    bundle = laplacian_bundle(graph, kin, marked=_ids(args.marked))
    report = verify_det_identity(graph, kin, bundle.routing, bundle.basis, method=args.method)
    result = bundle.to_dict()
    result['det_identity'] = {k: v for k, v in report.items() if k not in ('lhs', 'rhs')}
    ok = report['passed'] and report['psi_passed'] and report['mass_decomposition_passed'] is not False
    lines = ['\t'.join(row) for row in (bundle.lambda_tilde.to_text())]
    lines.append(f"det identity: {'PASS' if ok else 'FAIL'}")
    return result, lines, ok


def cmd_form(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    spec = FormSpec.parse(args.form)
    if args.check:
        report = PROPERTY_CHECKS[args.check](spec, graph, kin)
        line = f"{args.check} {spec} on {graph.name}: {'PASS' if report['passed'] else 'FAIL'}"
        return report, [line], report['passed']

    form = realize(spec, graph, kin)
    result = {'graph': graph.name, 'form': str(spec), 'degree': form.degree}
    lines = [f"degree: {form.degree}"]
    if form.is_zero():
        result.update({'numerator': '0', 'denominator': '1'})
        lines.append('numerator: 0')
        return result, lines, True
    if form.degree == graph.num_edges - 1 and len(spec.terms) == 1 and not spec.is_exceptional():
        base, text = denominator_base(spec, graph, kin, form.ring)
        try:
            numerator = omega_numerator(form, base, 1)
            result.update({'numerator': poly_to_text(numerator), 'denominator': text})
            lines += [f"numerator: {poly_to_text(numerator)}", f"denominator: {text}"]
            return result, lines, True
        except FormConsistencyError:
            logger.info("Form is not a multiple of Omega over its denominator; listing terms")
    result['terms'] = form.to_dict()['terms']
    lines += [f"d{'^d'.join('a%d' % e for e in t['edges'])}: ({t['numerator']})/({t['denominator']})"
              for t in result['terms']]
    return result, lines, True


def cmd_integrate(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    cfg = sampling_config(args)
    result = integrate(graph, kin, FormSpec.parse(args.form), cfg).to_dict()
    result.update({'graph': graph.name, 'form': args.form})
    line = f"{result['estimate'][0]:.10g} {result['estimate'][1]:+.10g}i +- {result['stderr']:.3g}"
    return result, [line], True


def _report_lines(report) -> List[str]:
    lines = [f"G/{t['edge']}: {t['estimate'][0]:.8g} +- {t['stderr']:.2g}" for t in report.edge_terms]
    lines += [f"{t['gamma']} {t['left']} | {t['right']}: {t['estimate'][0]:.8g} +- {t['stderr']:.2g}"
              for t in report.product_terms]
    lines.append(f"total: {report.total.real:.8g} +- {report.stderr:.2g} "
                 f"(residual ratio {report.residual_ratio:.3g})")
    return lines


def cmd_verify_stokes(args) -> Outcome:
    graph, kin = resolve_inputs(args)
    report = stokes_residual(graph, kin, FormSpec.parse(args.form), sampling_config(args))
    if args.excel:
        ResultsExporter().export_to_excel(report, args.excel)
    ok = report.passed(args.tolerance)
    return report.to_dict(), _report_lines(report), ok


def cmd_five_term(args) -> Outcome:
    if args.graph:
        graph, kin = resolve_inputs(args)
    else:
        graph, kin = builtin('pentagon')
        if args.kinematics:
            kin = GraphLoader().load_kinematics(args.kinematics)
    report = five_term_box(kin, sampling_config(args), cross_check=args.cross_check, pentagon=graph)
    if args.excel:
        ResultsExporter().export_to_excel(report, args.excel)
    ok = report.passed(args.tolerance) and all(c['within_3_sigma'] for c in report.cross_checks)
    return report.to_dict(), _report_lines(report), ok


def selftest_checks() -> List[Tuple[str, Callable[[], bool]]]:
    """Exact identities on the built-in graphs."""
    checks = []
    for name, (graph, kin) in suite().items():
        checks.append((f"det-identity {name}",
                       lambda g=graph, k=kin: verify_det_identity(g, k)['passed']))
        checks.append((f"forest-expansion {name}",
                       lambda g=graph, k=kin: phi_from_forests(g, k, route(g, k)) == phi(g, k)))

    def quaternionic_box() -> bool:
        graph = load_graph('box')
        kin = random_kinematics(graph, dim=4, rng=np.random.default_rng(1))
        return verify_det_identity(graph, kin)['passed']

    def box_closed() -> bool:
        graph, kin = builtin('box')
        return PROPERTY_CHECKS['closed'](FormSpec.parse('p3'), graph, kin)['passed']

    def double_bubble_vanishes() -> bool:
        graph, kin = builtin('double_bubble')
        return realize(FormSpec.parse('p3'), graph, kin).is_zero()

    def bubble_o1() -> bool:
        graph, kin = builtin('bubble')
        value = integrate(graph, kin, FormSpec.parse('o1')).estimate
        return abs(value - math.log(kin.mass_sq(1) / kin.mass_sq(2))) < 1e-12

    def dodgson() -> bool:
        return verify_minor_identities(load_graph('wheel3'), 1, 2)['passed']

    def tadpole() -> bool:
        graph, kin = builtin('bubble')
        looped = Graph(graph.vertices, graph.edges + (Edge(3, 1, 1, 0),), graph.legs, 1, 'bubble+tadpole')
        return verify_tadpole_factorization(looped, kin, 3)['passed']

    checks += [
        ('quaternionic-det box', quaternionic_box),
        ('closed p3 box', box_closed),
        ('vanishing p3 double_bubble', double_bubble_vanishes),
        ('o1 integral bubble', bubble_o1),
        ('dodgson wheel3', dodgson),
        ('tadpole bubble', tadpole),
    ]
    return checks


def cmd_selftest(args) -> Outcome:
    results, lines = {}, []
    for name, check in selftest_checks():
        try:
            ok = bool(check())
        except (ArithmeticError, ValueError) as e:
            logger.error(f"{name}: {e}")
            ok = False
        results[name] = ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
    return {'checks': results}, lines, all(results.values())


def _add_common(parser: argparse.ArgumentParser, graph: bool = True, optional_graph: bool = False):
    if graph:
        parser.add_argument('graph', nargs='?' if optional_graph else None,
                            help='Graph JSON file or built-in name')
        parser.add_argument('--kinematics', '-k', help='Kinematics JSON file')
    parser.add_argument('--json', action='store_true', help='Emit JSON with a run manifest')
    parser.add_argument('--compare', action='store_true', help='Omit timing fields from JSON')
    parser.add_argument('--log-level', help='Logging level (default from CANON_LOG_LEVEL)')


def _add_sampling(parser: argparse.ArgumentParser):
    parser.add_argument('--samples', type=int, help='Monte Carlo samples per integral')
    parser.add_argument('--seed', type=int, help='Base seed')
    parser.add_argument('--batches', type=int, help='Batches for the error estimate')
    parser.add_argument('--sampler', choices=['uniform-dirichlet', 'quasi-random'])
    parser.add_argument('--precision', choices=['double', 'single'])
    parser.add_argument('--workers', type=int, help='Worker threads')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='canon',
        description='Graph Laplacians, Symanzik polynomials and canonical forms of Feynman graphs',
    )
    parser.add_argument('--version', action='version', version=f"canon {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('psi', help='First Symanzik polynomial')
    _add_common(p)
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser('phi', help='Second Symanzik polynomial')
    _add_common(p)
    p.add_argument('--check-forests', action='store_true', help='Also check the forest expansion')
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser('xi', help='Mass-corrected second Symanzik polynomial')
    _add_common(p)
    p.set_defaults(func=cmd_xi)

    p = sub.add_parser('forest', help='Spanning forest polynomial')
    _add_common(p)
    p.add_argument('--partition', required=True, help="Vertex blocks, e.g. '1,3;2,4'")
    p.set_defaults(func=cmd_forest)

    p = sub.add_parser('laplacian', help='Generalized Laplacian and determinant identity')
    _add_common(p)
    p.add_argument('--marked', help='Chord edges for the cycle basis, e.g. 1,4')
    p.add_argument('--method', choices=['cofactor', 'bareiss'], default='cofactor')
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser('form', help='Realize a canonical form')
    _add_common(p)
    p.add_argument('--form', required=True, help="Form spec, e.g. 'p3' or 'w5^p3'")
    p.add_argument('--check', choices=sorted(PROPERTY_CHECKS), help='Run a property check')
    p.set_defaults(func=cmd_form)

    p = sub.add_parser('integrate', help='Integrate a canonical form over the simplex')
    _add_common(p)
    _add_sampling(p)
    p.add_argument('--form', required=True)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser('verify-stokes', help='Evaluate the Stokes relation of a form')
    _add_common(p)
    _add_sampling(p)
    p.add_argument('--form', required=True)
    p.add_argument('--tolerance', type=float, default=5e-3)
    p.add_argument('--excel', help='Write the term table to an Excel file')
    p.set_defaults(func=cmd_verify_stokes)

    p = sub.add_parser('five-term', help='Five-term relation of the massive box')
    _add_common(p, optional_graph=True)
    _add_sampling(p)
    p.add_argument('--cross-check', action='store_true', help='Compare each box with the parametric integral')
    p.add_argument('--tolerance', type=float, default=5e-3)
    p.add_argument('--excel', help='Write the term table to an Excel file')
    p.set_defaults(func=cmd_five_term)

    p = sub.add_parser('selftest', help='Run the exact identity suite')
    _add_common(p, graph=False)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        result, lines, ok = args.func(args)
    except INPUT_ERRORS as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SingularMatrixError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED

    if args.json:
        config = {}
        if hasattr(args, 'samples'):
            config = sampling_config(args).to_dict()
        manifest = RunManifest(args.command, _inputs(args), config, config.get('seed'))
        print(render_json(result, manifest, compare=args.compare))
    else:
        print('\n'.join(lines))
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
