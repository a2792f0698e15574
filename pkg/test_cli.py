#!/usr/bin/env python3
"""
Command Line and I/O Test Suite for Canon
Tests the canon subcommands, JSON and Excel export, input loading, settings and the graph library
"""

import io
import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from canon.cli import EXIT_FAILED, EXIT_INPUT, EXIT_OK, main, parse_partition
from canon.config import Settings, get_settings
from canon.exporter import ResultsExporter, RunManifest, render_json, strip_timing
from canon.graph_core import GraphError
from canon.kinematics import ZERO
from canon.library import (
    banana, builtin, builtin_names, load_graph, load_kinematics, random_kinematics,
)
from canon.loader import GraphLoader, InputError
from canon.stokes import UV_CASE, StokesReport


def run_cli(argv):
    """Run the CLI, returning (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def write_json(data):
    tmp_file = tempfile.NamedTemporaryFile('w', suffix='.json', delete=False, encoding='utf-8')
    with tmp_file:
        json.dump(data, tmp_file)
    return tmp_file.name


def toy_report():
    report = StokesReport('toy', 'p3', config={'samples': 100, 'seed': 0})
    report.edge_terms = [
        {'edge': 1, 'estimate': [0.5, 0.0], 'stderr': 0.01, 'method': 'monte-carlo', 'seconds': 0.2},
        {'edge': 2, 'estimate': [-0.5, 0.0], 'stderr': 0.01, 'method': 'monte-carlo', 'seconds': 0.3},
    ]
    report.product_terms = [{
        'gamma': [1, 2], 'case': UV_CASE, 'left': 'w1', 'right': 'p1', 'sign': 1,
        'structural_zero': True, 'estimate': [0.0, 0.0], 'stderr': 0.0,
    }]
    return report


class TestCommands(unittest.TestCase):
    """Test the canon subcommands on built-in graphs"""

    def test_psi(self):
        """Test psi prints the polynomial"""
        code, out, _ = run_cli(['psi', 'bubble'])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.strip(), 'a1+a2')

    def test_unknown_graph(self):
        """Test an unknown graph is an input error"""
        code, _, err = run_cli(['psi', 'no_such_graph'])
        self.assertEqual(code, EXIT_INPUT)
        self.assertIn('no_such_graph', err)

    def test_bad_form(self):
        """Test a nonexistent generator is an input error"""
        code, _, _ = run_cli(['form', 'box', '--form', 'w3'])
        self.assertEqual(code, EXIT_INPUT)

    def test_forest(self):
        """Test forest with a two-block partition"""
        code, out, _ = run_cli(['forest', 'bubble', '--partition', '1;2'])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.strip(), 'a1*a2')
        code, _, _ = run_cli(['forest', 'bubble', '--partition', 'x;2'])
        self.assertEqual(code, EXIT_INPUT)

    def test_phi_with_forest_check(self):
        """Test phi and its forest expansion on the triangle"""
        code, _, _ = run_cli(['phi', 'triangle', '--check-forests'])
        self.assertEqual(code, EXIT_OK)

    def test_laplacian(self):
        """Test the Laplacian listing ends with the identity verdict"""
        code, out, _ = run_cli(['laplacian', 'bubble'])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.strip().splitlines()[-1], 'det identity: PASS')

    def test_form_denominator(self):
        """Test the box p3 form is reported over Xi^2"""
        code, out, _ = run_cli(['form', 'box', '--form', 'p3'])
        self.assertEqual(code, EXIT_OK)
        self.assertIn('denominator: Xi^2', out)

    def test_form_check(self):
        """Test the closedness check from the command line"""
        code, out, _ = run_cli(['form', 'box', '--form', 'p3', '--check', 'closed'])
        self.assertEqual(code, EXIT_OK)
        self.assertIn('PASS', out)

    def test_integrate_json(self):
        """Test integrate emits a manifest with the sampling config"""
        code, out, _ = run_cli(['integrate', 'bubble', '--form', 'o1', '--json', '--seed', '5'])
        self.assertEqual(code, EXIT_OK)
        document = json.loads(out)
        self.assertEqual(document['manifest']['subcommand'], 'integrate')
        self.assertEqual(document['manifest']['seed'], 5)
        self.assertEqual(document['result']['method'], 'antiderivative')

    def test_compare_mode(self):
        """Test --compare output is free of timing fields and stable"""
        first = run_cli(['xi', 'bubble', '--json', '--compare'])[1]
        second = run_cli(['xi', 'bubble', '--json', '--compare'])[1]
        self.assertNotIn('timestamp', first)
        self.assertEqual(first, second)
        self.assertEqual(json.loads(first)['result']['graph'], 'bubble')

    def test_graph_file(self):
        """Test a combined graph and kinematics file"""
        graph, kin = builtin('bubble')
        path = write_json({'graph': graph.to_dict(), 'kinematics': kin.to_dict()})
        try:
            code, out, _ = run_cli(['xi', path])
            self.assertEqual(code, EXIT_OK)
            self.assertIn('a1^2', out)
        finally:
            os.unlink(path)

    def test_verify_stokes_with_excel(self):
        """Test verify-stokes writes its term table"""
        with tempfile.NamedTemporaryFile(suffix='.xlsx', delete=False) as tmp_file:
            try:
                code, out, _ = run_cli(['verify-stokes', 'box', '--form', 'w1^p1', '--samples', '2000',
                                        '--batches', '4', '--excel', tmp_file.name])
                self.assertEqual(code, EXIT_OK)
                self.assertIn('total:', out)
                self.assertEqual(pd.ExcelFile(tmp_file.name).sheet_names[0], 'Summary')
            finally:
                try:
                    os.unlink(tmp_file.name)
                except OSError:
                    pass

    def test_selftest(self):
        """Test the exact identity suite passes"""
        code, out, _ = run_cli(['selftest'])
        self.assertEqual(code, EXIT_OK, out)
        self.assertNotIn('FAIL', out)

    def test_parse_partition(self):
        """Test block parsing"""
        self.assertEqual(parse_partition('1,3;2,4'), [[1, 3], [2, 4]])
        with self.assertRaises(InputError):
            parse_partition('1,a')

    def test_exit_codes_distinct(self):
        """Test the three exit codes"""
        self.assertEqual(len({EXIT_OK, EXIT_FAILED, EXIT_INPUT}), 3)


class TestExporter(unittest.TestCase):
    """Test JSON and Excel output"""

    def test_strip_timing(self):
        """Test nested timing fields are removed"""
        data = {'seconds': 1, 'rows': [{'seconds': 2, 'value': 3}], 'timestamp': 'now'}
        self.assertEqual(strip_timing(data), {'rows': [{'value': 3}]})

    def test_render_json(self):
        """Test the document layout with and without timing"""
        manifest = RunManifest('psi', ['bubble'])
        full = json.loads(render_json({'psi': 'a1+a2'}, manifest))
        self.assertIn('timestamp', full['manifest'])
        self.assertEqual(full['schema_version'], 1)
        compared = json.loads(render_json({'psi': 'a1+a2'}, manifest, compare=True))
        self.assertNotIn('timestamp', compared['manifest'])
        self.assertEqual(compared['result'], {'psi': 'a1+a2'})

    def test_export_to_excel(self):
        """Test the workbook sheets of a Stokes report"""
        report = toy_report()
        report.cross_checks = [{'edge': 1, 'parametric': [0.5, 0.0], 'stderr': 0.01,
                                'difference': 0.0, 'within_3_sigma': True}]
        with tempfile.NamedTemporaryFile(suffix='.xlsx', delete=False) as tmp_file:
            try:
                ResultsExporter().export_to_excel(report, tmp_file.name)
                workbook = pd.ExcelFile(tmp_file.name)
                self.assertEqual(workbook.sheet_names, ['Summary', 'Edge Terms', 'Product Terms', 'Cross Checks'])
                edges = pd.read_excel(workbook, sheet_name='Edge Terms')
                self.assertEqual(len(edges), 2)
            finally:
                try:
                    os.unlink(tmp_file.name)
                except OSError:
                    pass

    def test_export_to_json(self):
        """Test the JSON file gets a suffix and parses back"""
        with tempfile.TemporaryDirectory() as tmp_dir:
            target = os.path.join(tmp_dir, 'report')
            path = ResultsExporter().export_to_json(toy_report().to_dict(), RunManifest('verify-stokes'),
                                                    target, compare=True)
            self.assertTrue(path.endswith('.json'))
            with open(path, encoding='utf-8') as f:
                document = json.load(f)
            self.assertNotIn('seconds', document['result']['edge_terms'][0])


class TestLoader(unittest.TestCase):
    """Test input validation"""

    def test_missing_file(self):
        """Test a missing file"""
        with self.assertRaises(InputError):
            GraphLoader().load_graph('/nonexistent/graph.json')

    def test_wrong_suffix(self):
        """Test a non-JSON file"""
        with tempfile.NamedTemporaryFile(suffix='.txt', delete=False) as tmp_file:
            try:
                with self.assertRaises(InputError):
                    GraphLoader().read_json(tmp_file.name)
            finally:
                os.unlink(tmp_file.name)

    def test_malformed_and_non_object(self):
        """Test broken JSON and a top-level list"""
        for text in ('{"edges": [', '[1, 2]'):
            tmp_file = tempfile.NamedTemporaryFile('w', suffix='.json', delete=False)
            with tmp_file:
                tmp_file.write(text)
            try:
                with self.assertRaises(InputError, msg=text):
                    GraphLoader().read_json(tmp_file.name)
            finally:
                os.unlink(tmp_file.name)

    def test_invalid_graph(self):
        """Test an edge to an unknown vertex"""
        path = write_json({'vertices': [{'id': 1}], 'edges': [{'id': 1, 'source': 1, 'target': 9}], 'legs': []})
        try:
            with self.assertRaises(InputError):
                GraphLoader().load_graph(path)
        finally:
            os.unlink(path)

    def test_pair_from_two_files(self):
        """Test a graph file with separate kinematics"""
        graph, kin = builtin('triangle')
        graph_path = write_json(graph.to_dict())
        kin_path = write_json(kin.to_dict())
        try:
            loaded, loaded_kin = GraphLoader().load_pair(graph_path, kin_path)
            self.assertEqual(loaded.edge_ids, graph.edge_ids)
            self.assertEqual(loaded_kin.momenta, kin.momenta)
            self.assertIsNone(GraphLoader().load_pair(graph_path)[1])
        finally:
            os.unlink(graph_path)
            os.unlink(kin_path)

    def test_incompatible_pair(self):
        """Test kinematics missing a leg of the graph"""
        graph, _ = builtin('box')
        _, kin = builtin('bubble')
        graph_path = write_json(graph.to_dict())
        kin_path = write_json(kin.to_dict())
        try:
            with self.assertRaises(InputError):
                GraphLoader().load_pair(graph_path, kin_path)
        finally:
            os.unlink(graph_path)
            os.unlink(kin_path)


class TestSettings(unittest.TestCase):
    """Test CANON_* environment settings"""

    def test_environment_overrides(self):
        """Test numeric and string variables"""
        env = {'CANON_SAMPLES': '500', 'CANON_SAMPLER': 'quasi-random', 'CANON_LOG_LEVEL': 'debug'}
        with patch.dict(os.environ, env):
            settings = get_settings()
        self.assertEqual(settings.samples, 500)
        self.assertEqual(settings.sampler, 'quasi-random')
        self.assertEqual(settings.log_level, 'DEBUG')

    def test_invalid_number(self):
        """Test an unparsable integer"""
        with patch.dict(os.environ, {'CANON_SEED': 'abc'}):
            with self.assertRaises(ValueError):
                Settings.from_env()

    def test_graph_dir_override(self):
        """Test the built-in library follows CANON_GRAPH_DIR"""
        with tempfile.TemporaryDirectory() as tmp_dir:
            with patch.dict(os.environ, {'CANON_GRAPH_DIR': tmp_dir}):
                with self.assertRaises(InputError):
                    load_graph('bubble')


class TestLibrary(unittest.TestCase):
    """Test built-in graphs and generated families"""

    def test_builtins_load(self):
        """Test every shipped graph has reference kinematics that fit"""
        for name in builtin_names():
            graph, kin = builtin(name)
            kin.check_compatible(graph)
            self.assertTrue(graph.is_connected(), name)

    def test_banana_family(self):
        """Test generated bananas"""
        graph = load_graph('banana6')
        self.assertEqual(graph.num_edges, 6)
        self.assertEqual(graph.loop_number(), 5)
        load_kinematics('banana6').check_compatible(graph)
        with self.assertRaises(GraphError):
            banana(1)

    def test_unknown_kinematics(self):
        """Test a missing reference kinematics file"""
        with self.assertRaises(InputError):
            load_kinematics('no_such_graph')

    def test_random_kinematics(self):
        """Test random draws conserve momentum and are generic"""
        graph = load_graph('box')
        for dim in (2, 4):
            kin = random_kinematics(graph, dim=dim, rng=np.random.default_rng(3))
            self.assertEqual(sum(kin.momenta.values(), ZERO), ZERO)
            self.assertTrue(kin.is_generic(graph.leg_indices))
            self.assertTrue(all(m > 0 for m in kin.masses.values()))
        massless = random_kinematics(graph, rng=np.random.default_rng(3), massive=False)
        self.assertTrue(all(m == 0 for m in massless.masses.values()))


def run_cli_tests():
    """Run the command line and I/O test suite"""
    print("🧪 Running Command Line and I/O Tests")
    print("=" * 60)

    test_suite = unittest.TestSuite()
    for test_class in [TestCommands, TestExporter, TestLoader, TestSettings, TestLibrary]:
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))

    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    print("\n" + "=" * 60)
    print(f"📊 Tests run: {result.testsRun}, failures: {len(result.failures)}, errors: {len(result.errors)}")
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_cli_tests()
    sys.exit(0 if success else 1)
