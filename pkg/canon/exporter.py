"""
Results Export Module for Canon

Writes run results as JSON documents carrying a run manifest, and Stokes
reports as Excel workbooks.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

from canon import __version__
from canon.stokes import StokesReport

# Configure logging
logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIMING_FIELDS = frozenset({'seconds', 'timestamp'})


@dataclass
class RunManifest:
    """Provenance embedded in every JSON output."""
    subcommand: str
    inputs: List[str] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def strip_timing(data: Any) -> Any:
    """Drop timing fields recursively, for byte-level comparison of runs."""
    if isinstance(data, dict):
        return {k: strip_timing(v) for k, v in data.items() if k not in TIMING_FIELDS}
    if isinstance(data, list):
        return [strip_timing(v) for v in data]
    return data


def render_json(result: Dict[str, Any], manifest: RunManifest, compare: bool = False) -> str:
    """
    Serialize a result with its manifest.

    Args:
        result (Dict): Subcommand result
        manifest (RunManifest): Run provenance
        compare (bool): Omit timing fields

    Returns:
        str: Deterministic JSON text
    """
    document = {'schema_version': SCHEMA_VERSION, 'manifest': manifest.to_dict(), 'result': result}
    if compare:
        document = strip_timing(document)
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False)


class ResultsExporter:
    """
    Handles export of Stokes reports to Excel and JSON files.
    """

    def export_to_excel(self, report: StokesReport, filename: Optional[str] = None) -> str:
        """
        Export a Stokes report to an Excel file with summary and term sheets.

        Args:
            report (StokesReport): Evaluated relation
            filename (str, optional): Output filename. Auto-generated if None.

        Returns:
            str: Path to the exported file
        """
        if not filename:
            timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
            filename = f"stokes_{report.graph}_{timestamp}.xlsx"
        if not filename.endswith('.xlsx'):
            filename += '.xlsx'

        logger.info(f"Exporting Stokes report to: {filename}")
        with pd.ExcelWriter(filename, engine='openpyxl') as writer:
            self._create_summary_sheet(writer, report)
            table = report.to_dataframe()
            table[table['Type'] == 'edge'].to_excel(writer, sheet_name='Edge Terms', index=False)
            table[table['Type'] != 'edge'].to_excel(writer, sheet_name='Product Terms', index=False)
            if report.cross_checks:
                pd.DataFrame(report.cross_checks).to_excel(writer, sheet_name='Cross Checks', index=False)
        logger.info(f"Export completed successfully: {filename}")
        return filename

    def _create_summary_sheet(self, writer: pd.ExcelWriter, report: StokesReport):
        total = report.total
        summary_data = {
            'Metric': [
                'Graph', 'Form', 'Edge Terms', 'Product Terms', 'Total (re)', 'Total (im)',
                'Combined Std. Error', 'Scale', 'Residual Ratio', 'Within 3 Sigma',
                'Samples', 'Seed',
            ],
            'Value': [
                report.graph, report.form, len(report.edge_terms), len(report.product_terms),
                total.real, total.imag, report.stderr, report.scale, report.residual_ratio,
                report.consistent(), report.config.get('samples', ''), str(report.config.get('seed', '')),
            ],
        }
        pd.DataFrame(summary_data).to_excel(writer, sheet_name='Summary', index=False)

    def export_to_json(self, result: Dict[str, Any], manifest: RunManifest,
                       filename: str, compare: bool = False) -> str:
        """
        Export a result with its manifest to a JSON file.

        Returns:
            str: Path to the exported file
        """
        if not filename.endswith('.json'):
            filename += '.json'
        with open(filename, 'w', encoding='utf-8') as f:
            f.write(render_json(result, manifest, compare) + '\n')
        logger.info(f"JSON export completed: {filename}")
        return filename

