"""
Input Loading Module for Canon

This module reads graph and kinematics JSON files with validation and
clear error reporting. A file may hold a graph, a kinematics record, or
both under the keys "graph" and "kinematics".
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from canon.graph_core import Graph, GraphError
from canon.kinematics import Kinematics, KinematicsError

# Configure logging
logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class InputError(ValueError):
    """Raised for unreadable or malformed input files."""


class GraphLoader:
    """
    Loads graphs and kinematics from JSON files.
    """

    def __init__(self, max_file_size_mb: float = 5):
        self.supported_formats = ['.json']
        self.max_file_size_mb = max_file_size_mb

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        """
        Read and parse one JSON file.

        Args:
            path: Path to the file

        Returns:
            Dict: Parsed document

        Raises:
            InputError: If the file is missing, too large or not valid JSON
        """
        file_path = Path(path)
        if not file_path.exists():
            raise InputError(f"Input file not found: {path}")
        if file_path.suffix.lower() not in self.supported_formats:
            raise InputError(f"File is not JSON: {path}")

        file_size_mb = file_path.stat().st_size / (1024 * 1024)
        if file_size_mb > self.max_file_size_mb:
            raise InputError(f"File too large: {file_size_mb:.1f}MB > {self.max_file_size_mb}MB")

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"Malformed JSON in {file_path.name}: {e}") from e
        if not isinstance(data, dict):
            raise InputError(f"{file_path.name} must contain a JSON object")
        logger.debug(f"Read {file_path.name} ({file_size_mb * 1024:.1f}KB)")
        return data

    def load_graph(self, path: PathLike) -> Graph:
        """
        Load a graph; its name defaults to the file stem.

        Raises:
            InputError: On unreadable files or invalid graphs
        """
        data = self.read_json(path)
        data = data.get('graph', data)
        try:
            graph = Graph.from_dict(data, name=str(data.get('name') or Path(path).stem))
        except GraphError as e:
            raise InputError(f"Invalid graph in {path}: {e}") from e
        logger.info(f"Loaded graph {graph.name!r}: {graph.num_edges} edges, "
                    f"{graph.num_vertices} vertices, {len(graph.legs)} legs")
        return graph

    def load_kinematics(self, path: PathLike) -> Kinematics:
        """
        Load kinematics.

        Raises:
            InputError: On unreadable files or invalid kinematics
        """
        data = self.read_json(path)
        data = data.get('kinematics', data)
        try:
            return Kinematics.from_dict(data)
        except KinematicsError as e:
            raise InputError(f"Invalid kinematics in {path}: {e}") from e

    def load_pair(self, graph_path: PathLike,
                  kinematics_path: Optional[PathLike] = None) -> Tuple[Graph, Optional[Kinematics]]:
        """
        Load a graph and its kinematics, from one combined file or two.

        Returns:
            Tuple[Graph, Optional[Kinematics]]: The kinematics are None when
            neither file provides them
        """
        graph = self.load_graph(graph_path)
        if kinematics_path is not None:
            kin = self.load_kinematics(kinematics_path)
        elif 'kinematics' in self.read_json(graph_path):
            kin = self.load_kinematics(graph_path)
        else:
            kin = None
        if kin is not None:
            try:
                kin.check_compatible(graph)
            except KinematicsError as e:
                raise InputError(f"Kinematics do not fit {graph.name!r}: {e}") from e
        return graph, kin


def load_graph(path: PathLike) -> Graph:
    """Load a graph file."""
    return GraphLoader().load_graph(path)


def load_kinematics(path: PathLike) -> Kinematics:
    """Load a kinematics file."""
    return GraphLoader().load_kinematics(path)
