"""
Built-in Graph Library for Canon

Named graphs shipped as data files with reference kinematics, generated
families, and random generic rational kinematics for property tests.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from canon.config import get_settings
from canon.graph_core import Edge, Graph, GraphError, Leg
from canon.kinematics import Kinematics, KinematicsError, Quaternion, ZERO
from canon.loader import GraphLoader, InputError

# Configure logging
logger = logging.getLogger(__name__)

BUILTIN_GRAPHS = (
    'bubble', 'triangle', 'banana3', 'box', 'dunce', 'double_bubble',
    'box_triangle', 'pentagon', 'hexagon', 'wheel3', 'kite',
)


def graph_dir() -> Path:
    return Path(get_settings().graph_dir)


def builtin_names() -> List[str]:
    """Names of the shipped graphs, plus banana<n> for any n >= 2."""
    return list(BUILTIN_GRAPHS)


def _banana_size(name: str) -> Optional[int]:
    if name.startswith('banana') and name[6:].isdigit():
        return int(name[6:])
    return None


def banana(n: int) -> Graph:
    """
    The n-edge banana: two vertices, edges 1..n-1 from s to t, edge n from
    t to s, mass label i on edge i and one leg at each vertex.
    """
    if n < 2:
        raise GraphError("A banana graph needs at least two edges")
    edges = [Edge(i, 1, 2, i) for i in range(1, n)] + [Edge(n, 2, 1, n)]
    return Graph(((1, 0), (2, 0)), tuple(edges), (Leg(1, 1), Leg(2, 2)), 1, f"banana{n}")


def banana_kinematics(n: int) -> Kinematics:
    return Kinematics(2, {1: Quaternion(1, 1), 2: Quaternion(-1, -1)},
                      {i: Fraction(i) for i in range(1, n + 1)})


def load_graph(name: str) -> Graph:
    """
    Load a built-in graph by name.

    Raises:
        InputError: If no such graph exists
    """
    size = _banana_size(name)
    path = graph_dir() / 'graphs' / f"{name}.json"
    if size is not None and not path.exists():
        return banana(size)
    if not path.exists():
        raise InputError(f"Unknown built-in graph {name!r}; available: {', '.join(builtin_names())}")
    return GraphLoader().load_graph(path)


def load_kinematics(name: str) -> Kinematics:
    """Reference kinematics of a built-in graph."""
    size = _banana_size(name)
    path = graph_dir() / 'kinematics' / f"{name}.json"
    if size is not None and not path.exists():
        return banana_kinematics(size)
    if not path.exists():
        raise InputError(f"No reference kinematics for {name!r}")
    return GraphLoader().load_kinematics(path)


def builtin(name: str) -> Tuple[Graph, Kinematics]:
    return load_graph(name), load_kinematics(name)


def suite() -> Dict[str, Tuple[Graph, Kinematics]]:
    """The graphs used by the exact identity suite, with reference kinematics."""
    names = ['bubble', 'triangle', 'banana3', 'banana4', 'box', 'dunce', 'double_bubble', 'wheel3']
    return {name: builtin(name) for name in names}


def _random_scalar(rng: np.random.Generator, dim: int, bound: int) -> Quaternion:
    width = 2 if dim == 2 else 4
    parts = [Fraction(int(rng.integers(-bound, bound + 1)), int(rng.integers(1, 4))) for _ in range(width)]
    return Quaternion.from_components(parts)


def random_kinematics(graph: Graph, dim: int = 2, rng: Optional[np.random.Generator] = None,
                      massive: bool = True, bound: int = 5, attempts: int = 100) -> Kinematics:
    """
    Random generic rational kinematics for the legs and mass labels of a graph.

    Args:
        graph (Graph): Graph whose legs and mass labels are filled
        dim (int): 2 or 4
        rng (np.random.Generator, optional): Source of randomness
        massive (bool): Positive masses for every nonzero label, else zero
        bound (int): Numerator bound of the components
        attempts (int): Redraws before giving up on genericity

    Returns:
        Kinematics: Conserving, generic kinematics

    Raises:
        KinematicsError: If no generic draw was found
    """
    rng = rng or np.random.default_rng()
    legs = graph.leg_indices
    labels = sorted({e.mass_label for e in graph.edges if e.mass_label})
    for _ in range(attempts):
        momenta = {leg: _random_scalar(rng, dim, bound) for leg in legs[:-1]}
        if legs:
            momenta[legs[-1]] = -sum(momenta.values(), ZERO)
        masses = {label: Fraction(0) for label in labels}
        if massive:
            masses = {label: Fraction(int(rng.integers(1, 10)), int(rng.integers(1, 4))) for label in labels}
        kin = Kinematics(dim, momenta, masses)
        if kin.is_generic(legs):
            return kin
    raise KinematicsError(f"No generic kinematics found for {graph.name!r} after {attempts} draws")
