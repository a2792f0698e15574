# Canon - Canonical Forms for Feynman Graphs
"""
Graph Laplacians, Symanzik polynomials, canonical bi-invariant forms and
their integrals over the Feynman simplex.
"""

__version__ = "1.0.0"
__author__ = "Canon Development Team"
