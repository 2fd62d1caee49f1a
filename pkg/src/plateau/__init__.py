"""Discrete Plateau complexes in R^3.

Kept free of heavy imports so the CLI can set thread limits before numpy
loads; import submodules directly (``plateau.complex``, ``plateau.variation``).
"""

__version__ = "0.1.0"
