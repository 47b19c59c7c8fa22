"""Hyperbolic polygonal billiards toolkit.

Core pieces: a hyperboloid-model geometry kernel, labeled polygons with an
angle-preserving closure solver, billiard simulation with symbolic bounce
words, unfolding-based realizability decisions, billiard rigidity
classification, and Gauss-Bonnet accounting for cone surfaces, orbifolds,
and branched covers.
"""

__version__ = "0.1.0"
