"""Quantum-trajectory simulator for a dissipative two-species lattice gas
with directed hopping and neighborhood-aligned species flips, plus its
dense-Lindblad oracle, measurement post-processing, coarse-grained field
equations, and a classical Monte Carlo analogue.
"""

__version__ = "0.1.0"
