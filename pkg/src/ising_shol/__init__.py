"""Exact desk-scale 2D Ising computations: transfer matrix fermions and discrete s-holomorphic analysis."""
