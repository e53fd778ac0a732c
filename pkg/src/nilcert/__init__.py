"""Computational toolkit for finitely generated nilpotent groups:
exact integer linear algebra, polycyclic presentations, unitriangular
matrix calculus, torsion separation certificates, mixed Whitehead
problems and graph-of-groups isomorphism."""

__version__ = "0.1.0"
