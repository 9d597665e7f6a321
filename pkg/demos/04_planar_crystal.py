"""Anneal 150 ions in a strongly anisotropic harmonic trap.

With the tight axis along y the crystal settles into a single layer lying in
the xz plane.  Takes about a minute.
"""
from traplab.crystal import classify
from traplab.dynamics import HarmonicTrap, minimize_crystal
from traplab.potentials import SR88

trap = HarmonicTrap([266e3, 529e3, 39e3])
ens = minimize_crystal(trap, SR88, 150, seed=0)
print(classify(ens.positions).to_text())
