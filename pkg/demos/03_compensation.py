"""Null a stray field with the DC electrodes.

A 70 V/m stray field along x pushes the ion off the RF null and drives
micromotion.  The default free electrodes (central strip, the two lateral
groups and the endcaps driven together) cannot make a z field at the null, so
only x and y are nulled here.
"""
from traplab.characterize import characterize
from traplab.compensation import StrayField, micromotion_amplitude, solve_compensation
from traplab.fields import TrapFields
from traplab.geometry import load_layout, load_voltages
from traplab.potentials import SR88

layout = load_layout(gapless=True)
base = load_voltages("set_c", layout)
stray = StrayField((70.0, 0.0, 0.0))

char = characterize(TrapFields(layout, base), depth=False)
before = micromotion_amplitude(char, stray, SR88)
print("micromotion amplitude before (nm):", [f"{a * 1e9:.1f}" for a in before])

sol = solve_compensation(layout, base, SR88, stray, axes="xy")
print(sol.table())
