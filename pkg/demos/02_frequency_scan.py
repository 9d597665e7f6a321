"""Secular frequencies versus RF amplitude.

At fixed static voltages the radial frequencies grow linearly with V_rf while
the axial one, set by the static curvature, barely moves.
"""
import numpy as np

from traplab.characterize import frequency_scan
from traplab.geometry import load_layout, load_voltages
from traplab.potentials import SR88

layout = load_layout(gapless=True)
volts = load_voltages("scan_axial", layout)
rows = frequency_scan(layout, volts, SR88, np.linspace(80, 160, 9))

print(" V_rf    f_x      f_y      f_z   (kHz)")
for r in rows:
    print(f"{r['V_rf']:5.0f} {r['f_x'] / 1e3:8.2f} {r['f_y'] / 1e3:8.2f} {r['f_z'] / 1e3:8.3f}")
