"""Tickle spectroscopy of a single ion.

A 10 mV drive on one endcap is swept across the axial frequency.  The RMS
motional amplitude of the cooled ion stands in for fluorescence.
"""
import numpy as np

from traplab.characterize import characterize
from traplab.dynamics import CoolingModel, IonEnsemble, tickle_response
from traplab.fields import TrapFields
from traplab.geometry import load_layout, load_voltages
from traplab.potentials import SR88

layout = load_layout(gapless=True)
volts = load_voltages("set_c", layout)
char = characterize(TrapFields(layout, volts), depth=False)
fz = char.secular_frequencies[2]

ion = IonEnsemble.at_rest(char.minimum_position, SR88)
cooling = CoolingModel(SR88.mass * 2 * np.pi * 2e3, 0.0)
freqs = fz * np.linspace(0.96, 1.04, 9)
amp = tickle_response(ion, layout, volts, "end_xp_zp", 0.01, freqs, cooling, settle=2e-4, measure=1e-4)

for f, a in zip(freqs, amp):
    print(f"{f / 1e3:8.2f} kHz  {a * 1e6:6.2f} um  " + "#" * int(40 * a / amp.max()))
print(f"pseudo-potential axial frequency: {fz / 1e3:.2f} kHz")
