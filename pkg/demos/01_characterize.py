"""Characterize the bundled five-wire trap for the three bundled voltage sets.

Prints the RF null height, Mathieu parameters, secular frequencies and trap
depth.  A set that does not confine is reported with the axis that fails.
"""
import math

from traplab.characterize import UnstableTrapError, characterize
from traplab.fields import TrapFields
from traplab.geometry import load_layout, load_voltages

layout = load_layout(gapless=True)
print(f"{len(layout.electrodes)} electrodes, RF drive {layout.rf_frequency / math.tau / 1e6:.2f} MHz\n")

for name in ("set_a", "set_b", "set_c"):
    fields = TrapFields(layout, load_voltages(name, layout))
    print(f"== {name}")
    try:
        char = characterize(fields)
    except UnstableTrapError as exc:
        print(f"   unstable: {exc}\n")
        continue
    print(char.table())
    print()
