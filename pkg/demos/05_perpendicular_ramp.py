"""Turn a 16-ion crystal on its side with a DC ramp.

The bundled schedule starts from a crystal lying flat in the xz plane and
lowers the central electrode voltage, which weakens confinement along x.  The
ions end up spread in the yz plane.  Takes about two minutes.
"""
import numpy as np

from traplab.crystal import classify
from traplab.dynamics import CoolingModel, LayoutTrap, load_schedule, minimize_crystal, run_schedule
from traplab.geometry import load_layout
from traplab.potentials import SR88

layout = load_layout(gapless=True)
sched = load_schedule("perpendicular_ramp", layout)

start = minimize_crystal(LayoutTrap(layout, sched.voltages[0]), SR88, 16, seed=0, steps_per_rung=2000)
print("start\n" + classify(start.positions).to_text())

cooling = CoolingModel.doppler(friction=SR88.mass * 2 * np.pi * 15e3)
res = run_schedule(start, layout, sched, cooling, stride=5000, seed=0)
print(f"escapes: {len(res.escapes)}")
print("end\n" + classify(res.final.positions[res.final.active]).to_text())
