"""Dynamics in the layout fields (pseudo-potential and full RF)."""
import numpy as np
import pytest

from traplab.characterize import characterize
from traplab.crystal import nn_stats
from traplab.dynamics import (
    CoolingModel,
    HarmonicTrap,
    IonEnsemble,
    Integrator,
    LayoutTrap,
    Schedule,
    coulomb_energy,
    minimize_crystal,
    relax,
    run_schedule,
)
from traplab.fields import TrapFields
from traplab.geometry import load_layout, load_voltages
from traplab.potentials import SR88


@pytest.fixture(scope="module")
def setup():
    lay = load_layout(gapless=True)
    v = load_voltages("set_c", lay)
    char = characterize(TrapFields(lay, v), depth=False)
    return lay, v, char


def test_constant_schedule_is_plain_integration(setup):
    lay, v, char = setup
    pos = char.minimum_position + np.array([[2e-6, 0, 5e-6], [-1e-6, 1e-6, -6e-6]])
    ens = IonEnsemble.at_rest(pos, SR88)
    cooling = CoolingModel(1e-20, 1e-3)
    dt = 3e-8
    res = run_schedule(ens, lay, Schedule.constant(v), cooling, dt=dt, duration=300 * dt, stride=100, seed=9)
    plain = ens.copy()
    Integrator(LayoutTrap(lay, v), dt, cooling, seed=9, escape_radius=None).run(plain, 300)
    assert np.array_equal(res.final.positions, plain.positions)
    assert np.array_equal(res.final.velocities, plain.velocities)


def test_overdamped_single_ion_finds_minimum(setup):
    lay, v, char = setup
    trap = LayoutTrap(lay, v)
    ens = IonEnsemble.at_rest(char.minimum_position + [3e-6, -2e-6, 4e-6], SR88)
    gamma = SR88.mass * 2 * np.pi * 2e6
    Integrator(trap, 2e-8, CoolingModel(gamma, 0.0)).run(ens, 20_000)
    assert np.linalg.norm(ens.positions[0] - char.minimum_position) < 1e-9


def test_isolated_pair_conserves_momentum():
    free = HarmonicTrap([0.0, 0.0, 0.0])
    ens = IonEnsemble.at_rest([[0, 5e-4, 0], [3e-6, 5e-4, 4e-6]], SR88)
    ens.velocities[:] = [[1.0, 0.5, -0.2], [-0.3, 0.1, 0.4]]
    p0 = (ens.masses[:, None] * ens.velocities).sum(0)
    Integrator(free, 1e-9).run(ens, 1000)
    p1 = (ens.masses[:, None] * ens.velocities).sum(0)
    assert np.linalg.norm(p1 - p0) <= 1e-12 * np.linalg.norm(p0)


def test_quench_does_not_raise_energy():
    trap = HarmonicTrap([300e3, 300e3, 120e3])
    ens = minimize_crystal(trap, SR88, 8, seed=1, steps_per_rung=500)

    def energy(e):
        return trap.energy(e.positions, e.charges, e.masses) + coulomb_energy(e.positions, e.charges)

    e0 = energy(ens)
    Integrator(trap, 1e-8, CoolingModel(1e-19, 0.0)).run(ens, 200)
    e1 = energy(ens)
    assert e1 <= e0 * (1 + 1e-12)
    assert energy(relax(ens, trap)) <= e1 * (1 + 1e-12)


def test_pseudo_and_full_rf_positions_agree(setup):
    lay, v, char = setup
    pseudo = LayoutTrap(lay, v)
    ens = minimize_crystal(pseudo, SR88, 10, seed=2, steps_per_rung=1500)
    nn = nn_stats(ens.positions)[0]
    full = LayoutTrap(lay, v, mode="full-rf")
    T = 2 * np.pi / lay.rf_frequency
    dt = T / 120
    integ = Integrator(full, dt, CoolingModel(SR88.mass * 2 * np.pi * 60e3, 0.0), escape_radius=None)
    run = ens.copy()
    integ.run(run, 120 * 100)  # let the secular transient decay
    acc = np.zeros_like(run.positions)
    n_avg = 120 * 40
    for _ in range(n_avg):
        integ.step(run)
        acc += run.positions
    mean = acc / n_avg
    assert np.max(np.linalg.norm(mean - ens.positions, axis=1)) < 0.05 * nn
