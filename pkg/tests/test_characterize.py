import numpy as np
import pytest
from scipy import constants

from traplab.characterize import (
    UnstableTrapError,
    characterize,
    find_rf_null,
    frequency_scan,
    pseudopotential,
    secular_frequencies,
    stability_params,
    trap_depth,
)
from traplab.fields import TrapFields
from traplab.geometry import Electrode, TrapLayout, VoltageSet, load_layout, load_voltages
from traplab.potentials import SR88, HarmonicPotential

UM = 1e-6
INF = 1e20


@pytest.fixture(scope="module")
def layout():
    return load_layout(gapless=True)


def infinite_five_wire(a=270 * UM, b=970 * UM):
    return TrapLayout(
        (
            Electrode("rf_l", "rf", -b, -a, -INF, INF),
            Electrode("rf_r", "rf", a, b, -INF, INF),
            Electrode("c", "dc-central", -a, a, -INF, INF),
        )
    )


def test_null_of_infinite_rails_is_geometric_mean():
    # d/dy [atan(b/y) - atan(a/y)] = 0  =>  y = sqrt(a b)
    lay = infinite_five_wire()
    null = find_rf_null(TrapFields(lay, VoltageSet(100.0, {})))
    assert null[1] == pytest.approx(np.sqrt(270 * 970) * UM, rel=1e-9)
    assert abs(null[0]) < 1e-12 and abs(null[2]) < 1e-9


def test_pseudopotential_vanishes_at_null(layout):
    f = TrapFields(layout, load_voltages("set_c", layout))
    null = find_rf_null(f)
    assert pseudopotential(f, SR88, null) < 1e-12
    assert pseudopotential(f, SR88, null + [0, 20 * UM, 0]) > 1e-4


def test_q_traceless(layout):
    a, q, axes = stability_params(TrapFields(layout, load_voltages("set_b", layout)))
    assert abs(q.sum()) < 1e-6
    assert abs(a.sum()) < 1e-6
    assert np.allclose(np.abs(axes), np.eye(3), atol=1e-6)


def test_harmonic_frequencies_recovered():
    rot = np.array([[np.cos(0.3), 0, np.sin(0.3)], [0, 1, 0], [-np.sin(0.3), 0, np.cos(0.3)]])
    pot = HarmonicPotential([300e3, 500e3, 100e3], center=(1 * UM, 400 * UM, -2 * UM), axes=rot)
    f, axes, p = secular_frequencies(pot, SR88.mass, (0, 390 * UM, 0))
    assert f == pytest.approx([300e3, 500e3, 100e3], rel=1e-9)
    assert p == pytest.approx([1 * UM, 400 * UM, -2 * UM], abs=1e-12)
    assert abs(abs(axes[0] @ rot[0]) - 1) < 1e-9


class CubicWell:
    """k/2 |r|^2 - c x^3 about a centre: saddle at x = k/(3c), depth k^3/(54 c^2)."""

    def __init__(self, k, c, centre):
        self.k, self.c, self.centre = k, c, np.asarray(centre)

    def energy(self, p):
        d = np.atleast_2d(p) - self.centre
        return 0.5 * self.k * np.sum(d * d, axis=1) - self.c * d[:, 0] ** 3

    def gradient(self, p):
        d = np.atleast_2d(p) - self.centre
        g = self.k * d
        g[:, 0] -= 3 * self.c * d[:, 0] ** 2
        return g

    def hessian(self, p):
        d = np.atleast_2d(p) - self.centre
        H = np.broadcast_to(self.k * np.eye(3), (len(d), 3, 3)).copy()
        H[:, 0, 0] -= 6 * self.c * d[:, 0]
        return H


def test_depth_interior_saddle():
    k = 1e-12  # N/m
    xs = 100 * UM
    c = k / (3 * xs)
    well = CubicWell(k, c, (0, 500 * UM, 0))
    res = trap_depth(well, (0, 500 * UM, 0), height=500 * UM)
    expected = k**3 / (54 * c**2) / constants.e
    assert res.saddle
    assert res.depth == pytest.approx(expected, rel=1e-9)
    assert res.escape_point == pytest.approx([xs, 500 * UM, 0], abs=1e-12)


def test_depth_harmonic_box_face():
    pot = HarmonicPotential([100e3, 100e3, 100e3], center=(0, 500 * UM, 0))
    res = trap_depth(pot, (0, 500 * UM, 0), height=500 * UM, extent=0.5)
    # lowest face point is the floor-free face at 250 um from the centre
    expected = 0.5 * SR88.mass * (2 * np.pi * 100e3) ** 2 * (250 * UM) ** 2 / constants.e
    assert res.depth == pytest.approx(expected, rel=1e-9)
    assert not res.saddle


def test_unstable_set_reports_axis(layout):
    with pytest.raises(UnstableTrapError) as exc:
        characterize(TrapFields(layout, load_voltages("set_a", layout)), depth=False)
    assert "z" in exc.value.axes


def test_characterize_set_c_consistent(layout):
    c = characterize(TrapFields(layout, load_voltages("set_c", layout)))
    assert c.ion_height == pytest.approx(504.33 * UM, rel=1e-4)
    assert c.secular_frequencies == pytest.approx(c.mathieu_frequencies(), rel=0.02)
    assert c.trap_depth > 0
    assert any("shallow" in w for w in c.warnings)
    d = c.to_dict()
    assert d["ion_height_um"] == pytest.approx(504.33, rel=1e-4)


def test_frequency_scan_marks_unstable(layout):
    v = load_voltages("set_c", layout)
    rows = frequency_scan(layout, v, SR88, [5.0, 125.0])
    assert rows[0]["stable"] is False and np.isnan(rows[0]["f_x"])
    assert rows[1]["stable"] is True
