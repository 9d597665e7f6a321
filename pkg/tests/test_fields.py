import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from traplab.fields import (
    FieldDomainError,
    TrapFields,
    basis_fields,
    basis_gradient,
    basis_hessian,
    basis_potential,
    superpose,
)
from traplab.geometry import Electrode, VoltageSet

UM = 1e-6

# Frozen from scipy.integrate.dblquad of y/(2 pi) / r^3 over the unit square
# (tolerances 1e-14 abs, 1e-13 rel).
QUAD_SQUARE_CENTRED = 0.33333333333333326
QUAD_SQUARE_OFFSET = 0.5792649439764068  # point (0.3, 0.2, -0.1)


def square(side=1.0):
    return Electrode("sq", "dc-central", -side / 2, side / 2, -side / 2, side / 2)


def test_whole_plane_is_unit_potential():
    plane = Electrode("all", "dc-central", -np.inf, np.inf, -np.inf, np.inf)
    for p in [(0, 1e-3, 0), (5.0, 0.1, -3.0), (0, 1e3, 0)]:
        assert basis_potential(plane, p) == pytest.approx(1.0, abs=1e-12)


def test_far_field_decay():
    el = Electrode("e", "rf", 0, 1e-3, 0, 2e-3)
    assert 0 < basis_potential(el, (0, 1e4 * 2e-3, 0)) < 1e-4


def test_square_matches_quadrature():
    assert basis_potential(square(), (0, 0.5, 0)) == pytest.approx(QUAD_SQUARE_CENTRED, rel=1e-12)
    assert basis_potential(square(), (0.3, 0.2, -0.1)) == pytest.approx(QUAD_SQUARE_OFFSET, rel=1e-10)


def test_domain_error():
    with pytest.raises(FieldDomainError):
        basis_potential(square(), (0, 0, 0))
    with pytest.raises(FieldDomainError):
        basis_gradient(square(), (0, -1e-6, 0))


def test_mirror_pair_has_no_x_field_on_axis():
    pair = [
        Electrode("l", "rf", -900 * UM, -300 * UM, -2e-3, 2e-3),
        Electrode("r", "rf", 300 * UM, 900 * UM, -2e-3, 2e-3),
    ]
    _, g, _ = basis_fields(pair, [(0, 400 * UM, 0.3e-3), (0, 50 * UM, -1e-3)])
    gx = g.sum(0)[:, 0]
    assert np.all(np.abs(gx) < 1e-12 * np.abs(g.sum(0)).max())


points = st.tuples(
    st.floats(-3e-3, 3e-3), st.floats(20e-6, 3e-3), st.floats(-3e-3, 3e-3)
)
rects = st.tuples(
    st.floats(-2e-3, 2e-3), st.floats(50e-6, 2e-3), st.floats(-2e-3, 2e-3), st.floats(50e-6, 2e-3)
).map(lambda t: Electrode("e", "dc-lateral", t[0], t[0] + t[1], t[2], t[2] + t[3]))


# Offsets in units of the electrode size: far from a small electrode the four
# corner terms cancel to ~1e-7 and float finite differences lose the digits.
rel_points = st.tuples(st.floats(-4, 4), st.floats(0.05, 4), st.floats(-4, 4))


@settings(max_examples=100, deadline=None)
@given(rects, rel_points)
def test_gradient_and_hessian_match_finite_differences(el, rel):
    size = max(el.x2 - el.x1, el.z2 - el.z1)
    centre = np.array([(el.x1 + el.x2) / 2, 0.0, (el.z1 + el.z2) / 2])
    p = centre + size * np.array(rel)
    h = 1e-9
    g = basis_gradient(el, p)
    H = basis_hessian(el, p)
    fd_g = np.array(
        [(basis_potential(el, p + h * e) - basis_potential(el, p - h * e)) / (2 * h) for e in np.eye(3)]
    )
    scale_g = np.abs(g).max()
    assert np.allclose(g, fd_g, rtol=1e-5, atol=1e-5 * scale_g)
    hh = 1e-8  # 1e-9 m is round-off limited for second derivatives
    fd_H = np.array(
        [(basis_gradient(el, p + hh * e) - basis_gradient(el, p - hh * e)) / (2 * hh) for e in np.eye(3)]
    )
    scale_H = np.abs(H).max()
    assert np.allclose(H, fd_H, rtol=1e-5, atol=1e-5 * scale_H)


def _mp_hessian(el, p):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40

    def phi(x, y, z):
        total = 0
        for xi, zj, sign in ((el.x2, el.z2, 1), (el.x1, el.z2, -1), (el.x2, el.z1, -1), (el.x1, el.z1, 1)):
            u = mp.mpf(xi) - x
            w = mp.mpf(zj) - z
            total += sign * mp.atan2(u * w, y * mp.sqrt(u * u + w * w + y * y))
        return total / (2 * mp.pi)

    x0 = [mp.mpf(float(v)) for v in p]
    return np.array(
        [
            [float(mp.diff(phi, x0, tuple(int(i == k) + int(j == k) for k in range(3)))) for j in range(3)]
            for i in range(3)
        ]
    )


@pytest.mark.parametrize(
    "p", [(0.0, 2e-05, 0.003), (1e-3, 1e-4, -2e-3), (0.0, 3e-3, 0.0)]
)
def test_far_field_hessian_against_high_precision(p):
    el = Electrode("e", "dc-lateral", 0.0, 5e-05, 0.0, 6.103515625e-05)
    H = basis_hessian(el, p)
    ref = _mp_hessian(el, p)
    assert np.allclose(H, ref, rtol=1e-5, atol=1e-6 * np.abs(ref).max())


@settings(max_examples=100, deadline=None)
@given(rects, points)
# far from a small electrode, just above the plane: heavy corner cancellation
@example(el=Electrode("e", "dc-lateral", 0.0, 5e-05, 2e-05, 7e-05), p=(0.001953125, 2e-05, 0.0))
def test_laplace_trace_and_symmetry(el, p):
    H = basis_hessian(el, p)
    assert np.array_equal(H, H.T)
    assert abs(np.trace(H)) <= 1e-9 * np.abs(np.linalg.eigvalsh(H)).max()


@settings(max_examples=50, deadline=None)
@given(rects, points)
def test_potential_bounded(el, p):
    v = basis_potential(el, p)
    assert 0.0 <= v <= 1.0


def _two_electrode_layout():
    from traplab.geometry import TrapLayout

    return TrapLayout(
        (
            Electrode("rf", "rf", -1e-3, -200e-6, -3e-3, 3e-3),
            Electrode("a", "dc-central", -200e-6, 200e-6, -3e-3, 3e-3),
            Electrode("b", "dc-lateral", 200e-6, 1e-3, -3e-3, 3e-3),
        )
    )


def test_superpose_zero_and_linearity():
    lay = _two_electrode_layout()
    p = (50e-6, 300e-6, 1e-4)
    zero = superpose(lay, VoltageSet(0.0, {}), p)
    assert zero.potential == 0 and not zero.gradient.any() and not zero.hessian.any()
    one = superpose(lay, VoltageSet(0.0, {"a": 1.0}), p, part="dc")
    two = superpose(lay, VoltageSet(0.0, {"a": 2.0}), p, part="dc")
    assert two.potential == 2 * one.potential
    assert np.array_equal(two.gradient, 2 * one.gradient)
    assert np.array_equal(two.hessian, 2 * one.hessian)
    assert one.potential == basis_potential(lay.get("a"), p)


def test_superpose_additivity_and_parts():
    lay = _two_electrode_layout()
    p = (10e-6, 250e-6, -2e-4)
    v = VoltageSet(40.0, {"a": -1.5, "b": 3.0})
    both = superpose(lay, v, p)
    parts = superpose(lay, v, p, "rf") + superpose(lay, v, p, "dc")
    assert both.potential == pytest.approx(parts.potential, rel=1e-14)
    assert np.allclose(both.hessian, parts.hessian, rtol=1e-13, atol=0)
    with pytest.raises(ValueError):
        superpose(lay, VoltageSet(0.0, {"nope": 1.0}), p)


def test_trapfields_vectorised_matches_superpose():
    lay = _two_electrode_layout()
    v = VoltageSet(40.0, {"a": -1.5, "b": 3.0})
    tf = TrapFields(lay, v)
    pts = np.array([[10e-6, 250e-6, -2e-4], [-30e-6, 400e-6, 0.0]])
    phi, g, H = tf.dc(pts)
    _, grf, Hrf = tf.rf(pts)
    for k, p in enumerate(pts):
        s = superpose(lay, v, p, "dc")
        r = superpose(lay, v, p, "rf")
        assert phi[k] == pytest.approx(s.potential, rel=1e-13)
        assert np.allclose(g[k], s.gradient, rtol=1e-12)
        assert np.allclose(Hrf[k], r.hessian, rtol=1e-12)
        assert np.allclose(grf[k], r.gradient, rtol=1e-12)
