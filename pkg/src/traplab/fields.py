"""Closed-form electrostatics of rectangular surface electrodes.

A rectangle held at 1 V inside an otherwise grounded infinite plane produces,
at ``(x, y, z)`` with ``y > 0``, the potential

    phi = 1/(2 pi) * sum_corners s_ij * atan( u w / (y R) ),
    u = x_i - x,  w = z_j - z,  R = sqrt(u^2 + w^2 + y^2)

with corner signs ``s = +1`` for ``(x2, z2)`` and ``(x1, z1)``, ``-1``
otherwise.  Gradients and Hessians below are the analytic derivatives of
the same expression; nothing is differentiated numerically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Electrode, TrapLayout, VoltageSet

__all__ = [
    "FieldDomainError",
    "FieldSample",
    "basis_potential",
    "basis_gradient",
    "basis_hessian",
    "basis_fields",
    "TrapFields",
    "superpose",
]

_BIG = 1e20  # stand-in for infinite electrode edges, metres
_CANCEL_LIMIT = 1e4  # corner-term size over result size that triggers extended precision
_TWO_PI = 2 * np.pi

# corner (x index, z index, sign) into a rect (x1, x2, z1, z2)
_CORNERS = ((1, 3, 1.0), (0, 3, -1.0), (1, 2, -1.0), (0, 2, 1.0))


class FieldDomainError(ValueError):
    """Evaluation requested at or below the electrode plane."""


@dataclass
class FieldSample:
    """Potential (V or V/V), gradient (V/m) and Hessian (V/m^2) at one point."""

    potential: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __add__(self, other: "FieldSample") -> "FieldSample":
        return FieldSample(
            self.potential + other.potential,
            self.gradient + other.gradient,
            self.hessian + other.hessian,
        )

    def scaled(self, factor: float) -> "FieldSample":
        return FieldSample(self.potential * factor, self.gradient * factor, self.hessian * factor)


def _as_rects(electrodes) -> np.ndarray:
    if isinstance(electrodes, Electrode):
        electrodes = [electrodes]
    if isinstance(electrodes, np.ndarray):
        rects = np.asarray(electrodes, dtype=float).reshape(-1, 4)
    else:
        rects = np.array([e.rect for e in electrodes], dtype=float).reshape(-1, 4)
    return np.clip(rects, -_BIG, _BIG)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    pts = pts.reshape(-1, 3)
    if np.any(pts[:, 1] <= 0):
        raise FieldDomainError("fields are only defined for y > 0")
    return pts


def basis_fields(rects, points, order: int = 2):
    """Unit-voltage fields of many rectangles at many points.

    Parameters
    ----------
    rects : (E, 4) array or sequence of Electrode
        ``(x1, x2, z1, z2)`` per electrode.
    points : (P, 3) array
        Evaluation points, all with ``y > 0``.
    order : int
        0 returns the potential only, 1 adds the gradient, 2 adds the Hessian.

    Returns
    -------
    tuple
        ``phi (E, P)``, then ``grad (E, P, 3)`` and ``hess (E, P, 3, 3)``
        depending on ``order``.
    """
    r = _as_rects(rects)
    p = _as_points(points)
    cols = [r[:, k, None] for k in range(4)]
    out = _corner_sums(cols, p[None, :, 0], p[None, :, 1], p[None, :, 2], order, np.float64)
    if order < 2:
        return out
    phi, grad, hess, scale = out
    # Far from a small electrode and close to the plane the corner terms
    # cancel by many orders of magnitude; redo those pairs in extended precision.
    peak = np.abs(hess).max(axis=(-2, -1))
    bad = np.nonzero(scale > _CANCEL_LIMIT * peak)
    if bad[0].size:
        ld = np.longdouble
        cols = [r[bad[0], k].astype(ld) for k in range(4)]
        q = p[bad[1]].astype(ld)
        lphi, lgrad, lhess, _ = _corner_sums(cols, q[:, 0], q[:, 1], q[:, 2], 2, ld)
        phi[bad] = lphi
        grad[bad] = lgrad
        hess[bad] = lhess
    return phi, grad, hess


def _corner_sums(cols, x, y, z, order, dtype):
    """Corner sums for rect columns ``cols`` and coordinates broadcast against them."""
    y2 = y * y
    shape = np.broadcast_shapes(np.shape(cols[0]), np.shape(x))
    phi = np.zeros(shape, dtype)
    if order >= 1:
        grad = np.zeros(shape + (3,), dtype)
    if order >= 2:
        hess = np.zeros(shape + (3, 3), dtype)
        scale = np.zeros(shape, dtype)
    for ix, iz, s in _CORNERS:
        u = cols[ix] - x
        w = cols[iz] - z
        u2 = u * u
        w2 = w * w
        R2 = u2 + w2 + y2
        R = np.sqrt(R2)
        phi += s * np.arctan2(u * w, y * R)
        if order < 1:
            continue
        a = u2 + y2
        b = w2 + y2
        Fu = w * y / (a * R)
        Fw = u * y / (b * R)
        Fy = -u * w * (u2 + w2 + 2 * y2) / (a * b * R)
        # d/dx = -d/du, d/dz = -d/dw
        grad[..., 0] -= s * Fu
        grad[..., 1] += s * Fy
        grad[..., 2] -= s * Fw
        if order < 2:
            continue
        R3 = R2 * R
        Fuu = -u * w * y * (3 * u2 + 2 * w2 + 3 * y2) / (a * a * R3)
        Fww = -u * w * y * (2 * u2 + 3 * w2 + 3 * y2) / (b * b * R3)
        poly = (
            2 * u2**3 + 3 * u2 * u2 * w2 + 7 * u2 * u2 * y2 + 3 * u2 * w2 * w2
            + 12 * u2 * w2 * y2 + 11 * u2 * y2 * y2 + 2 * w2**3 + 7 * w2 * w2 * y2
            + 11 * w2 * y2 * y2 + 6 * y2**3
        )
        Fyy = u * w * y * poly / (a * a * b * b * R3)
        Fuw = y / R3
        Fuy = w * (u2 * u2 + u2 * w2 - u2 * y2 - w2 * y2 - 2 * y2 * y2) / (a * a * R3)
        Fwy = u * (u2 * w2 - u2 * y2 + w2 * w2 - w2 * y2 - 2 * y2 * y2) / (b * b * R3)
        hess[..., 0, 0] += s * Fuu
        hess[..., 1, 1] += s * Fyy
        hess[..., 2, 2] += s * Fww
        hess[..., 0, 2] += s * Fuw
        hess[..., 0, 1] -= s * Fuy
        hess[..., 1, 2] -= s * Fwy
        scale += np.maximum(np.maximum(abs(Fuu), abs(Fww)), abs(Fyy))
    phi /= _TWO_PI
    if order < 1:
        return phi
    grad /= _TWO_PI
    if order < 2:
        return phi, grad
    hess /= _TWO_PI
    hess[..., 2, 0] = hess[..., 0, 2]
    hess[..., 1, 0] = hess[..., 0, 1]
    hess[..., 2, 1] = hess[..., 1, 2]
    return phi, grad, hess, scale / _TWO_PI


def basis_potential(electrode: Electrode, point) -> float:
    """Potential at ``point`` per volt applied to ``electrode``."""
    return float(basis_fields(electrode, point, order=0)[0, 0])


def basis_gradient(electrode: Electrode, point) -> np.ndarray:
    return basis_fields(electrode, point, order=1)[1][0, 0]


def basis_hessian(electrode: Electrode, point) -> np.ndarray:
    return basis_fields(electrode, point, order=2)[2][0, 0]


class TrapFields:
    """RF and static field sources of a layout driven by a :class:`VoltageSet`.

    ``rf`` quantities refer to the full-amplitude RF potential
    ``V_rf * sum(phi_rf)``; ``dc`` quantities are the superposed static
    potential ``sum_j V_j phi_j``.  Per-electrode basis evaluation is exposed
    through :meth:`dc_basis` so time-varying voltages can reuse it.
    """

    def __init__(self, layout: TrapLayout, voltages: VoltageSet | None = None):
        self.layout = layout
        self.voltages = (voltages or VoltageSet(0.0)).validate(layout)
        self.rf_rects = layout.rects(layout.rf_electrodes)
        self.dc_names = [e.name for e in layout.dc_electrodes]
        self.dc_rects = layout.rects(layout.dc_electrodes)
        self.dc_volts = self.voltages.dc_vector(self.dc_names)

    @property
    def omega(self) -> float:
        return self.layout.rf_frequency

    @property
    def rf_amplitude(self) -> float:
        return self.voltages.rf_amplitude

    def with_voltages(self, voltages: VoltageSet) -> "TrapFields":
        return TrapFields(self.layout, voltages)

    def rf_unit(self, points, order: int = 2):
        """Summed RF basis (per volt of RF amplitude), shapes ``(P,)...``."""
        if len(self.rf_rects) == 0:
            p = _as_points(points)
            n = len(p)
            out = (np.zeros(n), np.zeros((n, 3)), np.zeros((n, 3, 3)))
            return out[0] if order == 0 else out[: order + 1]
        res = basis_fields(self.rf_rects, points, order)
        if order == 0:
            return res.sum(0)
        return tuple(part.sum(0) for part in res)

    def dc_basis(self, points, order: int = 2):
        """Per-electrode static basis, shapes ``(E, P)...``."""
        if len(self.dc_rects) == 0:
            p = _as_points(points)
            n = len(p)
            out = (np.zeros((0, n)), np.zeros((0, n, 3)), np.zeros((0, n, 3, 3)))
            return out[0] if order == 0 else out[: order + 1]
        return basis_fields(self.dc_rects, points, order)

    def rf(self, points, order: int = 2):
        res = self.rf_unit(points, order)
        if order == 0:
            return self.rf_amplitude * res
        return tuple(self.rf_amplitude * part for part in res)

    def dc(self, points, order: int = 2, volts: np.ndarray | None = None):
        v = self.dc_volts if volts is None else np.asarray(volts, dtype=float)
        res = self.dc_basis(points, order)
        if order == 0:
            return np.tensordot(v, res, axes=(0, 0))
        return tuple(np.tensordot(v, part, axes=(0, 0)) for part in res)

    def sample(self, point, part: str = "both") -> FieldSample:
        return superpose(self.layout, self.voltages, point, part)


def superpose(
    layout: TrapLayout, voltages: VoltageSet, point: Sequence[float], part: str = "both"
) -> FieldSample:
    """Field in volts at one point from the RF part, the DC part, or both.

    The RF part uses the full RF amplitude as its electrode voltage.
    """
    if part not in ("rf", "dc", "both"):
        raise ValueError(f"part must be 'rf', 'dc' or 'both', not {part!r}")
    voltages.validate(layout)
    sources = []
    weights = []
    if part in ("rf", "both"):
        for e in layout.rf_electrodes:
            sources.append(e)
            weights.append(voltages.rf_amplitude)
    if part in ("dc", "both"):
        for e in layout.dc_electrodes:
            sources.append(e)
            weights.append(float(voltages.dc.get(e.name, 0.0)))
    if not sources:
        return FieldSample(0.0, np.zeros(3), np.zeros((3, 3)))
    phi, grad, hess = basis_fields(sources, point, order=2)
    w = np.asarray(weights)
    return FieldSample(
        float(w @ phi[:, 0]),
        np.tensordot(w, grad[:, 0], axes=(0, 0)),
        np.tensordot(w, hess[:, 0], axes=(0, 0)),
    )
