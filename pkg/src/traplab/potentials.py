"""Static single-ion potential energy surfaces.

Both classes expose ``energy(points)`` in joules and ``gradient(points)`` in
J/m for arrays of shape ``(P, 3)``; characterization and crystal relaxation
only rely on that pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .fields import TrapFields

__all__ = ["IonSpecies", "SPECIES", "SR88", "HarmonicPotential", "EffectivePotential"]


@dataclass(frozen=True)
class IonSpecies:
    mass: float
    charge: float
    label: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("ion mass must be positive")
        if self.charge == 0:
            raise ValueError("ion charge must be non-zero")

    @classmethod
    def from_amu(cls, mass_u: float, charge_e: float = 1.0, label: str = "") -> "IonSpecies":
        return cls(mass_u * constants.atomic_mass, charge_e * constants.e, label)


SR88 = IonSpecies.from_amu(87.9056, 1, "88Sr+")

SPECIES = {
    "sr88": SR88,
    "sr87": IonSpecies.from_amu(86.9089, 1, "87Sr+"),
    "sr86": IonSpecies.from_amu(85.9093, 1, "86Sr+"),
    "sr84": IonSpecies.from_amu(83.9134, 1, "84Sr+"),
}


class HarmonicPotential:
    """Anisotropic harmonic well with given secular frequencies (Hz).

    ``axes`` rows are the principal directions; stiffness is ``m (2 pi f)^2``
    for the reference ``mass``.
    """

    def __init__(self, frequencies, mass: float = SR88.mass, center=(0.0, 0.0, 0.0), axes=None):
        self.frequencies = np.asarray(frequencies, dtype=float)
        self.mass = float(mass)
        self.center = np.asarray(center, dtype=float)
        self.axes = np.eye(3) if axes is None else np.asarray(axes, dtype=float)
        k = self.mass * (2 * np.pi * self.frequencies) ** 2
        self.stiffness = self.axes.T @ np.diag(k) @ self.axes

    def energy(self, points) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        return 0.5 * np.einsum("pi,ij,pj->p", d, self.stiffness, d)

    def gradient(self, points) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        return d @ self.stiffness

    def hessian(self, points) -> np.ndarray:
        n = len(np.atleast_2d(points))
        return np.broadcast_to(self.stiffness, (n, 3, 3)).copy()


class EffectivePotential:
    """Pseudo-potential plus static potential energy of one ion.

    U(r) = Q^2 |grad Phi_rf|^2 / (4 m W^2) + Q Phi_dc, with Phi_rf the
    full-amplitude RF potential and W the drive angular frequency.
    """

    def __init__(self, fields: TrapFields, species: IonSpecies = SR88):
        self.fields = fields
        self.species = species
        self.kappa = species.charge**2 / (4 * species.mass * fields.omega**2)

    def pseudo(self, points) -> np.ndarray:
        _, g = self.fields.rf(points, order=1)
        return self.kappa * np.einsum("pi,pi->p", g, g)

    def energy(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        u = self.pseudo(pts)
        if len(self.fields.dc_rects):
            u = u + self.species.charge * self.fields.dc(pts, order=0)
        return u

    def gradient(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        _, g, H = self.fields.rf(pts, order=2)
        out = 2 * self.kappa * np.einsum("pij,pj->pi", H, g)
        if len(self.fields.dc_rects):
            _, gdc = self.fields.dc(pts, order=1)
            out = out + self.species.charge * gdc
        return out

    def hessian(self, points, step: float = 1e-8) -> np.ndarray:
        """Hessian from central differences of the analytic gradient."""
        pts = np.atleast_2d(points)
        out = np.empty((len(pts), 3, 3))
        for i in range(3):
            dp = np.zeros(3)
            dp[i] = step
            out[:, i, :] = (self.gradient(pts + dp) - self.gradient(pts - dp)) / (2 * step)
        return 0.5 * (out + out.transpose(0, 2, 1))
