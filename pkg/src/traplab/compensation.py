"""Micromotion compensation: null the static field at the RF null.

A free degree of freedom is a single electrode, a role name (all electrodes
of that role moved together), a list of names (common mode) or a mapping
``{name: weight}`` for weighted combinations such as differential pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .characterize import TrapCharacterization, UnstableTrapError, characterize, find_rf_null
from .fields import TrapFields
from .geometry import ROLES, TrapLayout, VoltageSet
from .potentials import SR88, IonSpecies

__all__ = [
    "StrayField",
    "CompensationSolution",
    "CompensationRankError",
    "default_free_set",
    "solve_compensation",
    "micromotion_amplitude",
    "micromotion_from",
]

AXES = "xyz"


class CompensationRankError(ValueError):
    def __init__(self, message, axes=()):
        super().__init__(message)
        self.axes = tuple(axes)


@dataclass(frozen=True)
class StrayField:
    vector: tuple = (0.0, 0.0, 0.0)  # V/m, uniform

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise ValueError("stray field must be a finite 3-vector")
        object.__setattr__(self, "vector", tuple(float(c) for c in v))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.vector)

    def scaled(self, factor: float) -> "StrayField":
        return StrayField(tuple(factor * c for c in self.vector))


@dataclass
class CompensationSolution:
    voltage_deltas: dict  # electrode -> V
    residual_field: float  # V/m, magnitude over the compensated axes
    residual_vector: np.ndarray  # V/m, full vector at the null
    micromotion_amplitude: np.ndarray | None  # m, per principal axis
    null_position: np.ndarray
    axes: str

    def apply(self, base: VoltageSet) -> VoltageSet:
        dc = dict(base.dc)
        for k, dv in self.voltage_deltas.items():
            dc[k] = dc.get(k, 0.0) + dv
        return VoltageSet(base.rf_amplitude, dc)

    def table(self) -> str:
        lines = [f"{'electrode':<16}{'delta_V':>16}"]
        for k in sorted(self.voltage_deltas):
            lines.append(f"{k:<16}{self.voltage_deltas[k]:>16.9f}")
        r = self.residual_vector
        lines.append(f"residual_field_V_per_m {self.residual_field:.3e}")
        lines.append(f"residual_vector_V_per_m {r[0]:.3e} {r[1]:.3e} {r[2]:.3e}")
        lines.append(f"compensated_axes {self.axes}")
        if self.micromotion_amplitude is not None:
            a = self.micromotion_amplitude * 1e9
            lines.append(f"micromotion_amplitude_nm {a[0]:.4f} {a[1]:.4f} {a[2]:.4f}")
        return "\n".join(lines) + "\n"


def default_free_set(layout: TrapLayout) -> list:
    """Central electrode(s), the laterals on each side, and the endcaps in common mode."""
    lat = layout.by_role("dc-lateral")
    left = [e.name for e in lat if e.x1 + e.x2 < 0]
    right = [e.name for e in lat if e.x1 + e.x2 > 0]
    items = ["dc-central"]
    items += [g for g in (left, right) if g]
    if layout.by_role("dc-endcap"):
        items.append("dc-endcap")
    return items


def _expand(item, layout: TrapLayout) -> dict:
    if isinstance(item, Mapping):
        combo = {str(k): float(v) for k, v in item.items()}
    elif isinstance(item, str):
        if item in ROLES:
            combo = {e.name: 1.0 for e in layout.by_role(item)}
            if not combo:
                raise ValueError(f"layout has no electrodes with role {item!r}")
        else:
            combo = {item: 1.0}
    else:
        combo = {str(k): 1.0 for k in item}
    dc_names = {e.name for e in layout.dc_electrodes}
    for k in combo:
        if k not in dc_names:
            raise ValueError(f"{k!r} is not a DC electrode of the layout")
    return combo


def _parse_axes(axes) -> list[int]:
    idx = sorted({AXES.index(c) for c in axes.lower()})
    if not idx:
        raise ValueError("at least one axis must be compensated")
    return idx


def solve_compensation(
    layout: TrapLayout,
    base_voltages: VoltageSet,
    species: IonSpecies = SR88,
    stray: StrayField | None = None,
    free_electrodes: Sequence | None = None,
    axes: str = "xyz",
    tol: float = 1e-3,
    characterization: TrapCharacterization | None = None,
) -> CompensationSolution:
    """Minimal-norm DC adjustments that cancel the static field at the RF null.

    The field to cancel is the layout DC field plus the uniform ``stray``
    field; only the components listed in ``axes`` are targeted.  Raises
    :class:`CompensationRankError` naming any requested axis the free set
    cannot influence.
    """
    stray = stray or StrayField()
    base_voltages.validate(layout)
    free = default_free_set(layout) if free_electrodes is None else list(free_electrodes)
    if not free:
        raise ValueError("no free electrodes given")
    combos = [_expand(it, layout) for it in free]
    fields = TrapFields(layout, base_voltages)
    null = find_rf_null(fields)
    names = fields.dc_names
    _, grads = fields.dc_basis(null, order=1)  # (E, 1, 3)
    grads = {n: grads[k, 0] for k, n in enumerate(names)}
    # field per volt of each free item: E = -grad(phi)
    G = np.column_stack([-sum(w * grads[n] for n, w in c.items()) for c in combos])
    e0 = -fields.dc(null, order=1)[1][0] + stray.array
    idx = _parse_axes(axes)

    # an axis is uncontrollable when it lies (numerically) outside span(G)
    u, s, _ = np.linalg.svd(G, full_matrices=False)
    rank_tol = 1e-9 * (s.max() if s.size and s.max() > 0 else 1.0)
    basis = u[:, s > rank_tol]
    bad = []
    for i in idx:
        e = np.eye(3)[i]
        if np.linalg.norm(e - basis @ (basis.T @ e)) > 1e-6:
            bad.append(AXES[i])
    if len(idx) > 1 and not bad and np.linalg.matrix_rank(G[idx], tol=rank_tol) < len(idx):
        bad = [AXES[i] for i in idx]
    if bad:
        raise CompensationRankError(
            f"free electrodes cannot control the field along {', '.join(bad)}", bad
        )

    Gs = G[idx]
    delta = np.linalg.lstsq(Gs, -e0[idx], rcond=None)[0]
    residual = e0 + G @ delta
    res_mag = float(np.linalg.norm(residual[idx]))
    if res_mag > tol:
        raise CompensationRankError(f"residual field {res_mag:.3e} V/m exceeds tolerance {tol:.1e}", [])

    deltas: dict = {}
    for c, d in zip(combos, delta):
        for n, w in c.items():
            deltas[n] = deltas.get(n, 0.0) + w * float(d)

    try:
        if characterization is None:
            compensated = VoltageSet(base_voltages.rf_amplitude, {
                n: base_voltages.dc.get(n, 0.0) + deltas.get(n, 0.0) for n in set(base_voltages.dc) | set(deltas)
            })
            characterization = characterize(TrapFields(layout, compensated), species, depth=False)
        char = characterization
        amp = micromotion_amplitude(char, StrayField(tuple(residual)), species)
    except UnstableTrapError:
        amp = None
    return CompensationSolution(deltas, res_mag, residual, amp, null, "".join(AXES[i] for i in idx))


def micromotion_from(frequencies, q, axes, field, species: IonSpecies = SR88) -> np.ndarray:
    """Excess micromotion amplitude (m) per principal axis for a uniform field.

    Displacement ``u_i = Q E_i / (m w_i^2)`` and amplitude ``|q_i| u_i / 2``.
    """
    f = np.asarray(frequencies, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise UnstableTrapError("micromotion needs a stable trap (positive secular frequencies)")
    e = np.asarray(axes, dtype=float) @ np.asarray(field, dtype=float)
    u = species.charge * e / (species.mass * (2 * np.pi * f) ** 2)
    return np.abs(np.asarray(q, dtype=float)) * np.abs(u) / 2


def micromotion_amplitude(char: TrapCharacterization, stray: StrayField, species: IonSpecies = SR88) -> np.ndarray:
    if not char.stable:
        raise UnstableTrapError("characterization is not stable")
    return micromotion_from(char.secular_frequencies, char.q_params, char.principal_axes, stray.array, species)
