"""Planar electrode layouts.

Electrodes are axis-aligned rectangles in the ``y = 0`` plane; the trapping
volume is ``y > 0``.  ``x`` is transverse in-plane, ``z`` runs along the rails.
All lengths are stored in metres, frequencies in rad/s.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "ROLES",
    "Electrode",
    "TrapLayout",
    "VoltageSet",
    "LayoutError",
    "build_layout",
    "load_layout",
    "load_voltages",
    "apply_gapless",
    "layout_to_config",
    "data_path",
    "voltages_from_config",
]

ROLES = ("rf", "dc-central", "dc-lateral", "dc-endcap", "ground")

_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "micron": 1e-6}
_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6}

DEFAULT_RF_FREQUENCY = 2 * math.pi * 6.9e6


class LayoutError(ValueError):
    """Raised for malformed or physically inconsistent layouts."""


@dataclass(frozen=True)
class Electrode:
    name: str
    role: str
    x1: float
    x2: float
    z1: float
    z2: float

    def __post_init__(self):
        if self.role not in ROLES:
            raise LayoutError(f"electrode {self.name!r}: unknown role {self.role!r}")
        if not (self.x1 < self.x2 and self.z1 < self.z2):
            raise LayoutError(
                f"electrode {self.name!r}: need x1 < x2 and z1 < z2, got "
                f"x=({self.x1}, {self.x2}) z=({self.z1}, {self.z2})"
            )

    @property
    def rect(self) -> tuple[float, float, float, float]:
        return (self.x1, self.x2, self.z1, self.z2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.z2 - self.z1)

    def overlap_area(self, other: "Electrode") -> float:
        dx = min(self.x2, other.x2) - max(self.x1, other.x1)
        dz = min(self.z2, other.z2) - max(self.z1, other.z1)
        if dx <= 0 or dz <= 0:
            return 0.0
        return dx * dz


@dataclass(frozen=True)
class TrapLayout:
    electrodes: tuple[Electrode, ...]
    rf_frequency: float = DEFAULT_RF_FREQUENCY
    comment: str = ""

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        if not self.electrodes:
            raise LayoutError("layout has no electrodes")
        names = [e.name for e in self.electrodes]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise LayoutError(f"duplicate electrode names: {sorted(dup)}")
        if not self.rf_frequency > 0:
            raise LayoutError("rf_frequency must be positive")
        live = [e for e in self.electrodes if e.role != "ground"]
        for i, a in enumerate(live):
            for b in live[i + 1:]:
                if a.overlap_area(b) > 0:
                    raise LayoutError(f"electrodes {a.name!r} and {b.name!r} overlap")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.electrodes]

    def get(self, name: str) -> Electrode:
        for e in self.electrodes:
            if e.name == name:
                return e
        raise KeyError(name)

    def by_role(self, *roles: str) -> list[Electrode]:
        return [e for e in self.electrodes if e.role in roles]

    @property
    def rf_electrodes(self) -> list[Electrode]:
        return self.by_role("rf")

    @property
    def dc_electrodes(self) -> list[Electrode]:
        return self.by_role("dc-central", "dc-lateral", "dc-endcap")

    def rects(self, electrodes: Iterable[Electrode] | None = None) -> np.ndarray:
        els = self.electrodes if electrodes is None else list(electrodes)
        return np.array([e.rect for e in els], dtype=float).reshape(-1, 4)

    def scaled(self, factor: float) -> "TrapLayout":
        els = [
            replace(e, x1=e.x1 * factor, x2=e.x2 * factor, z1=e.z1 * factor, z2=e.z2 * factor)
            for e in self.electrodes
        ]
        return replace(self, electrodes=tuple(els))


@dataclass(frozen=True)
class VoltageSet:
    """RF amplitude plus static voltages keyed by electrode name."""

    rf_amplitude: float
    dc: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.rf_amplitude < 0:
            raise LayoutError("rf_amplitude must be >= 0")
        object.__setattr__(self, "dc", dict(self.dc))

    def validate(self, layout: TrapLayout) -> "VoltageSet":
        for name in self.dc:
            try:
                el = layout.get(name)
            except KeyError:
                raise LayoutError(f"voltage given for unknown electrode {name!r}") from None
            if el.role == "rf":
                raise LayoutError(f"static voltage given for rf electrode {name!r}")
        return self

    def with_dc(self, **updates: float) -> "VoltageSet":
        dc = dict(self.dc)
        dc.update(updates)
        return VoltageSet(self.rf_amplitude, dc)

    def with_rf(self, rf_amplitude: float) -> "VoltageSet":
        return VoltageSet(rf_amplitude, self.dc)

    def dc_vector(self, names: Iterable[str]) -> np.ndarray:
        return np.array([float(self.dc.get(n, 0.0)) for n in names])

    def to_config(self) -> dict:
        return {"rf_amplitude_V": self.rf_amplitude, "dc_V": dict(self.dc)}


# ---------------------------------------------------------------- config I/O

def data_path(name: str = "") -> Path:
    """Directory holding bundled configuration (``$TRAPLAB_DATA`` overrides)."""
    override = os.environ.get("TRAPLAB_DATA")
    if override:
        base = Path(override)
    else:
        base = Path(str(resources.files("traplab") / "data"))
    return base / name if name else base


def _resolve(path_or_name: str | os.PathLike) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    for candidate in (data_path(str(p)), data_path(f"{p}.json")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no such layout/voltage file or bundled config: {path_or_name}")


def _read_config(config) -> dict:
    if isinstance(config, Mapping):
        return dict(config)
    try:
        data = json.loads(config)
    except (TypeError, json.JSONDecodeError) as exc:
        raise LayoutError(f"cannot parse layout config: {exc}") from exc
    if not isinstance(data, dict):
        raise LayoutError("layout config must be a JSON object")
    return data


def _frequency(data: Mapping) -> float:
    for unit, scale in _FREQ_UNITS.items():
        key = f"rf_frequency_{unit}"
        if key in data:
            return 2 * math.pi * float(data[key]) * scale
    if "rf_frequency_rad_s" in data:
        return float(data["rf_frequency_rad_s"])
    return DEFAULT_RF_FREQUENCY


def build_layout(config) -> TrapLayout:
    """Build a validated :class:`TrapLayout` from a JSON string or mapping.

    Each electrode entry carries ``name, role, x1, x2, z1, z2`` and an optional
    ``unit`` (``m``, ``mm``, ``um``; default ``um``).  The drive frequency is
    given as ``rf_frequency_MHz`` (or ``_kHz``, ``_Hz``, ``_rad_s``).
    """
    data = _read_config(config)
    entries = data.get("electrodes")
    if not entries:
        raise LayoutError("layout config has no 'electrodes' list")
    electrodes = []
    for k, entry in enumerate(entries):
        try:
            name = str(entry["name"])
            role = entry["role"]
            unit = entry.get("unit", data.get("unit", "um"))
            scale = _LENGTH_UNITS[unit]
            coords = [float(entry[c]) * scale for c in ("x1", "x2", "z1", "z2")]
        except KeyError as exc:
            raise LayoutError(f"electrode #{k}: missing or unknown field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise LayoutError(f"electrode #{k}: {exc}") from None
        electrodes.append(Electrode(name, role, *coords))
    return TrapLayout(tuple(electrodes), _frequency(data), str(data.get("comment", "")))


def layout_to_config(layout: TrapLayout, unit: str = "um") -> dict:
    """Inverse of :func:`build_layout`."""
    scale = _LENGTH_UNITS[unit]
    return {
        "comment": layout.comment,
        "rf_frequency_rad_s": layout.rf_frequency,
        "electrodes": [
            {
                "name": e.name,
                "role": e.role,
                "x1": e.x1 / scale,
                "x2": e.x2 / scale,
                "z1": e.z1 / scale,
                "z2": e.z2 / scale,
                "unit": unit,
            }
            for e in layout.electrodes
        ],
    }


def load_layout(path_or_name="five_wire", gapless: bool = False) -> TrapLayout:
    """Load a layout file; bare names are looked up in the bundled data."""
    layout = build_layout(_resolve(path_or_name).read_text(encoding="utf-8"))
    return apply_gapless(layout) if gapless else layout


def load_voltages(path_or_name, layout: TrapLayout | None = None) -> VoltageSet:
    """Read a voltage file.

    ``dc_V`` keys may be electrode names or roles; a role key sets every
    electrode with that role (explicit names win).
    """
    data = _read_config(_resolve(path_or_name).read_text(encoding="utf-8"))
    return voltages_from_config(data, layout)


def voltages_from_config(data: Mapping, layout: TrapLayout | None = None) -> VoltageSet:
    try:
        rf = float(data.get("rf_amplitude_V", 0.0))
        raw = {k: float(v) for k, v in dict(data.get("dc_V", {})).items()}
    except (TypeError, ValueError) as exc:
        raise LayoutError(f"bad voltage config: {exc}") from None
    if layout is None:
        return VoltageSet(rf, raw)
    dc: dict[str, float] = {}
    for key, v in raw.items():
        if key in ROLES:
            for e in layout.by_role(key):
                dc.setdefault(e.name, v)
    for key, v in raw.items():
        if key not in ROLES:
            dc[key] = v
    return VoltageSet(rf, dc).validate(layout)


# ------------------------------------------------------------ gapless model

def _facing_gap(el: Electrode, others: list[Electrode], axis: str, side: int, max_gap: float):
    """Coordinate of the neighbour face across the gap at ``el``'s edge on
    ``side`` (-1 low, +1 high), or None when the edge faces open ground."""
    if axis == "x":
        edge = el.x2 if side > 0 else el.x1
        lo, hi = el.z1, el.z2
    else:
        edge = el.z2 if side > 0 else el.z1
        lo, hi = el.x1, el.x2
    gaps = []
    for o in others:
        if axis == "x":
            olo, ohi = o.z1, o.z2
            face = o.x1 if side > 0 else o.x2
        else:
            olo, ohi = o.x1, o.x2
            face = o.z1 if side > 0 else o.z2
        a, b = max(lo, olo), min(hi, ohi)
        if b - a <= 0:
            continue
        g = (face - edge) * side
        if -1e-15 <= g <= max_gap:
            gaps.append((max(g, 0.0), o.name, a, b, face))
    if not gaps:
        return None
    # neighbours hidden behind a closer electrode do not face this edge
    gaps.sort()
    covered: list[tuple[float, float]] = []
    facing = []
    for g, name, a, b, face in gaps:
        free = b - a - sum(max(0.0, min(b, cb) - max(a, ca)) for ca, cb in covered)
        if free > 1e-12:
            facing.append((g, name, face))
        covered.append((a, b))
    values = sorted({round(g, 12) for g, _, _ in facing})
    if len(values) > 1:
        names = ", ".join(sorted(n for _, n, _ in facing))
        raise LayoutError(
            f"ambiguous gap on {axis}{'+' if side > 0 else '-'} edge of {el.name!r}: "
            f"neighbours {names} sit at different gaps {values}"
        )
    return facing[0][2]


def apply_gapless(layout: TrapLayout, max_gap: float = 300e-6) -> TrapLayout:
    """Split every inter-electrode gap evenly between its two neighbours.

    Edges separated by at most ``max_gap`` count as sharing a gap; farther
    neighbours are treated as open ground plane and left alone.
    """
    out = []
    els = list(layout.electrodes)
    for el in els:
        others = [o for o in els if o is not el]
        edges = {("x", -1): el.x1, ("x", 1): el.x2, ("z", -1): el.z1, ("z", 1): el.z2}
        for key, edge in list(edges.items()):
            face = _facing_gap(el, others, *key, max_gap)
            if face is not None:
                # both neighbours evaluate the same expression, so they meet exactly
                edges[key] = 0.5 * (min(edge, face) + max(edge, face))
        out.append(
            replace(el, x1=edges[("x", -1)], x2=edges[("x", 1)], z1=edges[("z", -1)], z2=edges[("z", 1)])
        )
    return replace(layout, electrodes=tuple(out))
