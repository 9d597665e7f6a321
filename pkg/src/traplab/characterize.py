"""RF null, secular frequencies, Mathieu a/q parameters and trap depth."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants, ndimage, optimize

from .fields import TrapFields
from .geometry import TrapLayout, VoltageSet
from .potentials import SR88, EffectivePotential, IonSpecies

__all__ = [
    "NullNotFoundError",
    "UnstableTrapError",
    "TrapCharacterization",
    "DepthResult",
    "find_rf_null",
    "pseudopotential",
    "stability_params",
    "secular_frequencies",
    "find_minimum",
    "trap_depth",
    "frequency_scan",
    "characterize",
    "label_axes",
    "mathieu_frequencies",
]

AXES = "xyz"
SHALLOW_TRAP_EV = 0.020


class NullNotFoundError(RuntimeError):
    pass


class UnstableTrapError(RuntimeError):
    def __init__(self, message, axes=()):
        super().__init__(message)
        self.axes = tuple(axes)


def label_axes(vectors: np.ndarray):
    """Order principal vectors (columns) as x-like, y-like, z-like.

    Returns ``(order, oriented)`` where ``order[i]`` is the column assigned to
    axis ``i`` and ``oriented`` holds those columns with a positive dominant
    component.
    """
    vec = np.asarray(vectors)
    best, best_score = None, -1.0
    for perm in itertools.permutations(range(3)):
        score = np.prod([abs(vec[i, perm[i]]) for i in range(3)])
        if score > best_score + 1e-15:
            best, best_score = perm, score
    cols = []
    for i, c in enumerate(best):
        v = vec[:, c].copy()
        if v[i] < 0:
            v = -v
        cols.append(v)
    return list(best), np.array(cols)


def _labelled_eigs(matrix):
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.T))
    order, axes = label_axes(v)
    return w[order], axes


# ------------------------------------------------------------------ RF null

def find_rf_null(
    fields: TrapFields,
    seed=None,
    y_range=(5e-6, 5e-3),
    n_scan: int = 400,
    tol: float = 1e-18,
    max_iter: int = 100,
) -> np.ndarray:
    """Locate the RF field node above the electrodes.

    The search starts on the ``x = x_c, z = z_c`` line through the centre of
    the RF electrodes, where ``|grad Phi_rf|^2`` is scanned in height; the
    deepest interior minimum seeds a damped Newton iteration on
    ``grad Phi_rf = 0``.  ``tol`` bounds ``|grad Phi_rf|^2`` in V^2/m^2 for
    1 V of RF drive.
    """
    if len(fields.rf_rects) == 0:
        raise NullNotFoundError("layout has no rf electrodes")
    r = fields.rf_rects
    finite = np.clip(r, -1e3, 1e3)
    xc = 0.5 * (finite[:, 0].min() + finite[:, 1].max())
    zc = 0.5 * (finite[:, 2].min() + finite[:, 3].max())
    if seed is None:
        ys = np.geomspace(*y_range, n_scan)
        pts = np.column_stack([np.full(n_scan, xc), ys, np.full(n_scan, zc)])
        _, g = fields.rf_unit(pts, order=1)
        g2 = np.einsum("pi,pi->p", g, g)
        # relative dip: a node shows up as a sharp local minimum of |g|^2
        interior = np.where((g2[1:-1] < g2[:-2]) & (g2[1:-1] < g2[2:]))[0] + 1
        if len(interior) == 0:
            raise NullNotFoundError(
                f"no rf null along x={xc:.3e} m, z={zc:.3e} m for y in [{y_range[0]:.1e}, {y_range[1]:.1e}] m"
            )
        k = interior[np.argmin(g2[interior] / np.maximum(g2[interior - 1], 1e-300))]
        seed = pts[k]
    p = np.asarray(seed, dtype=float).copy()
    for _ in range(max_iter):
        _, g, H = fields.rf_unit(p, order=2)
        g, H = g[0], H[0]
        if g @ g < tol:
            break
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            trial = p + lam * step
            if trial[1] > 0:
                _, gt = fields.rf_unit(trial, order=1)
                if gt[0] @ gt[0] < g @ g:
                    break
            lam *= 0.5
        else:
            break
        p = trial
    _, g = fields.rf_unit(p, order=1)
    if not (p[1] > 0 and g[0] @ g[0] < tol):
        raise NullNotFoundError(
            f"rf null search did not converge (|grad|^2={g[0] @ g[0]:.3e}) "
            f"scanning y in [{y_range[0]:.1e}, {y_range[1]:.1e}] m"
        )
    return p


def pseudopotential(fields: TrapFields, species: IonSpecies, points) -> np.ndarray:
    """Pseudo-potential in eV at ``points`` (shape ``(P, 3)`` or ``(3,)``)."""
    pts = np.asarray(points, dtype=float)
    out = EffectivePotential(fields, species).pseudo(pts.reshape(-1, 3)) / constants.e
    return out if pts.ndim > 1 else float(out[0])


def stability_params(fields: TrapFields, species: IonSpecies = SR88, null=None):
    """Generalized Mathieu parameters at the RF null.

    Returns ``(a, q, axes)``: ``q_i = 2 Q lambda_i(H_rf) / (m W^2)`` and
    ``a_i = 4 Q lambda_i(H_dc) / (m W^2)``, each labelled x-, y-, z-like.
    """
    p = find_rf_null(fields) if null is None else np.asarray(null)
    _, _, Hrf = fields.rf(p)
    _, _, Hdc = fields.dc(p)
    scale = species.charge / (species.mass * fields.omega**2)
    lq, axes = _labelled_eigs(Hrf[0])
    if len(fields.dc_rects):
        la, _ = _labelled_eigs(Hdc[0])
    else:
        la = np.zeros(3)
    if not np.any(lq):
        axes = np.eye(3)
    return 4 * scale * la, 2 * scale * lq, axes


def mathieu_frequencies(a, q, omega: float) -> np.ndarray:
    """Lowest-order secular frequencies (Hz): (W / 4 pi) sqrt(a + q^2 / 2)."""
    a, q = np.asarray(a), np.asarray(q)
    return omega / (4 * np.pi) * np.sqrt(a + q * q / 2)


# --------------------------------------------------------------- minimum

def find_minimum(potential, start, scale: float = 1e-6, max_shift: float | None = None):
    """Local minimum of ``potential`` near ``start``; returns position (m)."""
    start = np.asarray(start, dtype=float)
    e0 = float(potential.energy(start)[0])
    escale = max(abs(e0), constants.e * 1e-6)

    def fun(u):
        p = start + u * scale
        if p[1] <= 0:
            return np.inf, np.zeros(3)
        return (
            float(potential.energy(p)[0] - e0) / escale,
            potential.gradient(p)[0] * scale / escale,
        )

    res = optimize.minimize(fun, np.zeros(3), jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
    p = start + res.x * scale
    # Newton polish
    for _ in range(4):
        g = potential.gradient(p)[0]
        H = potential.hessian(p)[0] if hasattr(potential, "hessian") else None
        if H is None or np.any(np.linalg.eigvalsh(H) <= 0):
            break
        p = p - np.linalg.solve(H, g)
    if max_shift is not None and np.linalg.norm(p - start) > max_shift:
        raise UnstableTrapError(
            f"no bounded minimum within {max_shift:.2e} m of {start} (moved to {p})"
        )
    if not np.all(np.isfinite(p)) or p[1] <= 0:
        raise UnstableTrapError("minimum search left the trapping half-space")
    return p


def secular_frequencies(potential, mass: float, start, max_shift=None):
    """Frequencies (Hz) and axes (rows) from the Hessian at the potential minimum.

    Returns ``(frequencies, axes, minimum)``.
    """
    p = find_minimum(potential, start, max_shift=max_shift)
    H = potential.hessian(p)[0]
    lam, axes = _labelled_eigs(H)
    bad = [AXES[i] for i in range(3) if lam[i] <= 0]
    if bad:
        raise UnstableTrapError(f"potential is not confining along {', '.join(bad)}", bad)
    return np.sqrt(lam / mass) / (2 * np.pi), axes, p


# ------------------------------------------------------------------- depth

@dataclass
class DepthResult:
    depth: float  # eV
    minimum: np.ndarray
    escape_point: np.ndarray | None
    trapped: bool
    saddle: bool  # True when the escape point is an interior saddle


def _box(minimum, height, extent, floor):
    half = extent * height
    lo = np.array([minimum[0] - half, max(floor * height, 1e-9), minimum[2] - half])
    hi = np.array([minimum[0] + half, minimum[1] + half, minimum[2] + half])
    return lo, hi


def trap_depth(
    potential,
    minimum,
    height: float | None = None,
    extent: float = 3.0,
    n: int = 41,
    floor: float = 0.02,
    refine: bool = True,
) -> DepthResult:
    """Energy (eV) needed to leave the basin around ``minimum``.

    The effective potential is sampled on a box reaching ``extent * height``
    from the minimum in every direction (clipped at ``floor * height`` above
    the surface).  The spill level of the basin is bracketed by flooding the
    grid; the grid spill point is then refined to a true saddle (interior)
    or a constrained face minimum (box boundary).
    """
    minimum = np.asarray(minimum, dtype=float)
    h = minimum[1] if height is None else height
    lo, hi = _box(minimum, h, extent, floor)
    axes = [np.linspace(lo[i], hi[i], n) for i in range(3)]
    # keep the minimum's x and z on the grid so symmetric faces are sampled exactly
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    values = potential.energy(grid.reshape(-1, 3)).reshape(n, n, n)
    e_min = float(potential.energy(minimum)[0])
    start = tuple(np.argmin(np.abs(axes[i] - minimum[i])) for i in range(3))

    def basin(level):
        lab, _ = ndimage.label(values <= level)
        tag = lab[start]
        return lab == tag if tag else np.zeros_like(values, bool)

    def touches(mask):
        return (
            mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any()
            or mask[:, :, 0].any() or mask[:, :, -1].any()
        )

    lo_e = max(values[start], e_min)
    hi_e = float(values.max())
    if not touches(basin(hi_e)):
        hi_e = hi_e + 1.0
    if touches(basin(lo_e)):
        return DepthResult(0.0, minimum, None, False, False)
    for _ in range(60):
        mid = 0.5 * (lo_e + hi_e)
        if touches(basin(mid)):
            hi_e = mid
        else:
            lo_e = mid
        if hi_e - lo_e < 1e-9 * constants.e:
            break
    inner = basin(lo_e)
    outer = basin(hi_e)
    frontier = outer & ~inner & ndimage.binary_dilation(inner)
    idx = np.argwhere(frontier)
    if len(idx) == 0:
        return DepthResult((hi_e - e_min) / constants.e, minimum, None, True, False)
    cell = idx[np.argmin([values[tuple(i)] for i in idx])]
    spill = grid[tuple(cell)]
    level = float(values[tuple(cell)])
    on_face = [(i, 0 if cell[i] == 0 else 1) for i in range(3) if cell[i] in (0, n - 1)]
    escape, is_saddle = spill, False
    if refine:
        step = (hi - lo) / (n - 1)
        if on_face:
            fixed = {i for i, _ in on_face}
            free = [i for i in range(3) if i not in fixed]

            def f(u):
                p = spill.copy()
                p[free] = u
                return float(potential.energy(p)[0] / constants.e), potential.gradient(p)[0][free] / constants.e

            bounds = [(lo[i], hi[i]) for i in free]
            res = optimize.minimize(f, spill[free], jac=True, method="L-BFGS-B", bounds=bounds)
            cand = spill.copy()
            cand[free] = res.x
            val = float(potential.energy(cand)[0])
            if val <= level and np.all(np.abs(cand - spill) <= 3 * step + 1e-15):
                escape, level = cand, val
        else:
            sol = optimize.root(lambda p: potential.gradient(p)[0] / constants.e * 1e-6, spill, method="hybr")
            cand = sol.x
            if sol.success and cand[1] > 0 and np.all(np.abs(cand - spill) <= 3 * step):
                Hs = potential.hessian(cand)[0]
                if np.sum(np.linalg.eigvalsh(Hs) < 0) == 1:
                    escape, level, is_saddle = cand, float(potential.energy(cand)[0]), True
    return DepthResult(max(level - e_min, 0.0) / constants.e, minimum, escape, True, is_saddle)


# ---------------------------------------------------------- full summary

@dataclass
class TrapCharacterization:
    null_position: np.ndarray
    ion_height: float
    minimum_position: np.ndarray
    secular_frequencies: np.ndarray  # Hz, x-, y-, z-like
    principal_axes: np.ndarray  # rows
    q_params: np.ndarray
    a_params: np.ndarray
    trap_depth: float  # eV
    stable: bool
    rf_frequency: float  # rad/s
    escape_point: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    def mathieu_frequencies(self) -> np.ndarray:
        return mathieu_frequencies(self.a_params, self.q_params, self.rf_frequency)

    def to_dict(self) -> dict:
        def um(v):
            return None if v is None else [float(x) / 1e-6 for x in v]

        return {
            "null_position_um": um(self.null_position),
            "ion_height_um": self.ion_height / 1e-6,
            "minimum_position_um": um(self.minimum_position),
            "secular_frequencies_kHz": [float(f) / 1e3 for f in self.secular_frequencies],
            "principal_axes": [[float(c) for c in row] for row in self.principal_axes],
            "q": [float(v) for v in self.q_params],
            "a": [float(v) for v in self.a_params],
            "trap_depth_meV": self.trap_depth * 1e3,
            "escape_point_um": um(self.escape_point),
            "stable": bool(self.stable),
            "rf_frequency_MHz": self.rf_frequency / (2 * np.pi * 1e6),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        rows = [
            ("ion height", f"{self.ion_height / 1e-6:10.2f}", "um"),
            ("trap depth", f"{self.trap_depth * 1e3:10.2f}", "meV"),
            ("stable", f"{str(self.stable):>10}", ""),
        ]
        for i, ax in enumerate(AXES):
            rows.append((f"omega_{ax}/2pi", f"{self.secular_frequencies[i] / 1e3:10.2f}", "kHz"))
        for i, ax in enumerate(AXES):
            rows.append((f"q_{ax}", f"{self.q_params[i]:10.5f}", ""))
        for i, ax in enumerate(AXES):
            rows.append((f"a_{ax}", f"{self.a_params[i]:10.5f}", ""))
        lines = [f"{name:<14}{value} {unit}".rstrip() for name, value, unit in rows]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def characterize(
    fields: TrapFields, species: IonSpecies = SR88, depth: bool = True, depth_grid: int = 41
) -> TrapCharacterization:
    """Full characterization of one operating point.

    Raises :class:`UnstableTrapError` when the effective potential has no
    confining minimum near the RF null.
    """
    if fields.rf_amplitude <= 0:
        raise UnstableTrapError("rf amplitude must be positive")
    null = find_rf_null(fields)
    a, q, _ = stability_params(fields, species, null)
    pot = EffectivePotential(fields, species)
    freqs, axes, minimum = secular_frequencies(pot, species.mass, null, max_shift=0.5 * null[1])
    warnings = []
    depth_ev, escape = float("nan"), None
    if depth:
        res = trap_depth(pot, minimum, height=null[1], n=depth_grid)
        depth_ev, escape = res.depth, res.escape_point
        if res.depth < SHALLOW_TRAP_EV:
            warnings.append(f"shallow trap: depth {res.depth * 1e3:.1f} meV is below {SHALLOW_TRAP_EV * 1e3:.0f} meV")
    shift = np.linalg.norm(minimum - null)
    if shift > 1e-6:
        warnings.append(f"potential minimum is {shift / 1e-6:.2f} um from the rf null")
    return TrapCharacterization(
        null_position=null,
        ion_height=float(null[1]),
        minimum_position=minimum,
        secular_frequencies=freqs,
        principal_axes=axes,
        q_params=q,
        a_params=a,
        trap_depth=depth_ev,
        stable=True,
        rf_frequency=fields.omega,
        escape_point=escape,
        warnings=warnings,
    )


def frequency_scan(layout: TrapLayout, voltages: VoltageSet, species: IonSpecies, vrf_list) -> list[dict]:
    """Secular frequencies versus RF amplitude at fixed static voltages.

    Unstable rows are kept with ``stable=False`` and NaN frequencies.
    """
    rows = []
    for vrf in vrf_list:
        fields = TrapFields(layout, voltages.with_rf(float(vrf)))
        row = {"V_rf": float(vrf)}
        try:
            null = find_rf_null(fields)
            freqs, _, _ = secular_frequencies(
                EffectivePotential(fields, species), species.mass, null, max_shift=0.5 * null[1]
            )
            row.update(f_x=freqs[0], f_y=freqs[1], f_z=freqs[2], stable=True, note="")
        except (UnstableTrapError, NullNotFoundError) as exc:
            row.update(f_x=math.nan, f_y=math.nan, f_z=math.nan, stable=False, note=str(exc))
        rows.append(row)
    return rows
