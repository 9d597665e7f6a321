"""Molecular dynamics of trapped ions.

Trap forces come either from a harmonic model, from the layout fields in the
pseudo-potential approximation, or from the full time-dependent RF field.
Coulomb repulsion is summed directly over all pairs.  Laser cooling enters as
Langevin friction plus noise on the cooled ions, integrated with a BAOAB
splitting whose friction/noise part is the exact Ornstein-Uhlenbeck update;
without friction the scheme is velocity Verlet.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import constants, optimize

from .fields import TrapFields
from .geometry import TrapLayout, VoltageSet, _resolve, voltages_from_config
from .potentials import SR88, IonSpecies

__all__ = [
    "COULOMB_K",
    "DEFAULT_HEIGHT",
    "IonEnsemble",
    "CoolingModel",
    "Tickle",
    "Schedule",
    "EscapeEvent",
    "ConvergenceError",
    "HarmonicTrap",
    "LayoutTrap",
    "coulomb_forces",
    "coulomb_energy",
    "Integrator",
    "step",
    "minimize_crystal",
    "relax",
    "run_schedule",
    "RunResult",
    "tickle_response",
    "load_schedule",
]

COULOMB_K = 1 / (4 * math.pi * constants.epsilon_0)
DEFAULT_HEIGHT = 504e-6


class ConvergenceError(RuntimeError):
    pass


@dataclass
class EscapeEvent:
    index: int
    time: float
    position: np.ndarray


@dataclass
class IonEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    species: list
    laser_cooled: np.ndarray
    active: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        n = len(self.positions)
        if n < 1:
            raise ValueError("ensemble needs at least one ion")
        self.velocities = np.array(self.velocities, dtype=float).reshape(n, 3)
        if isinstance(self.species, IonSpecies):
            self.species = [self.species] * n
        self.species = list(self.species)
        if len(self.species) != n:
            raise ValueError("one species entry per ion required")
        self.laser_cooled = np.broadcast_to(np.asarray(self.laser_cooled, dtype=bool), (n,)).copy()
        self.active = np.ones(n, bool) if self.active is None else np.asarray(self.active, bool).copy()
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("non-finite ion coordinates")
        if np.any(self.positions[self.active, 1] <= 0):
            raise ValueError("ions must start above the electrode plane (y > 0)")
        self.masses = np.array([s.mass for s in self.species])
        self.charges = np.array([s.charge for s in self.species])

    @classmethod
    def at_rest(cls, positions, species=SR88, laser_cooled=True) -> "IonEnsemble":
        pos = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls(pos, np.zeros_like(pos), species, laser_cooled)

    def __len__(self):
        return len(self.positions)

    def copy(self) -> "IonEnsemble":
        return IonEnsemble(
            self.positions.copy(), self.velocities.copy(), list(self.species),
            self.laser_cooled.copy(), self.active.copy(), self.time,
        )

    def kinetic_energy(self) -> float:
        m = self.masses[self.active]
        v = self.velocities[self.active]
        return 0.5 * float(np.sum(m[:, None] * v * v))

    def temperature(self, mask=None) -> float:
        """Kinetic temperature (K) of the selected ions (default: cooled, active)."""
        sel = self.active & (self.laser_cooled if mask is None else mask)
        if not sel.any():
            return 0.0
        m = self.masses[sel]
        v = self.velocities[sel]
        return float(np.sum(m[:, None] * v * v) / (3 * sel.sum() * constants.k))


@dataclass(frozen=True)
class CoolingModel:
    """Langevin bath applied to laser-cooled ions only.

    ``friction`` is the damping coefficient in kg/s, ``temperature`` the bath
    temperature in K.
    """

    friction: float = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        if self.friction < 0 or self.temperature < 0:
            raise ValueError("friction and temperature must be non-negative")

    @staticmethod
    def doppler_limit(linewidth_hz: float = 21.7e6) -> float:
        """hbar Gamma / 2 k_B for a transition of natural linewidth Gamma/2pi."""
        return constants.hbar * 2 * math.pi * linewidth_hz / (2 * constants.k)

    @classmethod
    def doppler(cls, friction: float = 1e-20, linewidth_hz: float = 21.7e6) -> "CoolingModel":
        return cls(friction, cls.doppler_limit(linewidth_hz))


# ----------------------------------------------------------------- schedule

@dataclass(frozen=True)
class Tickle:
    electrode: str
    amplitude: float  # V
    frequency: float  # Hz


@dataclass
class Schedule:
    """Piecewise-linear voltage program with an optional tickle drive."""

    times: Sequence[float]
    voltages: Sequence[VoltageSet]
    tickle: Tickle | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.voltages = list(self.voltages)
        if len(self.times) != len(self.voltages) or len(self.times) == 0:
            raise ValueError("schedule needs matching, non-empty times and voltage sets")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("schedule times must be strictly increasing")

    @classmethod
    def constant(cls, voltages: VoltageSet, tickle: Tickle | None = None) -> "Schedule":
        return cls([0.0], [voltages], tickle)

    @classmethod
    def ramp(cls, start: VoltageSet, end: VoltageSet, rate: float = 100.0, hold: float = 0.0,
             t0: float = 0.0) -> "Schedule":
        """Linear ramp between two sets at ``rate`` V/s on the largest change."""
        names = sorted(set(start.dc) | set(end.dc))
        dv = max(
            [abs(end.rf_amplitude - start.rf_amplitude)]
            + [abs(end.dc.get(n, 0.0) - start.dc.get(n, 0.0)) for n in names]
        )
        duration = dv / rate if dv > 0 else 0.0
        times = [0.0]
        sets = [start]
        if t0 > 0:
            times.append(t0)
            sets.append(start)
        if duration > 0:
            times.append(times[-1] + duration)
            sets.append(end)
        if hold > 0:
            times.append(times[-1] + hold)
            sets.append(end)
        return cls(times, sets)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def validate(self, layout: TrapLayout) -> "Schedule":
        for v in self.voltages:
            v.validate(layout)
        if self.tickle is not None:
            layout.get(self.tickle.electrode)
        return self

    def at(self, t: float, dc_names: Sequence[str]):
        """Return ``(rf_amplitude, dc_vector)`` at time ``t``."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k < 0:
            v = self.voltages[0]
            return v.rf_amplitude, v.dc_vector(dc_names)
        if k >= len(self.times) - 1:
            v = self.voltages[-1]
            return v.rf_amplitude, v.dc_vector(dc_names)
        v0, v1 = self.voltages[k], self.voltages[k + 1]
        frac = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        rf = v0.rf_amplitude + (v1.rf_amplitude - v0.rf_amplitude) * frac
        d0, d1 = v0.dc_vector(dc_names), v1.dc_vector(dc_names)
        return rf, d0 + (d1 - d0) * frac


def load_schedule(path_or_name, layout: TrapLayout | None = None) -> Schedule:
    """Read a schedule file.

    Keys: ``times_ms`` (or ``times_s``), ``voltages`` (list of voltage-set
    objects as in voltage files) and optional ``tickle`` with ``electrode``,
    ``amplitude_V`` and ``frequency_Hz``.
    """
    data = json.loads(_resolve(path_or_name).read_text(encoding="utf-8"))
    if "times_ms" in data:
        times = np.asarray(data["times_ms"], dtype=float) * 1e-3
    elif "times_s" in data:
        times = np.asarray(data["times_s"], dtype=float)
    else:
        raise ValueError("schedule needs 'times_ms' or 'times_s'")
    sets = [voltages_from_config(v, layout) for v in data["voltages"]]
    tk = data.get("tickle")
    tickle = Tickle(tk["electrode"], float(tk["amplitude_V"]), float(tk["frequency_Hz"])) if tk else None
    sched = Schedule(times, sets, tickle)
    return sched.validate(layout) if layout is not None else sched


# -------------------------------------------------------------- trap models

class HarmonicTrap:
    """Harmonic confinement with frequencies (Hz) defined for ``reference``.

    Other species feel the same spring constants scaled by their charge ratio.
    """

    def __init__(self, frequencies, center=(0.0, DEFAULT_HEIGHT, 0.0), axes=None, reference=SR88):
        self.frequencies = np.asarray(frequencies, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.axes = np.eye(3) if axes is None else np.asarray(axes, dtype=float)
        k = reference.mass * (2 * np.pi * self.frequencies) ** 2
        self.stiffness = self.axes.T @ np.diag(k) @ self.axes
        self.reference = reference
        self.time_dependent = False

    @property
    def max_frequency(self) -> float:
        return float(self.frequencies.max())

    def forces(self, positions, charges, masses, t=0.0):
        d = positions - self.center
        return -(d @ self.stiffness) * (charges / self.reference.charge)[:, None]

    def energy(self, positions, charges, masses, t=0.0):
        d = positions - self.center
        e = 0.5 * np.einsum("pi,ij,pj->p", d, self.stiffness, d)
        return float(np.sum(e * charges / self.reference.charge))


class LayoutTrap:
    """Forces from a surface-electrode layout.

    ``mode="pseudo"`` uses the time-averaged pseudo-potential; ``mode="full-rf"``
    applies ``V_rf cos(W t)`` explicitly.  Voltages follow ``schedule`` when
    given, otherwise stay at ``voltages``.
    """

    def __init__(self, layout: TrapLayout, voltages: VoltageSet | None = None, mode: str = "pseudo",
                 schedule: Schedule | None = None):
        if mode not in ("pseudo", "full-rf"):
            raise ValueError(f"mode must be 'pseudo' or 'full-rf', not {mode!r}")
        if voltages is None and schedule is None:
            raise ValueError("need voltages or a schedule")
        self.layout = layout
        self.mode = mode
        self.schedule = schedule.validate(layout) if schedule is not None else Schedule.constant(voltages)
        self.fields = TrapFields(layout, self.schedule.voltages[0])
        self.omega = layout.rf_frequency
        self.time_dependent = mode == "full-rf" or schedule is not None
        tk = self.schedule.tickle
        self._tickle_rect = layout.rects([layout.get(tk.electrode)]) if tk else None
        self.max_frequency = None

    def _drive(self, t):
        return self.schedule.at(t, self.fields.dc_names)

    def forces(self, positions, charges, masses, t=0.0):
        rf_amp, dc = self._drive(t)
        q = charges[:, None]
        if self.mode == "pseudo":
            _, g, H = self.fields.rf_unit(positions, order=2)
            coef = charges**2 / (2 * masses * self.omega**2) * rf_amp**2
            f = -coef[:, None] * np.einsum("pij,pj->pi", H, g)
        else:
            _, g = self.fields.rf_unit(positions, order=1)
            f = -q * (rf_amp * math.cos(self.omega * t)) * g
        if len(self.fields.dc_rects):
            _, gdc = self.fields.dc_basis(positions, order=1)
            f = f - q * np.tensordot(dc, gdc, axes=(0, 0))
        tk = self.schedule.tickle
        if tk is not None:
            from .fields import basis_fields

            _, gt = basis_fields(self._tickle_rect, positions, order=1)
            f = f - q * (tk.amplitude * math.cos(2 * math.pi * tk.frequency * t)) * gt[0]
        return f

    def energy(self, positions, charges, masses, t=0.0):
        if self.mode != "pseudo":
            raise ValueError("static energy is only defined in pseudo-potential mode")
        rf_amp, dc = self._drive(t)
        _, g = self.fields.rf_unit(positions, order=1)
        e = charges**2 / (4 * masses * self.omega**2) * rf_amp**2 * np.einsum("pi,pi->p", g, g)
        if len(self.fields.dc_rects):
            e = e + charges * np.tensordot(dc, self.fields.dc_basis(positions, order=0), axes=(0, 0))
        return float(np.sum(e))


# ------------------------------------------------------------------ Coulomb

def _coulomb_rows(pos, charges, rows):
    d = pos[rows, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    r2[np.arange(len(rows)), rows] = np.inf
    w = charges[None, :] / (r2 * np.sqrt(r2))
    return (d * w[:, :, None]).sum(axis=1)


def coulomb_forces(positions, charges, threads: int = 1, block: int = 64) -> np.ndarray:
    """Pairwise Coulomb forces (N). Row blocks are independent, so any
    ``threads`` value yields bit-identical results."""
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    out = np.empty((n, 3))
    if n < 2:
        out[:] = 0.0
        return out
    blocks = [np.arange(s, min(s + block, n)) for s in range(0, n, block)]

    def work(rows):
        out[rows] = _coulomb_rows(pos, charges, rows)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, blocks))
    else:
        for rows in blocks:
            work(rows)
    return out * (COULOMB_K * charges)[:, None]


def coulomb_energy(positions, charges) -> float:
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    r = np.linalg.norm(pos[i] - pos[j], axis=1)
    return float(COULOMB_K * np.sum(charges[i] * charges[j] / r))


# --------------------------------------------------------------- integrator

class Integrator:
    """BAOAB Langevin integrator; reduces to velocity Verlet without friction."""

    def __init__(self, trap, dt: float, cooling: CoolingModel | None = None, seed: int = 0,
                 threads: int = 1, escape_radius: float = 5e-3):
        self.trap = trap
        self.dt = float(dt)
        self.cooling = cooling or CoolingModel()
        self.rng = np.random.Generator(np.random.Philox(seed))
        self.threads = threads
        self.escape_radius = escape_radius
        self.escapes: list[EscapeEvent] = []
        self._cache = None

    def total_forces(self, ens: IonEnsemble, positions=None, t=None) -> np.ndarray:
        pos = ens.positions if positions is None else positions
        t = ens.time if t is None else t
        act = ens.active
        f = np.zeros_like(pos)
        if act.any():
            p = pos[act]
            q = ens.charges[act]
            f[act] = self.trap.forces(p, q, ens.masses[act], t) + coulomb_forces(p, q, self.threads)
        return f

    def potential_energy(self, ens: IonEnsemble) -> float:
        act = ens.active
        p, q, m = ens.positions[act], ens.charges[act], ens.masses[act]
        return self.trap.energy(p, q, m, ens.time) + coulomb_energy(p, q)

    def step(self, ens: IonEnsemble) -> list[EscapeEvent]:
        dt = self.dt
        if self._cache is None or self._cache[0] is not ens or self._cache[1] != ens.time:
            forces = self.total_forces(ens)
        else:
            forces = self._cache[2]
        m = ens.masses[:, None]
        act = ens.active[:, None]
        v = ens.velocities + np.where(act, 0.5 * dt * forces / m, 0.0)
        x = ens.positions + np.where(act, 0.5 * dt * v, 0.0)
        cool = ens.laser_cooled & ens.active
        if self.cooling.friction > 0 and cool.any():
            mc = ens.masses[cool]
            c1 = np.exp(-self.cooling.friction * dt / mc)[:, None]
            c2 = np.sqrt((1 - c1**2) * constants.k * self.cooling.temperature / mc[:, None])
            noise = self.rng.standard_normal((int(cool.sum()), 3))
            v[cool] = c1 * v[cool] + c2 * noise
        x = x + np.where(act, 0.5 * dt * v, 0.0)
        t_new = ens.time + dt
        ens.positions = x
        ens.time = t_new
        events = self._check_escapes(ens)
        forces = self.total_forces(ens)
        ens.velocities = v + np.where(ens.active[:, None], 0.5 * dt * forces / m, 0.0)
        self._cache = (ens, t_new, forces)
        return events

    def _check_escapes(self, ens):
        events = []
        if self.escape_radius is None:
            centre = None
        else:
            centre = getattr(self.trap, "center", None)
        for i in np.where(ens.active)[0]:
            p = ens.positions[i]
            lost = p[1] <= 0 or not np.all(np.isfinite(p))
            if centre is not None and np.linalg.norm(p - centre) > self.escape_radius:
                lost = True
            if lost:
                ens.active[i] = False
                ens.velocities[i] = 0.0
                ev = EscapeEvent(int(i), ens.time, p.copy())
                events.append(ev)
                self.escapes.append(ev)
        return events

    def run(self, ens: IonEnsemble, n_steps: int, callback: Callable | None = None, stride: int = 1):
        for k in range(n_steps):
            self.step(ens)
            if callback is not None and (k + 1) % stride == 0:
                callback(k + 1, ens)
        return ens


def step(ensemble: IonEnsemble, trap, dt: float, cooling: CoolingModel | None = None, seed: int = 0):
    """Advance a copy of ``ensemble`` by one integrator step.

    Returns ``(new_ensemble, escape_events)``.
    """
    ens = ensemble.copy()
    events = Integrator(trap, dt, cooling, seed).step(ens)
    return ens, events


# -------------------------------------------------------------- relaxation

def _default_dt(trap, species) -> float:
    fmax = getattr(trap, "max_frequency", None)
    if not fmax:
        from .characterize import find_rf_null, secular_frequencies
        from .potentials import EffectivePotential

        fields = TrapFields(trap.layout, trap.schedule.voltages[-1])
        null = find_rf_null(fields)
        f, _, _ = secular_frequencies(EffectivePotential(fields, species), species.mass, null)
        fmax = float(f.max())
        trap.max_frequency = fmax
    if getattr(trap, "mode", "pseudo") == "full-rf":
        return min(1 / (60 * fmax), 2 * math.pi / (120 * trap.omega))
    return 1 / (60 * fmax)


def relax(ens: IonEnsemble, trap, force_tol: float = 1e-19, max_rounds: int = 20) -> IonEnsemble:
    """Quench to the nearest static equilibrium (L-BFGS on the total energy)."""
    act = ens.active
    q, m = ens.charges[act], ens.masses[act]
    x0 = ens.positions[act].copy()
    L = 1e-6
    escale = constants.k * 1e-3  # 1 mK

    def fun(u):
        p = x0 + L * u.reshape(-1, 3)
        e = trap.energy(p, q, m) + coulomb_energy(p, q)
        g = -(trap.forces(p, q, m) + coulomb_forces(p, q))
        return e / escale, (g * L / escale).ravel()

    u = np.zeros(x0.size)
    fmax = np.inf
    for _ in range(max_rounds):
        res = optimize.minimize(
            fun, u, jac=True, method="L-BFGS-B",
            options={"maxiter": 20000, "maxcor": 30, "ftol": 0.0, "gtol": force_tol * L / escale * 1e-4},
        )
        u = res.x
        p = x0 + L * u.reshape(-1, 3)
        fmax = np.abs(trap.forces(p, q, m) + coulomb_forces(p, q)).max()
        if fmax < force_tol:
            break
    out = ens.copy()
    out.positions[act] = x0 + L * u.reshape(-1, 3)
    out.velocities[:] = 0.0
    if fmax >= force_tol:
        raise ConvergenceError(f"quench stalled with max force {fmax:.3e} N")
    return out


def _initial_cloud(trap, n, species, rng):
    centre = getattr(trap, "center", None)
    if centre is None:
        from .characterize import find_rf_null

        centre = find_rf_null(TrapFields(trap.layout, trap.schedule.voltages[-1]))
        trap.center = centre
    # jittered cubic lattice at roughly the crystal spacing, filled outwards
    f = getattr(trap, "frequencies", None)
    f_ref = float(np.exp(np.mean(np.log(f)))) if f is not None else 200e3
    a = (species.charge**2 * COULOMB_K / (species.mass * (2 * np.pi * f_ref) ** 2)) ** (1 / 3)
    m = int(np.ceil(max(n, 2) ** (1 / 3))) + 2
    g = np.arange(-m, m + 1, dtype=float)
    cells = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    cells += rng.uniform(-0.15, 0.15, size=cells.shape)
    order = np.argsort(np.einsum("ij,ij->i", cells, cells), kind="stable")
    return centre + 1.5 * a * cells[order[:n]]


def minimize_crystal(
    trap,
    species=SR88,
    n: int = 2,
    seed: int = 0,
    temperatures=(10e-3, 0.5e-3, 0.0),
    steps_per_rung: int = 10_000,
    friction: float | None = None,
    dt: float | None = None,
    threads: int = 1,
    force_tol: float = 1e-19,
    initial: np.ndarray | None = None,
) -> IonEnsemble:
    """Anneal ``n`` ions down a temperature ladder, then quench.

    ``species`` is a single species or a per-ion list.  Returns the relaxed
    ensemble at rest; raises :class:`ConvergenceError` if the quench does not
    reach ``force_tol`` (N) on every ion.
    """
    sp_list = [species] * n if isinstance(species, IonSpecies) else list(species)
    if len(sp_list) != n:
        raise ValueError("species list length must equal n")
    ref = sp_list[0]
    rng = np.random.Generator(np.random.Philox(seed))
    pos = _initial_cloud(trap, n, ref, rng) if initial is None else np.asarray(initial, float)
    ens = IonEnsemble.at_rest(pos, sp_list, True)
    dt = dt or _default_dt(trap, ref)
    fmax = getattr(trap, "max_frequency", None) or 1 / (60 * dt)
    if friction is None:
        # damping rate of a tenth of the fastest secular angular frequency
        friction = 0.1 * 2 * np.pi * fmax * ref.mass
    for k, temp in enumerate(temperatures):
        if steps_per_rung <= 0:
            break
        integ = Integrator(trap, dt, CoolingModel(friction, temp), seed=seed * 7919 + k, threads=threads,
                           escape_radius=None)
        integ.run(ens, steps_per_rung)
        if integ.escapes:
            raise ConvergenceError(f"{len(integ.escapes)} ion(s) escaped during annealing")
    return relax(ens, trap, force_tol)


# ------------------------------------------------------------------- runs

@dataclass
class RunResult:
    frames: list  # (time, positions) tuples
    final: IonEnsemble
    escapes: list
    temperature_log: list  # (time, K)


def run_schedule(
    ensemble: IonEnsemble,
    layout: TrapLayout,
    schedule: Schedule,
    cooling: CoolingModel | None = None,
    mode: str = "pseudo",
    dt: float | None = None,
    duration: float | None = None,
    stride: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> RunResult:
    """Integrate while the voltages follow ``schedule``.

    Runs until the end of the schedule (or ``duration`` seconds) and records a
    snapshot every ``stride`` steps.  Escapes are logged and the remaining
    ions keep evolving.
    """
    trap = LayoutTrap(layout, mode=mode, schedule=schedule)
    ens = ensemble.copy()
    species = ens.species[0]
    if dt is None:
        dt = _default_dt(trap, species)
    total = schedule.duration if duration is None else duration
    n_steps = int(round(total / dt))
    integ = Integrator(trap, dt, cooling, seed=seed, threads=threads, escape_radius=None)
    frames = [(ens.time, ens.positions.copy())]
    temps = [(ens.time, ens.temperature())]

    def record(k, e):
        frames.append((e.time, e.positions.copy()))
        temps.append((e.time, e.temperature()))

    integ.run(ens, n_steps, record, stride)
    if n_steps % stride:
        record(n_steps, ens)
    return RunResult(frames, ens, integ.escapes, temps)


def tickle_response(
    ensemble: IonEnsemble,
    layout: TrapLayout,
    voltages: VoltageSet,
    electrode: str,
    amplitude: float,
    frequencies,
    cooling: CoolingModel,
    settle: float = 2e-3,
    measure: float = 1e-3,
    dt: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """RMS motional amplitude (m) of the cooled ions versus tickle frequency.

    Each frequency starts from ``ensemble``, is driven for ``settle`` seconds,
    then the RMS excursion about the mean position is accumulated over
    ``measure`` seconds.
    """
    out = []
    for f in frequencies:
        sched = Schedule.constant(voltages, Tickle(electrode, amplitude, float(f)))
        trap = LayoutTrap(layout, mode="pseudo", schedule=sched)
        if dt is None:
            dt = _default_dt(LayoutTrap(layout, voltages), ensemble.species[0])
        ens = ensemble.copy()
        integ = Integrator(trap, dt, cooling, seed=seed, escape_radius=None)
        integ.run(ens, int(round(settle / dt)))
        n_meas = int(round(measure / dt))
        sel = ens.laser_cooled & ens.active
        acc = np.zeros((int(sel.sum()), 3))
        acc2 = np.zeros_like(acc)
        for _ in range(n_meas):
            integ.step(ens)
            p = ens.positions[sel]
            acc += p
            acc2 += p * p
        var = acc2 / n_meas - (acc / n_meas) ** 2
        out.append(float(np.sqrt(np.mean(np.sum(np.maximum(var, 0), axis=1)))))
    return np.array(out)
