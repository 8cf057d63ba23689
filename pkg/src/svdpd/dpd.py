"""Dissipative particle dynamics: pair forces, cell lists and the stepping loop.

Particles interact within the cutoff ``q_c`` through

    F_C  =  a w(r) e_ij
    F_D  = -gamma w(r)^2 (e_ij . v_ij) e_ij
    R    =  sigma w(r) e_ij dW_ij              (an impulse, not a force)

with ``w(r) = 1 - r/q_c`` and ``e_ij`` the unit vector from ``j`` to ``i``.
Each unordered pair is visited once and applied as an exact +/- pair, so the
total momentum is conserved to rounding for every scheme, noise included.
The pair noise ``dW_ij`` comes from the counter generator keyed on the
unordered pair, which realises the symmetric Wiener matrix without storing it.
"""

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Configuration, PhasePoint, SeparableModel
from .diagnostics import StatSeries, kinetic_temperature
from .errors import ParameterError, SingularConfigurationError
from .integrators import StepperState, step
from .noise import NoiseSource

__all__ = [
    "DpdParams",
    "DpdSystem",
    "DpdModel",
    "CellGrid",
    "PairGeometry",
    "weight_r",
    "weight_d",
    "minimum_image",
    "wrap_positions",
    "build_cell_grid",
    "neighbor_pairs",
    "brute_force_pairs",
    "pair_geometry",
    "pair_forces",
    "accumulate_forces",
    "init_system",
    "dpd_step",
    "DpdRun",
    "run_dpd",
    "write_xyz_frame",
]


@dataclass(frozen=True)
class DpdParams:
    """Interaction and box parameters in reduced units (``q_c = m = kT = 1``)."""

    n_particles: int = 375
    mass: float = 1.0
    a: float = 25.0
    gamma: float = 4.5
    sigma: float = 3.0
    q_c: float = 1.0
    box: tuple = (5.0, 5.0, 5.0)
    kT_target: float = 1.0

    def __post_init__(self):
        box = tuple(float(b) for b in np.broadcast_to(np.asarray(self.box, dtype=float), (3,)))
        object.__setattr__(self, "box", box)
        if int(self.n_particles) < 1:
            raise ParameterError(f"n_particles must be >= 1, got {self.n_particles}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        for name in ("mass", "q_c", "kT_target"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("a", "gamma", "sigma"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")
        if min(box) < 2 * self.q_c:
            raise ParameterError(f"box edges {box} must be at least 2 q_c = {2 * self.q_c}")
        if abs(self.sigma**2 - 2 * self.gamma * self.kT_target) > 1e-9:
            warnings.warn(
                f"sigma^2 = {self.sigma**2:g} differs from 2 gamma kT = {2 * self.gamma * self.kT_target:g};"
                " the thermostat will not sample kT_target", stacklevel=3)

    @classmethod
    def at_density(cls, n_particles, density=3.0, **kw):
        """Cubic box holding ``n_particles`` at number density ``density / q_c^3``."""
        q_c = kw.get("q_c", 1.0)
        edge = round((n_particles / density) ** (1.0 / 3.0), 12) * q_c
        return cls(n_particles=n_particles, box=(edge, edge, edge), **kw)

    @property
    def box_array(self):
        return np.asarray(self.box)


def weight_r(r, q_c=1.0):
    """Random-force weight ``1 - r/q_c`` inside the cutoff, 0 outside."""
    r = np.asarray(r, dtype=float)
    return np.where(r < q_c, 1.0 - r / q_c, 0.0)


def weight_d(r, q_c=1.0):
    return weight_r(r, q_c) ** 2


def minimum_image(delta, box):
    """Map displacement components into ``[-box/2, box/2)``."""
    delta = np.asarray(delta, dtype=float)
    box = np.asarray(box, dtype=float)
    return delta - box * np.floor(delta / box + 0.5)


def wrap_positions(q, box):
    box = np.asarray(box, dtype=float)
    q = q - box * np.floor(q / box)
    # rounding can land exactly on the upper edge
    return np.where(q >= box, q - box, q)


@dataclass(frozen=True)
class CellGrid:
    """Particles binned into cells of edge ``>= q_c``.

    ``order`` lists particle indices sorted by cell; cell ``c`` owns
    ``order[start[c]:start[c] + count[c]]``.
    """

    cell_size: np.ndarray
    dims: tuple
    cell_of: np.ndarray
    order: np.ndarray
    start: np.ndarray
    count: np.ndarray

    @property
    def n_cells(self):
        return int(np.prod(self.dims))

    @property
    def occupancy(self):
        return {c: self.order[s:s + n].tolist() for c, (s, n) in enumerate(zip(self.start, self.count))}


def build_cell_grid(q, box, q_c):
    box = np.asarray(box, dtype=float)
    dims = np.maximum(np.floor(box / q_c).astype(np.int64), 1)
    cell_size = box / dims
    coords = np.clip(np.floor(q / cell_size).astype(np.int64), 0, dims - 1)
    cell_of = np.ravel_multi_index(coords.T, dims) if len(q) else np.zeros(0, dtype=np.int64)
    n_cells = int(np.prod(dims))
    count = np.bincount(cell_of, minlength=n_cells)
    order = np.argsort(cell_of, kind="stable")
    start = np.cumsum(count) - count
    return CellGrid(cell_size=cell_size, dims=tuple(int(d) for d in dims), cell_of=cell_of,
                    order=order, start=start, count=count)


# self cell plus the 13 neighbours with a lexicographically positive offset
_HALF_STENCIL = np.array([(0, 0, 0)] + [o for o in itertools.product((-1, 0, 1), repeat=3) if o > (0, 0, 0)])


def _finish_pairs(q, box, q_c, i, j, dedupe=True):
    if dedupe:
        keep = i != j
        i, j = i[keep], j[keep]
    delta = minimum_image(q[i] - q[j], box)
    close = np.einsum("ij,ij->i", delta, delta) < q_c * q_c
    lo = np.minimum(i[close], j[close])
    hi = np.maximum(i[close], j[close])
    key = lo * len(q) + hi
    key = np.unique(key) if dedupe else np.sort(key)
    return key // len(q), key % len(q)


def neighbor_pairs(grid, q, box, q_c):
    """Unordered pairs closer than ``q_c``, sorted by ``(i, j)`` with ``i < j``."""
    dims = np.asarray(grid.dims)
    n = len(q)
    coords = np.stack(np.unravel_index(np.arange(grid.n_cells), grid.dims), axis=1)
    # neighbour cell of every cell for every stencil offset: (n_offsets, n_cells)
    nbr = np.ravel_multi_index(((coords[None, :, :] + _HALF_STENCIL[:, None, :]) % dims).transpose(2, 0, 1),
                               grid.dims)
    sorted_cell = grid.cell_of[grid.order]
    target = nbr[:, sorted_cell].ravel()  # cell to scan, per (offset, sorted particle)
    first = np.tile(np.arange(n), len(_HALF_STENCIL))
    reps = grid.count[target]
    a = np.repeat(first, reps)
    within = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
    b = np.repeat(grid.start[target], reps) + within
    # inside the own cell keep each pair once
    own = np.repeat(np.arange(len(target)) < n, reps)
    keep = ~own | (a < b)
    # with fewer than 3 cells along an axis two stencil offsets reach the same cell
    dedupe = bool(np.any(dims < 3))
    return _finish_pairs(q, box, q_c, grid.order[a[keep]], grid.order[b[keep]], dedupe)


def brute_force_pairs(q, box, q_c):
    i, j = np.triu_indices(len(q), k=1)
    return _finish_pairs(q, box, q_c, i, j)


@dataclass(frozen=True)
class PairGeometry:
    """Interacting pairs at one configuration: distances, unit vectors, weights."""

    i: np.ndarray
    j: np.ndarray
    r: np.ndarray
    e: np.ndarray
    w_r: np.ndarray


def pair_geometry(q, box, q_c, method="cells", step=None):
    if method == "cells":
        i, j = neighbor_pairs(build_cell_grid(q, box, q_c), q, box, q_c)
    elif method == "brute":
        i, j = brute_force_pairs(q, box, q_c)
    else:
        raise ParameterError(f"unknown neighbour method {method!r}")
    delta = minimum_image(q[i] - q[j], box)
    r = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    if np.any(r == 0.0):
        bad = int(np.flatnonzero(r == 0.0)[0])
        raise SingularConfigurationError(int(i[bad]), int(j[bad]), step)
    return PairGeometry(i=i, j=j, r=r, e=delta / r[:, None], w_r=1.0 - r / q_c)


def _scatter(i, j, f, n):
    out = np.empty((n, 3))
    for c in range(3):
        out[:, c] = np.bincount(i, weights=f[:, c], minlength=n) - np.bincount(j, weights=f[:, c], minlength=n)
    return out


class DpdConfiguration(Configuration):
    def __init__(self, model, q):
        self.model = model
        self.q = q
        par = model.params
        self.geometry = pair_geometry(q, par.box_array, par.q_c, model.neighbor_method)

    def channels(self):
        return self.geometry.i, self.geometry.j, 0

    def _apply(self, magnitude):
        g = self.geometry
        return _scatter(g.i, g.j, magnitude[:, None] * g.e, len(self.q))

    def conservative_force(self):
        return self._apply(self.model.params.a * self.geometry.w_r)

    def dissipative_force(self, p):
        g = self.geometry
        v = p / self.model.masses[:, None]
        closing = np.einsum("ij,ij->i", g.e, v[g.i] - v[g.j])
        return self._apply(-self.model.params.gamma * g.w_r**2 * closing)

    def noise_impulse(self, dw):
        return self._apply(self.model.params.sigma * self.geometry.w_r * dw)


class DpdModel(SeparableModel):
    """DPD as a separable model: ``T = sum |p|^2/2m``, one noise channel per pair.

    Channel ``(i, j)`` with ``i < j`` stands for both ``h_ij`` and ``h_ji``;
    its position part is ``U = (sigma/2) q_c (1 - r/q_c)^2``.
    """

    dissipation_linear_in_p = True

    def __init__(self, params, masses=None, neighbor_method="cells"):
        self.params = params
        if masses is None:
            masses = np.full(params.n_particles, params.mass)
        self.masses = np.asarray(masses, dtype=float)
        self.neighbor_method = neighbor_method

    def grad_T(self, p):
        return p / self.masses[:, None]

    def grad_V(self, q):
        return -DpdConfiguration(self, q).conservative_force()

    def noise_channels(self, q):
        g = pair_geometry(q, self.params.box_array, self.params.q_c, self.neighbor_method)
        return list(zip(g.i.tolist(), g.j.tolist()))

    def grad_U_channel(self, q, channel):
        i, j = channel
        par = self.params
        delta = minimum_image(q[i] - q[j], par.box_array)
        r = np.sqrt(delta @ delta)
        out = np.zeros_like(q)
        if r < par.q_c:
            g = -par.sigma * (1.0 - r / par.q_c) * delta / r
            out[i] = g
            out[j] = -g
        return out

    def dissipative_force(self, q, p):
        return DpdConfiguration(self, q).dissipative_force(p)

    def wrap(self, q):
        return wrap_positions(q, self.params.box_array)

    def configuration(self, q):
        return DpdConfiguration(self, q)


@dataclass
class DpdSystem:
    params: DpdParams
    state: PhasePoint
    masses: np.ndarray = None
    step_index: int = 0

    def __post_init__(self):
        if self.masses is None:
            self.masses = np.full(self.params.n_particles, self.params.mass)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.state.q.shape != (self.params.n_particles, 3):
            raise ParameterError(f"state shape {self.state.q.shape} does not match "
                                 f"{self.params.n_particles} particles in 3-D")

    @property
    def n(self):
        return self.params.n_particles

    def model(self, neighbor_method="cells"):
        return DpdModel(self.params, self.masses, neighbor_method)


def pair_forces(system, i, j, dw=0.0, p=None):
    """Conservative force, dissipative force and random impulse on ``i`` from ``j``.

    The forces on ``j`` are the exact negatives. ``p`` overrides the system
    momenta used for the relative velocity.
    """
    if i == j:
        raise ParameterError("a particle does not interact with itself")
    par = system.params
    q = system.state.q
    p = system.state.p if p is None else p
    delta = minimum_image(q[i] - q[j], par.box_array)
    r = float(np.sqrt(delta @ delta))
    if r == 0.0:
        raise SingularConfigurationError(i, j, system.step_index)
    zero = np.zeros(3)
    if r >= par.q_c:
        return zero, zero.copy(), zero.copy()
    e = delta / r
    w = 1.0 - r / par.q_c
    v_ij = p[i] / system.masses[i] - p[j] / system.masses[j]
    f_c = par.a * w * e
    f_d = -par.gamma * w * w * (e @ v_ij) * e
    kick = par.sigma * w * dw * e
    return f_c, f_d, kick


def accumulate_forces(system, dw=None, p=None, method="cells"):
    """Per-particle conservative force, dissipative force and random impulse.

    ``dw`` maps the pairs of the configuration (sorted ``i < j``) to their
    increments; ``None`` means no random impulse.
    """
    cfg = DpdConfiguration(system.model(method), system.state.q)
    p = system.state.p if p is None else p
    f_c = cfg.conservative_force()
    f_d = cfg.dissipative_force(p)
    kick = cfg.noise_impulse(dw) if dw is not None else np.zeros_like(f_c)
    return f_c, f_d, kick


def init_system(params, seed):
    """Uniform random positions and Maxwell-Boltzmann momenta.

    Momenta are shifted to zero total momentum and rescaled so the
    instantaneous kinetic temperature equals ``kT_target`` exactly.
    """
    rng = np.random.default_rng([int(seed), 0x0D9D])
    n = params.n_particles
    box = params.box_array
    masses = np.full(n, params.mass)
    q = wrap_positions(rng.uniform(0.0, 1.0, size=(n, 3)) * box, box)
    p = rng.normal(size=(n, 3)) * np.sqrt(masses * params.kT_target)[:, None]
    if n > 1:
        p -= masses[:, None] * (p.sum(axis=0) / masses.sum())
    system = DpdSystem(params, PhasePoint(q, p), masses)
    kT = kinetic_temperature(system)
    if kT > 0:
        p = p * np.sqrt(params.kT_target / kT)
    return DpdSystem(params, PhasePoint(q, p), masses)


def dpd_step(system, spec, dt, stepper=None, noise=None, seed=0):
    """Advance ``system`` by one step of ``spec``.

    ``noise`` is a :class:`NoiseSource`; by default one is made from ``seed``
    and the scheme's noise mode. The step's increments are keyed on
    ``system.step_index``.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if stepper is None:
        stepper = StepperState(step_index=system.step_index)
    if noise is None:
        noise = NoiseSource(seed, spec.noise_mode)
    model = getattr(stepper.configuration, "model", None) or system.model()
    state, stepper = step(model, system.state, stepper, dt, noise.at(system.step_index, dt), spec)
    return replace(system, state=state, step_index=system.step_index + 1), stepper


def write_xyz_frame(fh, system, time, symbol="A"):
    """Append one plain-text XYZ frame: count, comment, one row per particle."""
    q = system.state.q
    fh.write(f"{len(q)}\n")
    fh.write(f"step={system.step_index} time={time:.10g}\n")
    for x, y, z in q:
        fh.write(f"{symbol} {x:.10f} {y:.10f} {z:.10f}\n")


@dataclass
class DpdRun:
    """Outcome of one DPD trajectory."""

    system: DpdSystem
    temperature: StatSeries
    dt: float
    n_steps: int
    extras: dict = field(default_factory=dict)


def run_dpd(params, spec, dt, t_end, seed, discard_fraction=0.84, snapshot_interval=0,
            xyz=None, system=None, observe=None):
    """Integrate a freshly initialised system and record the kinetic temperature.

    The temperature is sampled after every step. ``xyz`` is an open text file
    receiving a frame every ``snapshot_interval`` steps (0 disables).
    ``observe(system)`` is called after every step when given.
    """
    if not dt > 0 or not t_end > 0:
        raise ParameterError(f"dt and t_end must be positive, got dt={dt}, t_end={t_end}")
    n_steps = max(1, int(round(t_end / dt)))
    if system is None:
        system = init_system(params, seed)
    noise = NoiseSource(seed, spec.noise_mode)
    stepper = StepperState(step_index=system.step_index)
    temps = np.empty(n_steps)
    if xyz is not None and snapshot_interval:
        write_xyz_frame(xyz, system, 0.0)
    for n in range(n_steps):
        system, stepper = dpd_step(system, spec, dt, stepper, noise)
        temps[n] = kinetic_temperature(system)
        if observe is not None:
            observe(system)
        if xyz is not None and snapshot_interval and (n + 1) % snapshot_interval == 0:
            write_xyz_frame(xyz, system, (n + 1) * dt)
    times = dt * np.arange(1, n_steps + 1)
    return DpdRun(system, StatSeries(times, temps, discard_fraction), dt, n_steps)
