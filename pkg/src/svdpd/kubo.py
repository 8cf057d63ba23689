"""Damped Kubo oscillator: model, closed-form solution and ensemble study.

    H = (p^2 + q^2) / 2,   h = sigma (p^2 + q^2) / 2,
    F_D = -eps p,          F_SD = -eps sigma p.

The system is a damped harmonic oscillator run in the random clock
``s = t + sigma W(t)``, which gives the closed form used as the oracle.
A batch of independent sample paths is integrated as one vector of length
``n_paths``; path ``m`` draws its noise from counter stream ``m``, so a
path's trajectory does not depend on how paths are batched.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Configuration, PhasePoint, SeparableModel
from .diagnostics import StatSeries
from .errors import IntegrationError, ParameterError
from .integrators import StepperState, step
from .noise import FixedNoise, NoiseDraw, draw_noise

__all__ = [
    "KuboParams",
    "KuboModel",
    "kubo_model",
    "kubo_exact",
    "kubo_expected_hamiltonian",
    "KuboEnsembleResult",
    "kubo_ensemble",
    "PAPER_SCHEMES",
]

PATH_CHUNK = 1000  # fixed so the mean is reduced in the same order for any thread count
_NOISE_BLOCK = 512


@dataclass(frozen=True)
class KuboParams:
    sigma: float = 0.2
    eps: float = 0.001
    q0: float = 0.0
    p0: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not 0 <= self.eps < 2:
            raise ParameterError(f"eps must lie in [0, 2), got {self.eps}")

    @property
    def omega(self):
        return np.sqrt(4.0 - self.eps**2) / 2.0


class KuboConfiguration(Configuration):
    def __init__(self, model, q):
        self.model = model
        self.q = q

    def channels(self):
        return self.model.zeros_i, self.model.ones_j, self.model.paths

    def conservative_force(self):
        return -self.q

    def dissipative_force(self, p):
        return -self.model.params.eps * p

    def noise_impulse(self, dw):
        return -self.model.params.sigma * self.q * dw

    def drift_noise(self, p, dw):
        return self.model.params.sigma * p * dw

    def sd_impulse(self, p, dw):
        par = self.model.params
        return -par.eps * par.sigma * p * dw


class KuboModel(SeparableModel):
    """One Kubo oscillator per entry of ``paths``; ``q`` and ``p`` are vectors."""

    dissipation_linear_in_p = True

    def __init__(self, params, paths=(0,)):
        self.params = params
        self.paths = np.asarray(paths, dtype=np.int64)
        self.zeros_i = np.zeros_like(self.paths)
        self.ones_j = np.ones_like(self.paths)

    def grad_T(self, p):
        return p

    def grad_V(self, q):
        return q

    def noise_channels(self, q):
        return [(0, 1)]

    def grad_U_channel(self, q, channel):
        return self.params.sigma * q

    def grad_S_channel(self, p, channel):
        return self.params.sigma * p

    def dissipative_force(self, q, p):
        return -self.params.eps * p

    def stochastic_dissipative_force(self, q, p, channel):
        return -self.params.eps * self.params.sigma * p

    def hamiltonian(self, q, p):
        return 0.5 * (p * p + q * q)

    def configuration(self, q):
        return KuboConfiguration(self, q)


def kubo_model(params):
    return KuboModel(params)


def kubo_exact(t, w, params):
    """Exact state at time ``t`` on a path whose Wiener value is ``W(t) = w``."""
    q0, p0, eps = params.q0, params.p0, params.eps
    omega = params.omega
    s = np.asarray(t, dtype=float) + params.sigma * np.asarray(w, dtype=float)
    envelope = np.exp(-0.5 * eps * s)
    c, sn = np.cos(omega * s), np.sin(omega * s)
    q = envelope * (q0 * c + (p0 + 0.5 * eps * q0) / omega * sn)
    p = envelope * (p0 * c - (q0 + 0.5 * eps * p0) / omega * sn)
    return PhasePoint(q, p)


def kubo_expected_hamiltonian(t, params):
    """Expectation of ``H(q(t), p(t))`` over the Wiener process."""
    q0, p0, eps, sig = params.q0, params.p0, params.eps, params.sigma
    t = np.asarray(t, dtype=float)
    d = 4.0 - eps**2
    a = 2.0 * (q0**2 + p0**2 + eps * q0 * p0) / d
    b = -(eps**2 * (q0**2 + p0**2) + 4.0 * eps * q0 * p0) / (2.0 * d)
    c = eps * (q0**2 - p0**2) / (2.0 * np.sqrt(d))
    freq = 2.0 * (1.0 - eps * sig**2) * params.omega
    slow = a * np.exp(-eps * (2.0 - eps * sig**2) * t / 2.0)
    fast = np.exp(-((2.0 - eps**2) * sig**2 + eps) * t) * (b * np.cos(freq * t) + c * np.sin(freq * t))
    return slow + fast


# Parameter choices of the published Kubo experiment, one per SV-AB variant.
def _paper_schemes():
    from .integrators import SchemeSpec

    return (
        SchemeSpec.sv_ab1(),
        SchemeSpec.gcc(0.7),
        SchemeSpec.gw(0.3),
        SchemeSpec.sv_ab4(alpha=0.5, beta=1.0, lam=0.6),
        SchemeSpec.sv_ab5(lambda1=0.3, lambda2=0.5),
        SchemeSpec.sv_ab6(alpha=0.4, beta=1.0, lambda1=0.3, lambda2=0.4),
    )


PAPER_SCHEMES = _paper_schemes()


@dataclass(frozen=True)
class KuboEnsembleResult:
    times: np.ndarray
    mean_H: np.ndarray
    exact_EH: np.ndarray
    n_paths: int

    @property
    def error(self):
        return self.mean_H - self.exact_EH

    @property
    def series(self):
        return StatSeries(self.times, self.mean_H)

    def max_abs_error(self, t_min=None, t_max=None):
        mask = np.ones_like(self.times, dtype=bool)
        if t_min is not None:
            mask &= self.times >= t_min
        if t_max is not None:
            mask &= self.times <= t_max
        return float(np.max(np.abs(self.error[mask])))


def _n_steps(dt, t_end):
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if not t_end > 0:
        raise ParameterError(f"t_end must be positive, got {t_end}")
    n = int(round(t_end / dt))
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ParameterError(f"t_end={t_end} is not a whole number of steps of dt={dt}")
    return n


def _chunk_hamiltonian_sum(job):
    spec, params, dt, n_steps, seed, first, count = job
    paths = np.arange(first, first + count, dtype=np.int64)
    model = KuboModel(params, paths)
    state = PhasePoint(np.full(count, params.q0), np.full(count, params.p0))
    stepper = StepperState()
    sums = np.empty(n_steps + 1)
    sums[0] = np.sum(model.hamiltonian(state.q, state.p))
    zeros = np.zeros((1, 1), dtype=np.int64)
    ones = np.ones((1, 1), dtype=np.int64)
    for start in range(0, n_steps, _NOISE_BLOCK):
        steps = np.arange(start, min(start + _NOISE_BLOCK, n_steps), dtype=np.int64)
        block = draw_noise(seed, steps[:, None], (zeros, ones), dt, spec.noise_mode,
                           stream=paths[None, :])
        for row, k in enumerate(steps):
            noise = FixedNoise(NoiseDraw(block.full[row], block.half_first[row],
                                         block.half_second[row]), step=int(k))
            try:
                state, stepper = step(model, state, stepper, dt, noise, spec)
            except IntegrationError as exc:
                raise IntegrationError(f"{spec.label}, paths {first}..{first + count - 1}: {exc}") from exc
            sums[k + 1] = np.sum(model.hamiltonian(state.q, state.p))
    return sums


def kubo_ensemble(spec, params, dt, t_end, n_paths, seed, threads=1):
    """Ensemble-mean Hamiltonian of ``n_paths`` trajectories on ``[0, t_end]``.

    The mean is recorded every step and compared with the exact expectation
    on the same time grid. The run fails if any path blows up.
    """
    if int(n_paths) < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")
    n_paths = int(n_paths)
    n_steps = _n_steps(dt, t_end)
    jobs = [(spec, params, dt, n_steps, seed, first, min(PATH_CHUNK, n_paths - first))
            for first in range(0, n_paths, PATH_CHUNK)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            partial = list(pool.map(_chunk_hamiltonian_sum, jobs))
    else:
        partial = [_chunk_hamiltonian_sum(job) for job in jobs]
    total = partial[0]
    for part in partial[1:]:
        total = total + part
    times = np.arange(n_steps + 1) * dt
    return KuboEnsembleResult(times, total / n_paths, kubo_expected_hamiltonian(times, params), n_paths)
