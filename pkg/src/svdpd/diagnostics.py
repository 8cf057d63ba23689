"""Observables of a DPD system and equilibration-aware averaging."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "StatSeries",
    "kinetic_temperature",
    "total_momentum",
    "potential_energy",
    "total_energy",
    "equilibrated_average",
    "DEFAULT_DISCARD",
]

DEFAULT_DISCARD = 0.84


@dataclass(frozen=True)
class StatSeries:
    """Scalar observable sampled at strictly increasing times."""

    times: np.ndarray
    values: np.ndarray
    discard_fraction: float = DEFAULT_DISCARD

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ParameterError("times and values must be 1-D arrays of equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ParameterError("times must be strictly increasing")
        if not 0 <= self.discard_fraction < 1:
            raise ParameterError(f"discard_fraction must lie in [0, 1), got {self.discard_fraction}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def tail(self):
        """Samples kept after discarding the leading ``discard_fraction``."""
        start = int(np.floor(self.discard_fraction * len(self.values) + 1e-9))
        return self.values[start:]


def kinetic_temperature(system):
    """``<|v|^2> / 3`` averaged over all particles of one snapshot.

    The sum is correctly rounded, so relabelling particles cannot change it.
    """
    p = system.state.p
    v = p / system.masses[:, None]
    return math.fsum((v * v).ravel()) / (3.0 * p.shape[0])


def total_momentum(system):
    return np.sum(system.state.p, axis=0)


def potential_energy(system):
    """Soft repulsive potential summed once per interacting pair.

    Each unordered pair contributes ``(a/2) q_c (1 - r/q_c)^2``, the
    double-counted form with prefactor ``a/4``; its negative gradient is
    the conservative force ``a (1 - r/q_c) e_ij``.
    """
    from .dpd import pair_geometry

    par = system.params
    geo = pair_geometry(system.state.q, par.box, par.q_c)
    return float(np.sum(0.5 * par.a * par.q_c * geo.w_r**2))


def total_energy(system):
    p = system.state.p
    kinetic = 0.5 * np.sum(p * p / system.masses[:, None])
    return float(kinetic + potential_energy(system))


def equilibrated_average(series):
    """Mean and naive standard error of the retained tail of ``series``."""
    tail = series.tail()
    if tail.size == 0:
        raise ParameterError("no samples left after discarding the equilibration period")
    mean = float(np.mean(tail))
    if tail.size < 2:
        return mean, 0.0
    return mean, float(np.std(tail, ddof=1) / np.sqrt(tail.size))
