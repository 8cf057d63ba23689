"""Phase-space state and the separable stochastic Hamiltonian model contract.

A model describes

    dq = grad_T(p) dt + sum_c grad_S_c(p) o dW_c
    dp = (-grad_V(q) + F_D(q, p)) dt + sum_c (-grad_U_c(q) + F_SD_c(q, p)) o dW_c

with ``H = T(p) + V(q)`` and channel Hamiltonians ``h_c = S_c(p) + U_c(q)``.
Integrators never need mixed derivatives, which keeps the Euler-A/B
half-maps explicit.

Integrators talk to a model through :class:`Configuration` objects: everything
that depends on positions only (pair geometry, active channels) is evaluated
once per position and then reused for several momenta and noise increments.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = ["PhasePoint", "SeparableModel", "Configuration", "ChannelConfiguration"]


@dataclass(frozen=True)
class PhasePoint:
    """Generalised positions ``q`` and momenta ``p`` of identical shape."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if q.shape != p.shape:
            raise ValueError(f"q and p shapes differ: {q.shape} vs {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))


class Configuration(ABC):
    """Position-dependent part of a model, frozen at one ``q``.

    Increment arrays passed to the ``*_impulse``/``drift_noise`` methods are
    aligned with :meth:`channels`.
    """

    q: np.ndarray

    @abstractmethod
    def channels(self):
        """Return ``(i, j, stream)`` arrays identifying the active channels."""

    @abstractmethod
    def conservative_force(self):
        """``-grad_V(q)``."""

    @abstractmethod
    def dissipative_force(self, p):
        """``F_D(q, p)``."""

    @abstractmethod
    def noise_impulse(self, dw):
        """``sum_c -grad_U_c(q) * dW_c``."""

    def drift_noise(self, p, dw):
        """``sum_c grad_S_c(p) * dW_c``; zero when no ``S_c`` exists."""
        return np.zeros_like(p)

    def sd_impulse(self, p, dw):
        """``sum_c F_SD_c(q, p) * dW_c``; zero when no such forces exist."""
        return np.zeros_like(p)


class SeparableModel(ABC):
    """Separable stochastic Hamiltonian model with external forces.

    Subclasses implement the per-channel operations below. The default
    :meth:`configuration` assembles them channel by channel, which is correct
    for any model but slow; models with many channels override it.
    """

    #: F_D is linear in p; required by implicit dissipative discretisations.
    dissipation_linear_in_p = False

    @abstractmethod
    def grad_T(self, p):
        ...

    @abstractmethod
    def grad_V(self, q):
        ...

    @abstractmethod
    def noise_channels(self, q):
        """List of active ``(i, j)`` channels at ``q``."""

    @abstractmethod
    def grad_U_channel(self, q, channel):
        ...

    def grad_S_channel(self, p, channel):
        return np.zeros_like(p)

    @abstractmethod
    def dissipative_force(self, q, p):
        ...

    def stochastic_dissipative_force(self, q, p, channel):
        return np.zeros_like(p)

    def wrap(self, q):
        """Map positions back into the model's domain (identity by default)."""
        return q

    def configuration(self, q):
        return ChannelConfiguration(self, q)


class ChannelConfiguration(Configuration):
    """Generic configuration built from the per-channel model methods."""

    def __init__(self, model, q):
        self.model = model
        self.q = np.asarray(q, dtype=np.float64)
        chans = list(model.noise_channels(self.q))
        self._chans = chans
        self._grad_u = [model.grad_U_channel(self.q, c) for c in chans]

    def channels(self):
        i = np.array([c[0] for c in self._chans], dtype=np.int64)
        j = np.array([c[1] for c in self._chans], dtype=np.int64)
        return i, j, 0

    def conservative_force(self):
        return -self.model.grad_V(self.q)

    def dissipative_force(self, p):
        return self.model.dissipative_force(self.q, p)

    def noise_impulse(self, dw):
        out = np.zeros_like(self.q)
        for g, w in zip(self._grad_u, dw):
            out = out - g * w
        return out

    def drift_noise(self, p, dw):
        out = np.zeros_like(p)
        for c, w in zip(self._chans, dw):
            out = out + self.model.grad_S_channel(p, c) * w
        return out

    def sd_impulse(self, p, dw):
        out = np.zeros_like(p)
        for c, w in zip(self._chans, dw):
            out = out + self.model.stochastic_dissipative_force(self.q, p, c) * w
        return out
