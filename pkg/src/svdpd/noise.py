"""Counter-based Gaussian noise and per-step Wiener increments.

Every random number is a pure function of ``(seed, counter)``: the generator is
Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3",
SC'11), vectorised over numpy arrays. Uniforms are built with 53 bits of
mantissa from pairs of 32-bit words and mapped to normals with Box-Muller, so
one Philox block yields two standard normal variates.

A pair channel ``(i, j)`` is keyed as ``(min(i, j), max(i, j), step, stream)``,
which makes ``dW_ij`` and ``dW_ji`` bitwise identical and independent of the
order or thread in which pairs are visited.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError

__all__ = [
    "NoiseMode",
    "NoiseDraw",
    "NoiseSource",
    "StepNoise",
    "philox4x32",
    "counter_normals",
    "gaussian_from_counter",
    "draw_noise",
    "FixedNoise",
]

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


class NoiseMode(str, Enum):
    """How the two half-step increments of a step relate to each other."""

    INDEPENDENT_HALVES = "independent_halves"
    APPROXIMATE_HALF = "approximate_half"


def _words(x):
    return np.asarray(x, dtype=np.uint64) & _MASK32


def philox4x32(key, counter):
    """Philox4x32-10 block function.

    Parameters
    ----------
    key : tuple of two ints or uint64 arrays
        The two 32-bit key words.
    counter : tuple of four ints or uint64 arrays
        The four 32-bit counter words. Arrays broadcast against each other.

    Returns
    -------
    tuple of four numpy.uint64 arrays, each holding a 32-bit output word.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*(_words(c) for c in counter))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def _key(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed must be in [0, 2**64), got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def counter_normals(seed, c0, c1, c2, c3):
    """Two independent standard normals per counter ``(c0, c1, c2, c3)``."""
    x0, x1, x2, x3 = philox4x32(_key(seed), (c0, c1, c2, c3))
    # 53-bit uniforms strictly inside (0, 1)
    u1 = ((x0 >> np.uint64(5)) * np.uint64(1 << 26) + (x1 >> np.uint64(6))).astype(np.float64)
    u2 = ((x2 >> np.uint64(5)) * np.uint64(1 << 26) + (x3 >> np.uint64(6))).astype(np.float64)
    u1 = (u1 + 0.5) * 2.0**-53
    u2 = (u2 + 0.5) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def gaussian_from_counter(seed, counter):
    """Standard normal variate that depends only on ``seed`` and ``counter``.

    ``counter`` is a non-negative integer below 2**128; it is split into the
    four 32-bit Philox counter words, least significant first.
    """
    counter = int(counter)
    if not 0 <= counter < 2**128:
        raise ParameterError(f"counter must be in [0, 2**128), got {counter}")
    words = [(counter >> (32 * w)) & 0xFFFFFFFF for w in range(4)]
    z0, _ = counter_normals(seed, *words)
    return float(z0)


@dataclass(frozen=True)
class NoiseDraw:
    """Wiener increments of one step, aligned with a list of channels.

    ``full`` is dW over the step, ``half_first`` and ``half_second`` the
    increments over its first and second halves.
    """

    full: np.ndarray
    half_first: np.ndarray
    half_second: np.ndarray

    def increment(self, which):
        return getattr(self, which)


def _channel_counters(i, j, step, stream):
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    step = np.asarray(step, dtype=np.int64)
    stream = np.asarray(stream, dtype=np.int64)
    for name, arr in (("channel index", i), ("channel index", j), ("step", step), ("stream", stream)):
        if arr.size and (arr.min() < 0 or arr.max() >= 2**32):
            raise ParameterError(f"{name} out of the 32-bit counter range")
    if i.size and np.any(i == j):
        raise ParameterError("diagonal channels (i, i) carry no noise and are never drawn")
    return np.minimum(i, j), np.maximum(i, j), step, stream


def draw_noise(seed, step_index, channels, dt, mode=NoiseMode.INDEPENDENT_HALVES, stream=0):
    """Draw the increments of step ``step_index`` for every channel.

    Parameters
    ----------
    seed : int
    step_index : int or array of int
    channels : sequence of (i, j) pairs, or a tuple ``(i_array, j_array)``
    dt : float
        Step length; ``full ~ N(0, dt)``, halves ``~ N(0, dt/2)``.
    mode : NoiseMode
    stream : int or array of int
        Independent sub-stream, e.g. one per sample path.

    Returns
    -------
    NoiseDraw
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    mode = NoiseMode(mode)
    if isinstance(channels, tuple) and len(channels) == 2 and np.ndim(channels[0]) >= 1:
        i, j = channels
    else:
        pairs = np.asarray(list(channels), dtype=np.int64).reshape(-1, 2)
        i, j = pairs[:, 0], pairs[:, 1]
    lo, hi, step, stream = _channel_counters(i, j, step_index, stream)
    z0, z1 = counter_normals(seed, lo, hi, step, stream)
    if mode is NoiseMode.INDEPENDENT_HALVES:
        scale = np.sqrt(0.5 * dt)
        first = scale * z0
        second = scale * z1
        full = first + second
    else:
        full = np.sqrt(dt) * z0
        first = second = 0.5 * full
    return NoiseDraw(full=full, half_first=first, half_second=second)


@dataclass(frozen=True)
class NoiseSource:
    """Seeded generator of Wiener increments for a whole run."""

    seed: int
    mode: NoiseMode = NoiseMode.INDEPENDENT_HALVES

    def __post_init__(self):
        _key(self.seed)
        object.__setattr__(self, "mode", NoiseMode(self.mode))

    def draw(self, step, i, j, dt, stream=0):
        return draw_noise(self.seed, step, (np.asarray(i), np.asarray(j)), dt, self.mode, stream)

    def at(self, step, dt):
        return StepNoise(self, int(step), float(dt))


@dataclass(frozen=True)
class StepNoise:
    """Noise of one integration step; configurations ask it for their channels."""

    source: NoiseSource
    step: int
    dt: float

    def draw(self, config):
        i, j, stream = config.channels()
        return self.source.draw(self.step, i, j, self.dt, stream)


@dataclass(frozen=True)
class FixedNoise:
    """A precomputed draw handed to every configuration unchanged."""

    noise: NoiseDraw
    step: int = 0

    def draw(self, config):
        return self.noise
