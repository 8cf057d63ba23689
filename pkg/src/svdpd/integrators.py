"""Stochastic Euler-A/B and Stormer-Verlet steps for separable models.

SV-AB is Euler-A(dt/2) after Euler-B(dt/2), SV-BA the reverse composition.
With noise and external forces switched off both reduce to the ordinary
(symplectic) velocity- and position-Verlet schemes.

For SV-AB the dissipative force enters the two half kicks through two
discretisations, ``fd1 = F_D(q^k, .)`` and ``fd2 = F_D(q^{k+1}, .)``. The six
variants differ only in which momentum is fed to them:

======  ============================================  ==============================================
AB1     p^k                                           p^{k+1} (implicit)
AB2     p^k                                           p^{k+lam}                        (GCC)
AB3     p^{k-1+lam}                                   p^{k+lam}                        (Groot-Warren)
AB4     a p^k + (1-a) p^{k-1+lam}                     b p^{k+lam} + (1-b) p^{k+1}
AB5     p^{k-1+lam1}                                  p^{k+lam2}
AB6     a p^k + (1-a) p^{k-1+lam1}                    b p^{k+lam2} + (1-b) p^{k+1}
======  ============================================  ==============================================

The predictors are ``p^{k+lam} = p^k + lam * (dt * (F_C(q^k) + fd1) + R^k)``
where ``R^k`` is the full-step random impulse at ``q^k``; ``p^{k+lam1}`` is
carried to the next step, and on the first step ``p^{k-1+lam}`` is ``p^0``.
Implicit second kicks (AB1, and AB4/AB6 with ``b < 1``) are solved by
fixed-point iteration, which needs ``F_D`` linear in ``p``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .core import Configuration, PhasePoint, SeparableModel
from .errors import IntegrationError, ParameterError, UnsupportedModelError
from .noise import NoiseMode

__all__ = [
    "Family",
    "Variant",
    "SchemeSpec",
    "StepperState",
    "euler_a_step",
    "euler_b_step",
    "sv_ab_step",
    "sv_ba_step",
    "first_dissipative_force",
    "second_dissipative_force",
    "step",
    "FIXED_POINT_TOL",
    "FIXED_POINT_MAX_ITER",
]

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 50


class Family(str, Enum):
    EULER_A = "EulerA"
    EULER_B = "EulerB"
    SV_AB = "SV_AB"
    SV_BA = "SV_BA"


class Variant(str, Enum):
    AB1 = "AB1"
    AB2_GCC = "AB2_GCC"
    AB3_GW = "AB3_GW"
    AB4 = "AB4"
    AB5 = "AB5"
    AB6 = "AB6"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "").replace("SVAB", "AB")
        aliases = {"AB2": cls.AB2_GCC, "GCC": cls.AB2_GCC, "AB3": cls.AB3_GW, "GW": cls.AB3_GW}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown SV-AB variant {name!r}") from None


_ONE_LAMBDA = (Variant.AB2_GCC, Variant.AB3_GW, Variant.AB4)


@dataclass(frozen=True)
class SchemeSpec:
    """Integrator family, SV-AB variant and its parameters.

    For the single-lambda variants (AB2, AB3, AB4) ``lambda1`` is the lambda
    and ``lambda2`` is forced equal to it. Parameters a variant does not use
    are pinned to the values that make it a special case of AB6, so that a
    spec always reads as an AB6 parameter point.
    """

    family: Family = Family.SV_AB
    variant: Variant = Variant.AB3_GW
    alpha: float = 0.0
    beta: float = 1.0
    lambda1: float = 0.5
    lambda2: float = 0.5
    noise_mode: NoiseMode = NoiseMode.INDEPENDENT_HALVES

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ParameterError(f"unknown integrator family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))
        for name in ("alpha", "beta", "lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, value)
        v = self.variant
        if v is Variant.AB1:
            self._pin(alpha=1.0, beta=0.0)
        elif v is Variant.AB2_GCC:
            self._pin(alpha=1.0, beta=1.0)
        elif v in (Variant.AB3_GW, Variant.AB5):
            self._pin(alpha=0.0, beta=1.0)
        if v in _ONE_LAMBDA:
            object.__setattr__(self, "lambda2", self.lambda1)

    def _pin(self, **values):
        for name, value in values.items():
            object.__setattr__(self, name, value)

    @classmethod
    def sv_ab1(cls, **kw):
        return cls(variant=Variant.AB1, **kw)

    @classmethod
    def gcc(cls, lam, **kw):
        return cls(variant=Variant.AB2_GCC, lambda1=lam, **kw)

    @classmethod
    def gw(cls, lam, **kw):
        return cls(variant=Variant.AB3_GW, lambda1=lam, **kw)

    @classmethod
    def sv_ab4(cls, alpha, beta, lam, **kw):
        return cls(variant=Variant.AB4, alpha=alpha, beta=beta, lambda1=lam, **kw)

    @classmethod
    def sv_ab5(cls, lambda1, lambda2, **kw):
        return cls(variant=Variant.AB5, lambda1=lambda1, lambda2=lambda2, **kw)

    @classmethod
    def sv_ab6(cls, alpha, beta, lambda1, lambda2, **kw):
        return cls(variant=Variant.AB6, alpha=alpha, beta=beta, lambda1=lambda1, lambda2=lambda2, **kw)

    @classmethod
    def sv_ba(cls, **kw):
        return cls(family=Family.SV_BA, **kw)

    @property
    def implicit(self):
        if self.family is not Family.SV_AB:
            return False
        if self.variant is Variant.AB1:
            return True
        return self.variant in (Variant.AB4, Variant.AB6) and self.beta != 1.0

    @property
    def label(self):
        if self.family is not Family.SV_AB:
            return self.family.value
        v = self.variant
        if v is Variant.AB1:
            return "SV-AB-1"
        if v is Variant.AB2_GCC:
            return f"SV-AB-2(lambda={self.lambda1:g})"
        if v is Variant.AB3_GW:
            return f"SV-AB-3(lambda={self.lambda1:g})"
        if v is Variant.AB4:
            return f"SV-AB-4(alpha={self.alpha:g},beta={self.beta:g},lambda={self.lambda1:g})"
        if v is Variant.AB5:
            return f"SV-AB-5(lambda1={self.lambda1:g},lambda2={self.lambda2:g})"
        return (f"SV-AB-6(alpha={self.alpha:g},beta={self.beta:g},"
                f"lambda1={self.lambda1:g},lambda2={self.lambda2:g})")


@dataclass
class StepperState:
    """Per-trajectory data carried between SV-AB steps.

    ``configuration`` caches the model configuration at the current
    positions so the geometry at ``q^{k+1}`` is not rebuilt as ``q^k``.
    """

    previous_predictor: Optional[np.ndarray] = None
    step_index: int = 0
    configuration: Optional[Configuration] = field(default=None, repr=False)


def _finite_or_raise(state, step):
    if not state.is_finite():
        raise IntegrationError("non-finite phase-space values", step)
    return state


def _config_for(model, q, stepper):
    cached = stepper.configuration if stepper is not None else None
    if cached is not None and cached.q is q:
        return cached
    return model.configuration(q)


def euler_a_step(model: SeparableModel, state: PhasePoint, dt, noise, increment="full"):
    """Stochastic Euler-A: gradients at ``(q^{k+1}, p^k)``, external forces at step k.

    ``increment`` picks which member of the step's :class:`NoiseDraw` plays
    the role of ``dW`` over this (sub)step.
    """
    q, p = state.q, state.p
    cfg_k = model.configuration(q)
    dw_k = noise.draw(cfg_k).increment(increment)
    q1 = model.wrap(q + dt * model.grad_T(p) + cfg_k.drift_noise(p, dw_k))
    cfg_1 = model.configuration(q1)
    dw_1 = noise.draw(cfg_1).increment(increment)
    p1 = (p + dt * (cfg_1.conservative_force() + cfg_k.dissipative_force(p))
          + cfg_1.noise_impulse(dw_1) + cfg_k.sd_impulse(p, dw_k))
    return _finite_or_raise(PhasePoint(q1, p1), getattr(noise, "step", None))


def euler_b_step(model: SeparableModel, state: PhasePoint, dt, noise, increment="full"):
    """Stochastic Euler-B: gradients at ``(q^k, p^{k+1})``; kick first, then drift."""
    q, p = state.q, state.p
    cfg_k = model.configuration(q)
    dw_k = noise.draw(cfg_k).increment(increment)
    p1 = (p + dt * (cfg_k.conservative_force() + cfg_k.dissipative_force(p))
          + cfg_k.noise_impulse(dw_k) + cfg_k.sd_impulse(p, dw_k))
    q1 = model.wrap(q + dt * model.grad_T(p1) + cfg_k.drift_noise(p1, dw_k))
    return _finite_or_raise(PhasePoint(q1, p1), getattr(noise, "step", None))


def _blend(weight, x, y):
    return weight * x + (1.0 - weight) * y


def first_dissipative_force(spec, cfg_k, p, p_prev, dt, fc_k, random_full):
    """First-kick dissipative force and the step's momentum predictors.

    Parameters
    ----------
    spec : SchemeSpec
    cfg_k : Configuration at ``q^k``
    p : momenta ``p^k``
    p_prev : carried predictor ``p^{k-1+lambda1}`` (``p^0`` on the first step)
    dt : float
    fc_k : conservative force at ``q^k``
    random_full : callable returning the full-step random impulse at ``q^k``;
        only evaluated by variants that build predictors.

    Returns
    -------
    fd1, carried predictor ``p^{k+lambda1}``, second-kick predictor ``p^{k+lambda2}``
    """
    v = spec.variant
    if v is Variant.AB1:
        return cfg_k.dissipative_force(p), p, None
    if v is Variant.AB2_GCC:
        fd1 = cfg_k.dissipative_force(p)
    elif v in (Variant.AB3_GW, Variant.AB5):
        fd1 = cfg_k.dissipative_force(p_prev)
    else:
        fd1 = cfg_k.dissipative_force(_blend(spec.alpha, p, p_prev))
    rate = dt * (fc_k + fd1) + random_full()
    pred1 = p + spec.lambda1 * rate
    if v in _ONE_LAMBDA:
        return fd1, pred1, pred1
    return fd1, pred1, p + spec.lambda2 * rate


def second_dissipative_force(spec, model, cfg_1, pred2, p_guess, kick, step=None):
    """Second-kick dissipative force and the resulting ``p^{k+1}``.

    ``kick(fd2)`` completes the final half kick for a given dissipative
    force. Explicit variants evaluate it once; implicit ones iterate
    ``p <- kick(F_D(q^{k+1}, arg(p)))`` from ``p_guess``.
    """
    v = spec.variant
    if v in (Variant.AB2_GCC, Variant.AB3_GW, Variant.AB5):
        fd2 = cfg_1.dissipative_force(pred2)
        return fd2, kick(fd2)
    if v in (Variant.AB4, Variant.AB6) and spec.beta == 1.0:
        fd2 = cfg_1.dissipative_force(pred2)
        return fd2, kick(fd2)
    if not model.dissipation_linear_in_p:
        raise UnsupportedModelError(
            f"{spec.label} needs F_D linear in p for its implicit final kick")
    if v is Variant.AB1:
        def argument(p1):
            return p1
    else:
        beta = spec.beta

        def argument(p1):
            return _blend(beta, pred2, p1)
    p_cur = p_guess
    for _ in range(FIXED_POINT_MAX_ITER):
        fd2 = cfg_1.dissipative_force(argument(p_cur))
        p_next = kick(fd2)
        change = np.max(np.abs(p_next - p_cur)) if p_next.size else 0.0
        p_cur = p_next
        if change <= FIXED_POINT_TOL * max(1.0, float(np.max(np.abs(p_next), initial=0.0))):
            return fd2, p_next
    raise IntegrationError(
        f"implicit dissipative kick did not converge in {FIXED_POINT_MAX_ITER} iterations", step)


def sv_ab_step(model, state, stepper, dt, noise, spec):
    """One SV-AB step: half kick, full drift, half kick.

    Returns the new :class:`PhasePoint` and :class:`StepperState`.
    """
    if spec.family is not Family.SV_AB:
        raise ParameterError(f"sv_ab_step needs an SV_AB spec, got {spec.family.value}")
    k = stepper.step_index
    q, p = state.q, state.p
    cfg_k = _config_for(model, q, stepper)
    draw_k = noise.draw(cfg_k)
    fc_k = cfg_k.conservative_force()
    p_prev = p if stepper.previous_predictor is None else stepper.previous_predictor

    def random_full():
        return cfg_k.noise_impulse(draw_k.full) + cfg_k.sd_impulse(p, draw_k.full)

    fd1, carried, pred2 = first_dissipative_force(spec, cfg_k, p, p_prev, dt, fc_k, random_full)
    p_half = (p + 0.5 * dt * (fc_k + fd1) + cfg_k.noise_impulse(draw_k.half_first)
              + cfg_k.sd_impulse(p, draw_k.half_first))
    q1 = model.wrap(q + dt * model.grad_T(p_half) + cfg_k.drift_noise(p_half, draw_k.full))

    cfg_1 = model.configuration(q1)
    draw_1 = noise.draw(cfg_1)
    fc_1 = cfg_1.conservative_force()
    rest = cfg_1.noise_impulse(draw_1.half_second) + cfg_k.sd_impulse(p, draw_k.half_second)

    def kick(fd2):
        return p_half + 0.5 * dt * (fc_1 + fd2) + rest

    _, p1 = second_dissipative_force(spec, model, cfg_1, pred2, p_half, kick, k)
    new_state = _finite_or_raise(PhasePoint(q1, p1), k)
    return new_state, StepperState(previous_predictor=carried, step_index=k + 1,
                                   configuration=cfg_1)


def sv_ba_step(model, state, dt, noise, spec=None, stepper=None, form="staged"):
    """One SV-BA step: half drift, full kick, half drift.

    The dissipative force is taken at ``(q^k, p^k)``. ``form="eliminated"``
    computes the final drift from ``q^k`` and the averaged velocity instead
    of from ``q^{k+1/2}``; the two forms agree up to rounding.
    """
    if spec is not None and spec.family is not Family.SV_BA:
        raise ParameterError(f"sv_ba_step needs an SV_BA spec, got {spec.family.value}")
    if form not in ("staged", "eliminated"):
        raise ParameterError(f"unknown SV-BA form {form!r}")
    k = stepper.step_index if stepper is not None else getattr(noise, "step", None)
    q, p = state.q, state.p
    cfg_k = _config_for(model, q, stepper)
    draw_k = noise.draw(cfg_k)
    q_half = model.wrap(q + 0.5 * dt * model.grad_T(p) + cfg_k.drift_noise(p, draw_k.half_first))
    cfg_h = model.configuration(q_half)
    draw_h = noise.draw(cfg_h)
    p1 = (p + dt * (cfg_h.conservative_force() + cfg_k.dissipative_force(p))
          + cfg_h.noise_impulse(draw_h.full)
          + cfg_k.sd_impulse(p, draw_k.half_first) + cfg_k.sd_impulse(p, draw_k.half_second))
    if form == "staged":
        q1 = q_half + 0.5 * dt * model.grad_T(p1) + cfg_h.drift_noise(p1, draw_h.half_second)
    else:
        q1 = (q + 0.5 * dt * (model.grad_T(p) + model.grad_T(p1))
              + cfg_k.drift_noise(p, draw_k.half_first) + cfg_h.drift_noise(p1, draw_h.half_second))
    new_state = _finite_or_raise(PhasePoint(model.wrap(q1), p1), k)
    if stepper is None:
        return new_state
    return new_state, replace(stepper, step_index=stepper.step_index + 1, configuration=None)


def step(model, state, stepper, dt, noise, spec):
    """Advance one step with any family; returns ``(state, stepper)``."""
    fam = spec.family
    if fam is Family.SV_AB:
        return sv_ab_step(model, state, stepper, dt, noise, spec)
    if fam is Family.SV_BA:
        return sv_ba_step(model, state, dt, noise, spec, stepper=stepper)
    stepper = replace(stepper, step_index=stepper.step_index + 1, configuration=None)
    if fam is Family.EULER_A:
        return euler_a_step(model, state, dt, noise), stepper
    return euler_b_step(model, state, dt, noise), stepper
