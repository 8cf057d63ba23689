"""Stochastic Stormer-Verlet integrators for dissipative particle dynamics.

Subpackages follow the build layout: :mod:`noise` and :mod:`core` hold the
counter-based Wiener increments and the separable model contract,
:mod:`integrators` the Euler-A/B and SV-AB/SV-BA schemes, :mod:`kubo` and
:mod:`dpd` the two models, :mod:`diagnostics` the observables, and
:mod:`cli` the experiment drivers.
"""

from .core import PhasePoint, SeparableModel
from .errors import (IntegrationError, ParameterError, SingularConfigurationError,
                     SvdpdError, UnsupportedModelError)
from .integrators import Family, SchemeSpec, StepperState, Variant
from .noise import NoiseDraw, NoiseMode, NoiseSource

__version__ = "0.1.0"

__all__ = [
    "PhasePoint",
    "SeparableModel",
    "SchemeSpec",
    "StepperState",
    "Family",
    "Variant",
    "NoiseDraw",
    "NoiseMode",
    "NoiseSource",
    "SvdpdError",
    "ParameterError",
    "IntegrationError",
    "SingularConfigurationError",
    "UnsupportedModelError",
]
