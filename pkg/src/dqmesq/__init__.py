"""
Exact open-quantum-system dynamics in the dissipaton second-quantized form.

The reduced density tensor (system density matrix dilated by dissipaton
occupations) evolves under a single linear generator. This package builds
that generator for bosonic and fermionic Gaussian environments, propagates it
classically or through a statevector simulation of an LCU circuit, and checks
it against a hierarchical-equations-of-motion oracle and, for real modes,
against the pseudomode Lindblad equation.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .generator import SystemSpec, build_lambda  # noqa: F401
from .models import ModelJob, instantiate_model, paper_mode_table  # noqa: F401
from .modes import (  # noqa: F401
    ExpMode,
    ModeSet,
    SpectralDensity,
    decompose_spectral_density,
    dissipaton_coefficients,
    fermionic_modeset,
    pair_conjugates,
)
from .propagate import PropagationConfig, RdtState, propagate  # noqa: F401
from .qsim import LcuConfig, run_lcu  # noqa: F401
