"""Energy transport in scalar harmonic lattices.

Exact spectral evolution of the discrete wave equation, multiscale lattice
Wigner pairings, and estimators for the three macroscopic energy carriers
(a phase-space measure, a concentration measure, and a wave field) together
with their closed-form transport laws.
"""

from .lattice import (
    CouplingStencil,
    LatticeState,
    NormalMode,
    GaugeError,
    StencilFormatError,
    dft,
    idft,
    evolve_leapfrog,
    evolve_spectral,
    from_normal_mode,
    hamiltonian,
    to_normal_mode,
)
from .dispersion import DispersionModel, AcousticCertificate

__all__ = [
    "CouplingStencil",
    "LatticeState",
    "NormalMode",
    "GaugeError",
    "StencilFormatError",
    "DispersionModel",
    "AcousticCertificate",
    "dft",
    "idft",
    "evolve_leapfrog",
    "evolve_spectral",
    "from_normal_mode",
    "hamiltonian",
    "to_normal_mode",
]
