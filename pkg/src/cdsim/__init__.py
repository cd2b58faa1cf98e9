"""Classical counterdiabatic driving and reversibility experiments.

Evolves phase-space ensembles of driven nonlinear oscillators, measures
reversibility through the final energy variance of forward, cyclic, and
linear ramp-and-reverse protocols, and suppresses diabatic excitations with
a variationally optimized local counterdiabatic term built from nested
Poisson brackets.
"""

__version__ = "0.1.0"

from .ensemble import (Ensemble, EnergyStats, energy_stats,  # noqa: F401
                       sample_general_shell, sample_harmonic_shell,
                       sample_shell, stats_from_energies)
from .models import (INTEGRABLE, NONINTEGRABLE, HARMONIC_1D,  # noqa: F401
                     ModelSpec, ProtocolSpec, RampSchedule, get_model,
                     get_protocol)
from .polyalg import PhasePoint, PhasePolynomial, poisson_bracket  # noqa: F401
