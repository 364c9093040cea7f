"""Variational steady states of driven-dissipative boson and spin models in the P representation."""

from .algebra import (
    IDENTITY, EomSystem, ModelSpec, Monomial, OperatorPolynomial, adjoint_lindblad, annihilation,
    creation, eom_system, spin_op,
)
from .errors import (
    CapacityError, ClosureError, ConfigError, MomentOrderError, PvarError, SeriesDivergenceError,
    SingularSystemError, StructuralError, TruncationError, UnphysicalMomentsError,
)
from .moments import (
    Ansatz, Cat, Coherent, Fock, ModeAnsatz, SpinAnsatz, Squeezed, SqueezedFock, SqueezedThermal,
    Thermal, ansatz_moment, component_moment, convolve_moment,
)

__version__ = "0.1.0"
