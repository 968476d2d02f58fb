"""Exact numerics for the droplet spectrum of the random XXZ chain in its Ising phase."""

from .config_space import ConfigSpace, enumerate_configs
from .correlators import LocalObservable, partition_sup, sector_correlator, set_correlator
from .exceptions import (
    CapacityError,
    ConvergenceError,
    ParameterError,
    ResolventSingularError,
    SchemaError,
)
from .operators import (
    DisorderSpec,
    ModelParams,
    build_sector_hamiltonian,
    build_spin_hamiltonian,
    sample_disorder,
)
from .spectral import diagonalize, droplet_band, droplet_window

__version__ = "0.1.0"
