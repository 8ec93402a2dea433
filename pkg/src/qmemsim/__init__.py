"""Thermal Davies dynamics and memory lifetimes for Ising rings and Kitaev tori."""
from .pauli import PauliOp, PauliSum, commutes, conjugate_sign, multiply
from .model import (
    StabilizerModel, SyndromeState, build_ising_ring, build_kitaev_torus, build_model,
    gibbs_expectation, ground_expectation, hamiltonian_energy,
)
from .davies import (
    DaviesGenerator, SpectralFunction, build_jump_set, check_detailed_balance, check_locality,
    commutant_dimension, propagate_observable,
)
from .reduced import (
    DressedLogical, StabilizerProduct, autocorrelation, build_reduced_generator, lifetime,
    propagate_reduced,
)
from .kmc import lifetime_scan, run_autocorrelation, sample_gibbs_syndrome

__version__ = "0.1.0"
