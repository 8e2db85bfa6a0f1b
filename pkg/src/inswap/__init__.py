"""Parallel tempering, infinite swapping and partial infinite swapping samplers."""

from .errors import (CapacityExceededError, ConfigError, InsufficientDataError, InswapError,
                     InvalidArgumentError, InvalidStepError, SingularConfigurationError,
                     UnsupportedDimensionError)
from .kernels import (KernelSpec, euler_maruyama_base, euler_maruyama_infinite_swap,
                      euler_maruyama_prelimit_swap, kernel_step)
from .measures import WeightedAccumulator, accumulate, estimate, merge, rho_matrix
from .permgroup import (Permutation, PermutationSet, block_partition_subgroup, compose,
                        generate_subgroup, generates_full_group, invert, permute_state)
from .potentials import (PotentialModel, double_well, gibbs_log_density, harmonic,
                         lennard_jones_cluster, quadrature_mean_energy, tabulated)
from .rng import RngStream
from .samplers import (PtSchedule, compute_weights, handoff, ins_step, jump_chain_run,
                       pins_interleaved_run, pins_step, pt_step)
from .state import ReplicaState, TemperatureLadder
from .weights import LogWeightTable

__version__ = "0.1.0"
