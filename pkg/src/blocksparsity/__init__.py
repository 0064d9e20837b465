"""Block-sparsity measures and their estimation from stable random projections."""

__version__ = "0.1.0"

from .blocks import (BlockLayout, BlockSignal, bdnr, block_distribution, block_l0,
                     block_sparsity, l20_approx_bound, make_exact_signal,
                     make_nearly_sparse_signal, make_stepped_signal, mixed_norm)
from .errors import (BlockSparsityError, DegenerateDataError, DomainError,
                     EvaluationError, ParameterError)
from .estimation import (NormEstimate, SparsityEstimate, empirical_cf, estimate_block_sparsity,
                         estimate_norm, norm_ci, pilot_t, recovery_error_bound,
                         theoretical_constants, theta, v_hat)
from .measurement import MeasurementSet, NoiseModel, eta0_for, noise_cf, project
from .stable import (RandomStream, StableSpec, sample_isotropic_vector,
                     sample_positive_stable, sample_sas)
