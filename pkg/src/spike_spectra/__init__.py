"""Spectral skeleton of polygonal multi-spike configurations.

Stages: ground state profile, interaction kernels, balanced spike geometry,
interaction matrices and their kernel/gap certification.
"""

from .configuration import (
    BalanceResult,
    Layout,
    MNCandidate,
    SpikeConfiguration,
    build_configuration,
    solve_balancing,
    suggest_mn,
)
from .errors import *  # noqa: F401,F403
from .ground_state import (
    ProblemParams,
    RadialProfile,
    SolverOptions,
    eval_w,
    eval_w_prime,
    solve_ground_state,
    validate_profile,
)
from .kernels import (
    KernelTable,
    QuadratureOptions,
    SigmaConstants,
    interaction_projection,
    interaction_tensor,
    kernel_values,
    psi,
    psi1,
    psi2,
    sigma_constants,
    tabulate_kernels,
)
from .matrices import (
    BlockMatrix,
    assemble_H_alpha,
    assemble_M1,
    build_symmetry_kernels,
    entry_oracle,
    pairwise_M1_H,
    reduce_H_alpha,
    reduce_M1,
    schur_complement,
)
from .spectral import (
    FrequencyBlock,
    SpectralReport,
    compare_Dfj,
    compare_Di,
    det_Dfj_closed_form,
    det_Di_closed_form,
    frequency_blocks,
    nondegeneracy_report,
    null_space_report,
)
from .structured import Circulant, block_dft_conjugate, dft_matrix, solve_toeplitz, toeplitz_inverse

__version__ = "0.1.0"
