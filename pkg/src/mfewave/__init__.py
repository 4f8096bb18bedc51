"""Modulated Fourier expansion solvers for the time-modulated 1D wave equation."""

from .spatial import Grid1D, BandedSym, build_grid, assemble_stiffness
from .modulation import (
    ModulationSpec,
    SourceSpec,
    modulation_eval,
    source_eval,
    cosine_modulation,
    c_mu_prime,
)
from .direct import (
    WaveState,
    WaveTrajectory,
    direct_solve,
    energy_of,
    energy_identity_residual,
)
from .mfe import (
    MfeConfig,
    MfeState,
    MfeTrajectory,
    BlockOperator,
    assemble_block,
    mfe_solve,
    reconstruct,
    mfe_invariant,
    coefficient_norms,
    remainder_norm,
)
from .laplace import (
    LaplaceSolveResult,
    CqWeights,
    helmholtz_apply,
    laplace_solve,
    decay_diagnostic,
    cq_weights,
    cq_solve,
)
from .errors import (
    MfeWaveError,
    InvalidArgument,
    NumericalFailure,
    FactorizationError,
    ModulationPositivityError,
)

__version__ = "0.1.0"
