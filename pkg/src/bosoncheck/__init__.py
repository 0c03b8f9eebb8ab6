"""Exact samplers and statistical checks for linear-optical sampling distributions."""

from .errors import NumericalDegeneracyError, ResourceLimitError
from .estimators import (
    VerifierDecision,
    log_r_star_general_batch,
    p_statistic,
    permanent_verifier,
    q_statistic,
    r_star,
    r_star_general,
    rownorm_distinguisher,
)
from .experiments import ExperimentConfig, ExperimentReport, run
from .linalg_core import (
    RngStream,
    determinant,
    haar_column_orthonormal,
    is_column_orthonormal,
    permanent_naive,
    permanent_ryser,
    permanents,
    sample_gaussian_matrix,
)
from .outcomes import OutcomeSpace
from .samplers import (
    ProbabilityTable,
    SampleBatch,
    exact_boson_table,
    exact_fermion_table,
    sample_batch,
    sample_boson_sequential,
    sample_fermion,
    sample_lossy_boson,
)
from .stats import ReferenceLaw, ks_distance, log_chisq_moments, lognormal_det_reference, total_variation

__version__ = "0.1.0"
