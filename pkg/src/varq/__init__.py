"""q-variation of operator families, Walsh-Paley martingales and transference."""

from .errors import (
    DegenerateInputError,
    DomainError,
    PrecisionError,
    QuadratureError,
    ResolutionError,
    SingularityError,
    SizeError,
    SpaceMismatchError,
    TailNotStableError,
    VarqError,
)
from .spaces import INF, NormKind, Point, Space, axpy, norm
from .variation import SamplePath, VariationResult, vq_bruteforce, vq_dp, vq_stream_lower, vq_values
from .operators import (
    AVERAGE,
    CONJUGATE_POISSON,
    PHI_MINUS,
    PHI_PLUS,
    POISSON,
    RHO_MINUS,
    RHO_PLUS,
    TRUNCATED_HILBERT,
    KernelFamily,
    ScaleGrid,
    StepFunction,
    apply,
    decomposition_residual,
    decomposition_terms,
    doubly_truncated,
    hilbert_full,
    kernel_hypothesis_check,
    lp_norm,
    quad_convolve,
)
from .operators import eval as eval_kernel
from .martingale import (
    DyadicFunction,
    WalshMartingale,
    conditional_expectation,
    cotype_ratio,
    martingale_vq_lp,
    partial_sums,
    random_martingale,
    witness_linfty,
)
from .transference import (
    CPoint,
    DiagonalPoly,
    MultiTrigPoly,
    SelectionCertificate,
    build_blocks,
    check_certificate,
    circle_poisson_vq,
    cotype_chain_report,
    fejer_squarewave,
    poisson_flow,
    select_sequences,
    telescoping_error,
    walsh_expand,
)
from .harness import (
    ExperimentConfig,
    ReportRow,
    emit,
    estimate_constant,
    field_vq_lp,
    identity_suite,
    sweep,
)

__version__ = "0.1.0"
