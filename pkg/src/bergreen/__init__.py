"""Weighted Bergman kernels and Green's functions on planar model domains.

The package computes truncated weighted Bergman kernels by Gram-matrix
orthonormalization, closed-form and finite-difference Green's functions
(including the weighted operator d/d(conj z) (1/rho) d/dz), and verifies the
identity connecting the two:

    K(z, w) = -2 / (pi rho(z) rho(w)) * d^2 G_rho(z, w) / dz d(conj w).
"""

from .bergman import (
    ExtremalFunction,
    KernelApproximation,
    LaurentBasis,
    MonomialBasis,
    extremal_function,
    gram_matrix,
    kernel_from_gram,
    reproducing_residual,
    skwarczynski_distance,
)
from .errors import (
    BergreenError,
    ConfigError,
    DegenerateKernelError,
    DiagonalSingularityError,
    GaugeInfeasibleError,
    IllConditionedGramError,
    NumericError,
    ParameterError,
    SolverError,
    StencilError,
    StudyInsufficientError,
    UnsupportedDomainError,
    WeightError,
)
from .geometry import (
    Annulus,
    Disk,
    Domain,
    Exhaustion,
    MoebiusDisk,
    MoebiusMap,
    QuadratureRule,
    Rectangle,
    UnitDisk,
    build_quadrature,
    exhaustion_sequence,
    integrate,
    make_domain,
    moebius_inverse,
    moebius_map,
)
from .green import (
    DiskGreen,
    GreenFunction,
    GridGreen,
    HarmonicPart,
    TransportedGreen,
    WeightedGreen,
    green_disk,
    harmonic_part,
    identity_residual,
    moebius_transport,
    weighted_green,
    wirtinger_mixed,
)
from .harness import ExperimentConfig, VerificationReport, convergence_study, run
from .pdegreen import (
    DiscreteGreen,
    DiscreteOperator,
    GridSpec,
    discretize,
    grid_mixed_derivative,
    rectangle_green_series,
    solve_green,
    solve_mixed,
)
from .weights import (
    AdmissibilityCertificate,
    Gauge,
    GenericC1Weight,
    HoloModulusSquaredWeight,
    LogHarmonicCheck,
    LogHarmonicWeight,
    Weight,
    check_admissible,
    check_log_harmonic,
    eval_weight,
    solve_gauge,
    unit_weight,
    weight_from_json,
)

__version__ = "0.1.0"
