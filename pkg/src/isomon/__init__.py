"""Rank-2 Fuchsian systems on the Riemann sphere.

Stability of parabolic connections, monodromy by ODE transport, SL2
trace coordinates, elementary and Backlund transformations, and
isomonodromic (Schlesinger) flows.
"""
from .character import (
    FrickeData,
    RepTuple,
    TraceCoordinates,
    braid_act,
    find_fricke_singular_points,
    fricke_eval,
    invariant_fingerprint,
    jordan_equivalent,
    mu_map,
    multiaffine_check,
    sample_fiber_point,
    theta_coefficients,
)
from .errors import (
    EigenlineIndeterminate,
    FiberSamplingError,
    GaugeDegenerate,
    IsomonError,
    MonodromyCheckError,
    NumericalError,
    PoleCollision,
    RadiusUnderflow,
    StepUnderflow,
    ValidationError,
)
from .fuchsian import (
    INF,
    ExponentBookkeeping,
    FuchsianSystem,
    InvariantSubbundle,
    LambdaClass,
    ParabolicConnection,
    StabilityResult,
    Verdict,
    Weight,
    check_stability,
    classify_lambda,
    find_invariant_subbundles,
    local_exponents,
    parabolic_degree,
    random_system,
    sub_parabolic_degree,
    validate_connection,
    validate_system,
)
from .isomonodromy import (
    FlowPath,
    FlowResult,
    SchlesingerState,
    apparent_singularity_trajectory,
    integrate_flow,
    schlesinger_rhs,
    verify_isomonodromy,
)
from .monodromy import LoopBasis, MonodromyRep, canonical_loops, compute_monodromy, riemann_hilbert, transport
from .transformations import (
    ElmMinus,
    ElmPlus,
    GaugeTransformation,
    Swap,
    Tensor,
    bl_apply,
    elm_bookkeeping,
    schlesinger_transform,
    swap_parabolic,
    weyl_apply,
)

__version__ = "0.1.0"
