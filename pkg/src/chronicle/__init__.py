"""Consistent-histories engine for finite-dimensional quantum systems."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ChronicleError,
    ConditionOnNullEvent,
    InconsistentFamily,
    IncompatibleFrameworks,
    InvalidDecomposition,
    NullProjection,
    ParseError,
    ValidationError,
)
from .framework import (  # noqa: E402
    Decomposition,
    Projector,
    check_distributivity,
    common_refinement,
    compatible,
    join,
    meet,
    negation,
    validate_decomposition,
)
from .histories import (  # noqa: E402
    Dynamics,
    HistoryFamily,
    ProbabilityTable,
    TimeGrid,
    at,
    born_rule,
    chain_ket,
    check_consistency,
    conditional,
    marginal,
    pre_probability_pair,
    probabilities,
    unitary_family,
)
from .linalg import DEFAULT_TOL, TensorSpace  # noqa: E402
