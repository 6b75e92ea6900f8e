"""pirlab: exact-arithmetic laboratory for private retrieval protocols.

Simulates multi-database retrieval schemes over prime fields, accounts
costs as exact rationals against closed-form capacities, and verifies
privacy claims by exhaustive enumeration.
"""

from .field import (
    FieldElement,
    FieldMismatchError,
    NonInvertibleError,
    PrimeField,
    SingularMatrixError,
    SymbolVector,
    solve_linear,
)
from .databank import (
    CostReport,
    DatabaseState,
    MessageStore,
    SchemeTranscript,
    empirical_rate,
    replicate,
    serve,
)
from .rng import FixedSource, SeededSource

__all__ = [
    "CostReport",
    "DatabaseState",
    "FieldElement",
    "FieldMismatchError",
    "FixedSource",
    "MessageStore",
    "NonInvertibleError",
    "PrimeField",
    "SchemeTranscript",
    "SeededSource",
    "SingularMatrixError",
    "SymbolVector",
    "empirical_rate",
    "replicate",
    "serve",
    "solve_linear",
]

__version__ = "0.1.0"
