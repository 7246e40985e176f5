"""Two-database symmetric private retrieval over simulated quantum keys.

The package has two layers. The retrieval layer arranges a database as an
m×m×m cube, answers subset-XOR queries from two non-communicating data
centres, and masks the answers with shared one-time pads so the user
learns exactly one entry and the data centres learn nothing about the
index. The key layer simulates measurement-device-independent quantum key
distribution — channel model, decoy-state bounds, finite-key extraction,
and privacy amplification — to provision the pads.
"""

from .cube import Database, cube_dims
from .errors import (
    BudgetExhaustedError,
    ConfigurationError,
    FramingError,
    KeyReuseError,
    ProtocolError,
    RangeError,
    SpirError,
    StorageError,
    ValidationError,
)
from .keystore import KeyPool, KeySlice, KeyStore
from .masking import KeyBudget, required_key_budget
from .protocol import (
    AnswerBundle,
    QueryTriple,
    UserRandomness,
    compute_answer_bundle,
    gen_queries,
    reconstruct_plain,
    sample_user_randomness,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerBundle",
    "BudgetExhaustedError",
    "ConfigurationError",
    "Database",
    "FramingError",
    "KeyBudget",
    "KeyPool",
    "KeyReuseError",
    "KeySlice",
    "KeyStore",
    "ProtocolError",
    "QueryTriple",
    "RangeError",
    "SpirError",
    "StorageError",
    "UserRandomness",
    "ValidationError",
    "compute_answer_bundle",
    "cube_dims",
    "gen_queries",
    "reconstruct_plain",
    "required_key_budget",
    "sample_user_randomness",
    "__version__",
]
