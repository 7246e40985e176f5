"""Simulated MDI-QKD key layer.

Submodules:

* :mod:`~qspir.qkd.channel` — channel/tally model (gains, error rates).
* :mod:`~qspir.qkd.finitekey` — binary entropy and the extractable-length formula.
* :mod:`~qspir.qkd.decoy` — three-intensity decoy bounds with finite-sample deviations.
* :mod:`~qspir.qkd.toeplitz` — Toeplitz universal hashing (naive and FFT paths).
* :mod:`~qspir.qkd.distill` — sifting / leak accounting / privacy amplification.
* :mod:`~qspir.qkd.optimize` — parameter optimization and distance sweeps.
"""

from .channel import ChannelModel, ProtocolParams, TallySet, simulate_tallies
from .finitekey import EpsilonBudget, FiniteKeyResult, binary_entropy, finite_key_length
from .decoy import decoy_bounds
from .toeplitz import toeplitz_hash
from .distill import DistilledKey, distill_session
from .optimize import optimize_params, sweep_distance

__all__ = [
    "ChannelModel",
    "ProtocolParams",
    "TallySet",
    "simulate_tallies",
    "EpsilonBudget",
    "FiniteKeyResult",
    "binary_entropy",
    "finite_key_length",
    "decoy_bounds",
    "toeplitz_hash",
    "DistilledKey",
    "distill_session",
    "optimize_params",
    "sweep_distance",
]
