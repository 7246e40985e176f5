"""Raw-key distillation: sifting, reconciliation accounting, amplification.

The simulated link produces the two parties' sifted Z-basis signal strings
(correlated at the model error rate), removes the parameter-estimation
sample, accounts the reconciliation leak

    leak_EC = ceil(f_EC * n_kept * h(QBER_Z)),

corrects the peer string (reconciliation is modeled by an oracle and an
equality check; the information cost is what matters here), evaluates the
extractable length, and Toeplitz-hashes both sides to the final identical
secret pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bitops import bytes_for_bits
from ..errors import ValidationError
from ..rng import BitSource
from .channel import ChannelModel, ProtocolParams, simulate_tallies
from .decoy import decoy_bounds
from .finitekey import EpsilonBudget, FiniteKeyResult, binary_entropy, finite_key_length
from .toeplitz import toeplitz_hash


@dataclass(frozen=True)
class DistilledKey:
    """Final secret material: ``bit_length`` bits packed little-endian."""

    material: bytes
    bit_length: int

    def __post_init__(self):
        if len(self.material) != bytes_for_bits(self.bit_length):
            raise ValidationError("material length does not match bit length")


def _np_rng(source: BitSource) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(source.take_int(64)))


def distill_session(
    channel: ChannelModel,
    params: ProtocolParams,
    seed: int | str,
) -> tuple[DistilledKey, DistilledKey, FiniteKeyResult]:
    """Run one full distillation; both returned keys are identical.

    Deterministic for a given ``seed``.  The finite-key accounting uses the
    expected-value tallies, so the extractable length depends only on
    (channel, params); the sampled raw strings depend on the seed.
    """
    source = BitSource(seed)
    tallies = simulate_tallies(channel, params)
    n_sift = int(round(tallies.coinc[("Z", 0, 0)]))
    qber = (
        tallies.errors[("Z", 0, 0)] / tallies.coinc[("Z", 0, 0)]
        if tallies.coinc[("Z", 0, 0)] > 0
        else 0.0
    )
    n0, n1, e1 = decoy_bounds(tallies, params)
    eps = EpsilonBudget(
        params.eps_cor, params.eps_prime, params.eps_hat, params.eps_pa
    )

    n_pe = int(round(params.pe_fraction * n_sift))
    n_kept = n_sift - n_pe
    leak_ec = math.ceil(params.ec_efficiency * n_kept * binary_entropy(qber))
    l = finite_key_length(n0, n1, e1, leak_ec, eps)
    result = FiniteKeyResult(
        n0_lower=n0, n1_lower=n1, e1_upper=e1, leak_ec=leak_ec, l=l
    )
    if l == 0 or n_kept <= 0:
        empty = DistilledKey(material=b"", bit_length=0)
        return empty, empty, FiniteKeyResult(
            n0_lower=n0, n1_lower=n1, e1_upper=e1, leak_ec=leak_ec, l=0
        )

    rng = _np_rng(source.spawn("raw"))
    alice = rng.integers(0, 2, n_sift, dtype=np.uint8)
    bob = alice.copy()
    n_err = int(round(qber * n_sift))
    if n_err:
        err_pos = rng.choice(n_sift, size=n_err, replace=False)
        bob[err_pos] ^= 1

    # Parameter-estimation sample: removed from key generation.
    pe_pos = rng.choice(n_sift, size=n_pe, replace=False) if n_pe else []
    keep_mask = np.ones(n_sift, dtype=bool)
    keep_mask[pe_pos] = False
    alice_kept = alice[keep_mask]
    bob_kept = bob[keep_mask]

    # Reconciliation: the oracle corrects the peer string at the accounted
    # leak; both sides then verify equality (hash comparison stands in for
    # the eps_cor-bounded check).
    bob_kept = alice_kept.copy()
    if not np.array_equal(alice_kept, bob_kept):
        raise ValidationError("reconciliation failed verification")

    kept_bytes = np.packbits(alice_kept, bitorder="little").tobytes()
    seed_bits = n_kept + l - 1
    hash_seed = source.spawn("toeplitz").take_bits(seed_bits)
    final = toeplitz_hash(kept_bytes, n_kept, hash_seed, l)
    key = DistilledKey(material=final, bit_length=l)
    return key, DistilledKey(material=final, bit_length=l), result
