"""Honest-retrieval core of the two-database cube scheme.

A query to one database is a triple of m-bit membership vectors selecting a
subcube; the answer is the XOR of the selected cells plus, for every
dimension d and position p, the XOR with dimension d's vector toggled at p.
The second database receives the same triple with bit x_d toggled in each
dimension, so the eight subcube sums surrounding entry x telescope to the
entry itself.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitops import bytes_for_bits, xor_bytes
from .cube import Database, index_to_coords
from .errors import RangeError, ValidationError
from .rng import BitSource


@dataclass(frozen=True)
class UserRandomness:
    """Three uniform m-bit vectors, drawn independently of the index."""

    s1: int
    s2: int
    s3: int
    m: int

    @property
    def vectors(self) -> tuple[int, int, int]:
        return (self.s1, self.s2, self.s3)


@dataclass(frozen=True)
class QueryTriple:
    """Three m-bit membership vectors, one per cube dimension."""

    t1: int
    t2: int
    t3: int
    m: int

    def __post_init__(self):
        limit = 1 << self.m
        for t in (self.t1, self.t2, self.t3):
            if not 0 <= t < limit:
                raise ValidationError(
                    f"membership vector {t:#x} does not fit {self.m} bits"
                )

    @property
    def vectors(self) -> tuple[int, int, int]:
        return (self.t1, self.t2, self.t3)

    def dim(self, d: int) -> int:
        """Dimension ``d`` (0-based) membership vector."""
        return self.vectors[d]


@dataclass(frozen=True)
class AnswerBundle:
    """One database's unmasked reply: ``1 + 3m`` components of L bits.

    ``a0`` is the queried subcube XOR; ``flips[d][p]`` is the same XOR with
    dimension ``d``'s membership vector toggled at position ``p``.
    """

    a0: bytes
    flips: tuple[tuple[bytes, ...], ...]

    @property
    def m(self) -> int:
        return len(self.flips[0])


def sample_user_randomness(m: int, rng: BitSource) -> UserRandomness:
    """Draw the 3m uniform query bits."""
    if m < 1:
        raise RangeError(f"cube side must be positive, got {m}")
    return UserRandomness(
        s1=rng.take_int(m), s2=rng.take_int(m), s3=rng.take_int(m), m=m
    )


def gen_queries(
    x: int, randomness: UserRandomness, m: int
) -> tuple[QueryTriple, QueryTriple]:
    """Query pair for entry ``x``: (uniform triple, same with x toggled).

    The first query is a function of the randomness alone; the second
    toggles bit ``x_d`` of dimension ``d``'s vector for each dimension.
    """
    if randomness.m != m:
        raise ValidationError(
            f"randomness drawn for m={randomness.m}, queries need m={m}"
        )
    if not 0 <= x < m**3:
        raise RangeError(f"index {x} outside cube of side {m}")
    coords = index_to_coords(x, m)
    q1 = QueryTriple(*randomness.vectors, m=m)
    toggled = tuple(s ^ (1 << c) for s, c in zip(randomness.vectors, coords))
    q2 = QueryTriple(*toggled, m=m)
    return q1, q2


def compute_answer_bundle(cube: Database, query: QueryTriple) -> AnswerBundle:
    """All ``1 + 3m`` subcube XOR components for one received query."""
    if query.m != cube.m:
        raise ValidationError(
            f"query sized for m={query.m}, cube has m={cube.m}"
        )
    a0 = cube.subcube_xor(*query.vectors)
    flips = []
    for d in range(3):
        others = [query.vectors[ax] for ax in range(3) if ax != d]
        slabs = cube.axis_slabs(d, *others)
        flips.append(
            tuple(xor_bytes(a0, slabs[p].tobytes()) for p in range(cube.m))
        )
    return AnswerBundle(a0=a0, flips=tuple(flips))


def reconstruct_plain(
    ans1: AnswerBundle, ans2: AnswerBundle, x: int
) -> bytes:
    """Eight-term reconstruction of entry ``x`` from both unmasked bundles."""
    m = ans1.m
    if ans2.m != m:
        raise ValidationError(f"bundle sizes disagree: m={m} vs m={ans2.m}")
    coords = index_to_coords(x, m)
    acc = xor_bytes(ans1.a0, ans2.a0)
    for d in range(3):
        acc = xor_bytes(acc, ans1.flips[d][coords[d]])
        acc = xor_bytes(acc, ans2.flips[d][coords[d]])
    return acc


def encode_query(query: QueryTriple) -> bytes:
    """Pack the three m-bit vectors into exactly ceil(3m/8) bytes.

    Bit-packed little-endian: dimension 1 occupies bits [0, m), dimension 2
    bits [m, 2m), dimension 3 bits [2m, 3m).
    """
    m = query.m
    acc = query.t1 | (query.t2 << m) | (query.t3 << (2 * m))
    return acc.to_bytes(bytes_for_bits(3 * m), "little")


def decode_query(payload: bytes, m: int) -> QueryTriple:
    """Inverse of :func:`encode_query`; rejects wrong-sized payloads."""
    if len(payload) != bytes_for_bits(3 * m):
        raise ValidationError(
            f"query payload is {len(payload)} bytes, expected "
            f"{bytes_for_bits(3 * m)} for m={m}"
        )
    acc = int.from_bytes(payload, "little")
    mask = (1 << m) - 1
    if acc >> (3 * m):
        raise ValidationError("query payload has bits beyond 3m")
    return QueryTriple(
        t1=acc & mask, t2=(acc >> m) & mask, t3=(acc >> (2 * m)) & mask, m=m
    )
