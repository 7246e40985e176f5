"""Information-flow properties of the masked two-database protocol.

Uses exact symbolic GF(2) elimination (helpers_symbolic / helpers_gf2):
each masked component is a coefficient vector over the database cells and
mask words, so rank and span statements are proofs over the enumerated
patterns, not statistical estimates.
"""

import random

from helpers_gf2 import echelon_basis, gf2_rank, in_span, low_part_span
from helpers_symbolic import (
    mask_word_count,
    masked_view,
    symbolic_database,
    symbolic_mask_material,
)
from qspir.cube import coords_to_index
from qspir.protocol import QueryTriple, UserRandomness, gen_queries


def _all_triples(m):
    side = 1 << m
    for t1 in range(side):
        for t2 in range(side):
            for t3 in range(side):
                yield QueryTriple(t1, t2, t3, m=m)


def _rectangle_vector(q1, q2, m):
    """XOR of all cells in the difference rectangle, as a bit vector."""
    deltas = [
        [p for p in range(m) if (q1.dim(d) ^ q2.dim(d)) >> p & 1]
        for d in range(3)
    ]
    vec = 0
    for i in deltas[0]:
        for j in deltas[1]:
            for k in deltas[2]:
                vec ^= 1 << coords_to_index(i, j, k, m)
    return vec, deltas


def test_single_database_view_exactly_uniform_m2():
    """Each database's 3m+4 components have full mask rank for every
    honest pattern: the single view is one-time-pad uniform."""
    m = 2
    cube = symbolic_database(m)
    material = symbolic_mask_material(m)
    words = mask_word_count(m)
    full = 3 * m + 4
    for q1 in _all_triples(m):
        for x in range(m**3):
            r = UserRandomness(*q1.vectors, m=m)
            _, q2 = gen_queries(x, r, m)
            view1, view2 = masked_view(cube, material, q1, q2)
            for view in (view1, view2):
                mask_part = [v >> m**3 for v in view]
                assert max(mask_part) < 1 << words
                assert gf2_rank(mask_part) == full


def test_joint_view_honest_span_sampled():
    rng = random.Random(41)
    for m in (2, 3):
        cube = symbolic_database(m)
        material = symbolic_mask_material(m)
        for _ in range(40):
            r = UserRandomness(
                *(rng.getrandbits(m) for _ in range(3)), m=m
            )
            x = rng.randrange(m**3)
            q1, q2 = gen_queries(x, r, m)
            view1, view2 = masked_view(cube, material, q1, q2)
            leak = low_part_span(view1 + view2, m**3)
            assert leak == [1 << x]


def test_joint_view_even_difference_spans_nothing():
    rng = random.Random(42)
    m = 3
    cube = symbolic_database(m)
    material = symbolic_mask_material(m)
    checked = 0
    while checked < 30:
        q1 = QueryTriple(*(rng.getrandbits(m) for _ in range(3)), m=m)
        q2 = QueryTriple(*(rng.getrandbits(m) for _ in range(3)), m=m)
        parities = [
            bin(q1.dim(d) ^ q2.dim(d)).count("1") % 2 for d in range(3)
        ]
        if all(parities):
            continue  # want at least one even difference
        view1, view2 = masked_view(cube, material, q1, q2)
        assert low_part_span(view1 + view2, m**3) == []
        checked += 1


def test_joint_view_odd_nonsingleton_leaks_one_rectangle_only():
    """Malicious all-odd differences reveal exactly the rectangle XOR
    (rank <= 1), never individual cells."""
    m = 3
    cube = symbolic_database(m)
    material = symbolic_mask_material(m)
    q1 = QueryTriple(0b000, 0b010, 0b100, m=m)
    q2 = QueryTriple(0b111, 0b011, 0b101, m=m)  # |deltas| = 3, 1, 1
    vec, deltas = _rectangle_vector(q1, q2, m)
    assert [len(d) for d in deltas] == [3, 1, 1]
    view1, view2 = masked_view(cube, material, q1, q2)
    leak = low_part_span(view1 + view2, m**3)
    assert leak == echelon_basis([vec])
    assert bin(vec).count("1") == 3  # three cells, none exposed alone
    assert not in_span(1 << coords_to_index(0, 1, 2, m), leak)


def test_tag_blinds_are_load_bearing():
    """Reverting to blind-less tags (and the matching b derivation)
    reintroduces the extra-entry leak the blinds exist to close."""
    m = 2
    cube = symbolic_database(m)
    material = symbolic_mask_material(m)
    u1_vars = [m**3 + 6 * m + 6 + d for d in range(3)]
    u2_vars = [m**3 + 6 * m + 9 + d for d in range(3)]
    u_clear = 0
    for var in u1_vars + u2_vars:
        u_clear |= 1 << var

    def unblinded_views(q1, q2):
        v1, v2 = masked_view(cube, material, q1, q2)
        v1, v2 = list(v1), list(v2)
        for d in range(3):
            v1[3 * m + 1 + d] &= ~(1 << u1_vars[d])
            v2[3 * m + 1 + d] &= ~(1 << u2_vars[d])
        v2[0] &= ~u_clear  # b reverts to a + sum(t_a) + sum(t_b)
        return v1, v2

    # An honest-shaped pattern for x = 1 whose toggled dimensions have
    # even membership on one side.
    q1 = QueryTriple(1, 1, 1, m=m)
    q2 = QueryTriple(0, 0, 3, m=m)
    v1, v2 = unblinded_views(q1, q2)
    leak = low_part_span(v1 + v2, m**3)
    assert len(leak) >= 2  # more than the single entitled entry
    # The repaired scheme on the same pattern leaks only w_1.
    view1, view2 = masked_view(cube, material, q1, q2)
    assert low_part_span(view1 + view2, m**3) == [1 << 1]


def test_first_query_never_depends_on_index():
    rng = random.Random(43)
    for _ in range(100):
        m = rng.choice([2, 3, 5])
        r = UserRandomness(*(rng.getrandbits(m) for _ in range(3)), m=m)
        queries = {
            gen_queries(x, r, m)[0].vectors for x in range(m**3)
        }
        assert queries == {r.vectors}
