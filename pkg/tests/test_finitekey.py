import random

import pytest

from oracles import key_length_oracle
from qspir.errors import RangeError
from qspir.qkd.finitekey import (
    EpsilonBudget,
    binary_entropy,
    finite_key_length,
)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.11) == pytest.approx(0.499916, abs=1e-6)
    assert binary_entropy(0.3) == binary_entropy(0.7)
    with pytest.raises(RangeError):
        binary_entropy(-0.1)


def test_pinned_example():
    eps = EpsilonBudget(
        eps_cor=1e-15, eps_prime=1e-11, eps_hat=1e-11, eps_pa=1e-11
    )
    assert finite_key_length(1000, 100000, 0.02, 20000, eps) == 66583


def test_matches_high_precision_oracle():
    rng = random.Random(51)
    for _ in range(300):
        n0 = rng.uniform(0, 1e6)
        n1 = rng.uniform(0, 1e7)
        e1 = rng.uniform(0, 0.5)
        leak = rng.uniform(0, 5e5)
        eps = [10 ** rng.uniform(-18, -6) for _ in range(4)]
        got = finite_key_length(n0, n1, e1, leak, EpsilonBudget(*eps))
        want = key_length_oracle(n0, n1, e1, leak, *eps)
        assert abs(got - want) <= 1


def test_clamps_to_zero():
    assert finite_key_length(0, 10, 0.49, 1e6) == 0
    assert finite_key_length(0, 0, 0.5, 0) == 0


def test_monotonicity():
    eps = EpsilonBudget()
    base = finite_key_length(500, 40000, 0.05, 9000, eps)
    assert finite_key_length(600, 40000, 0.05, 9000, eps) >= base
    assert finite_key_length(500, 50000, 0.05, 9000, eps) >= base
    assert finite_key_length(500, 40000, 0.06, 9000, eps) <= base
    assert finite_key_length(500, 40000, 0.05, 10000, eps) <= base


def test_argument_validation():
    with pytest.raises(RangeError):
        finite_key_length(-1, 0, 0.1, 0)
    with pytest.raises(RangeError):
        finite_key_length(0, 0, 0.6, 0)
    with pytest.raises(RangeError):
        finite_key_length(0, 0, 0.1, -5)
    with pytest.raises(RangeError):
        EpsilonBudget(eps_cor=1.5)
