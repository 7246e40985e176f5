import math
from dataclasses import replace

import pytest

from qspir.qkd.channel import (
    ChannelModel,
    ProtocolParams,
    saturation_ok,
    simulate_tallies,
)
from qspir.qkd.decoy import decoy_bounds
from qspir.qkd.finitekey import EpsilonBudget, binary_entropy, finite_key_length
from qspir.qkd.optimize import (
    SweepPoint,
    evaluate_length,
    export_curve_csv,
    optimize_params,
    sweep_distance,
)


def test_evaluate_length_pinned_and_matches_pipeline():
    ch, params = ChannelModel(), ProtocolParams()
    got = evaluate_length(ch, params)
    assert got == 1_133_926

    tallies = simulate_tallies(ch, params)
    coinc = tallies.coinc[("Z", 0, 0)]
    qber = tallies.errors[("Z", 0, 0)] / coinc
    leak = math.ceil(
        params.ec_efficiency
        * (1.0 - params.pe_fraction)
        * coinc
        * binary_entropy(qber)
    )
    n0, n1, e1 = decoy_bounds(tallies, params)
    eps = EpsilonBudget(
        params.eps_cor, params.eps_prime, params.eps_hat, params.eps_pa
    )
    assert got == finite_key_length(n0, n1, e1, leak, eps)


def test_evaluate_length_zero_cases():
    hot = ProtocolParams(
        intensities=(0.8, 0.25, 0.0),
        z_probs=(0.5, 0.2, 0.05),
        x_probs=(0.1, 0.1, 0.05),
    )
    assert not saturation_ok(ChannelModel(), hot)
    assert evaluate_length(ChannelModel(), hot) == 0
    assert evaluate_length(ChannelModel(distance_km=250.0), ProtocolParams()) == 0


def test_optimize_never_loses_to_start():
    ch = ChannelModel(distance_km=25.0)
    start = ProtocolParams()
    best, l = optimize_params(ch, 5.85e12, start=start)
    assert l >= evaluate_length(ch, replace(start, n_pulses=5.85e12))
    assert l == evaluate_length(ch, best)
    assert saturation_ok(ch, best)
    assert best.n_pulses == 5.85e12


def test_sweep_is_order_independent():
    ch = ChannelModel()
    start = ProtocolParams()
    fwd = sweep_distance(ch, 5.85e12, [25.0, 50.0], start=start)
    rev = sweep_distance(ch, 5.85e12, [50.0, 25.0], start=start)
    assert fwd == rev
    assert [pt.distance_km for pt in fwd] == [25.0, 50.0]
    solo = sweep_distance(ch, 5.85e12, [50.0], start=start)
    assert solo[0] == fwd[1]
    assert all(pt.l > 0 for pt in fwd)


def test_sweep_requires_distances():
    with pytest.raises(ValueError):
        sweep_distance(ChannelModel(), 1e12, [])


def test_export_curve_csv(tmp_path):
    points = [
        SweepPoint(10.0, 123, ProtocolParams()),
        SweepPoint(
            50.0, 7, replace(ProtocolParams(), intensities=(0.45, 0.05, 0.0))
        ),
    ]
    path = tmp_path / "curve.csv"
    export_curve_csv(
        points, {"retrieval-budget": 465600}, path, header_note="capped run"
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "# calibrated-model curve; capped run"
    assert lines[1] == "distance_km,l_bits,mu1,mu2,mu3"
    assert lines[2] == "10,123,0.14,0.05,0"
    assert lines[3] == "50,7,0.45,0.05,0"
    assert lines[4] == "# threshold,retrieval-budget,465600"

    with pytest.raises(ValueError):
        export_curve_csv([], {}, tmp_path / "empty.csv")
