"""Three-intensity decoy-state bounds with finite-sample corrections.

Notation: intensities (s, v, w) = (mu1, mu2, mu3), s > v > w >= 0.  For a
basis's observed gain grid Q(a,b), the exponentially scaled rates

    D(a,b) = e^(a+b) Q(a,b) = sum_{j,k} a^j b^k / (j! k!) Y_jk

are linear in the pair yields Y_jk with positive coefficients.

Single-photon pairs.  The rectangle combination anchored at the weakest
intensity,

    G(a) = D(a,a) - D(a,w) - D(w,a) + D(w,w)
         = sum_{j,k >= 1} (a^j - w^j)(a^k - w^k) / (j! k!) Y_jk,

cancels every yield with a vacuum component on either side, which is what
makes it usable in the X basis where single-sided pulses alone produce
substantial accidental coincidences.  The coefficient ratio
(v^j - w^j)/(s^j - w^j) is decreasing in j, so every (j,k) != (1,1) term of
G(v) is dominated by kappa times the matching term of G(s), where

    kappa = (v - w)(v^2 - w^2) / ((s - w)(s^2 - w^2)),

giving the pair-yield estimate

    Y_11 >= [G(v) - kappa G(s)] / [(v - w)^2 - kappa (s - w)^2],

with the denominator equal to (v-w)^2 (s-v)/(s+w) > 0.  The same rectangle
on the scaled error grid dominates the single-photon error sum:
T(v,v) - T(v,w) - T(w,v) + T(w,w) >= (v-w)^2 (eY)_11, hence

    e_11 <= rect_T(v) / ((v-w)^2 Y_11).

Vacuum events.  Along one axis with the other party pinned at the signal
intensity, the scaled rates obey the one-dimensional vacuum inequality
Y_0 >= (v D[w] - w D[v]) / (v - w), applied to the signal row and signal
column to bound the either-side-vacuum contribution R + C - Y_00.

Finite-sample corrections.  The inequalities above are evaluated on the
observed rates; the resulting expected counts inside the kept Z-signal key
block are then bracketed by Hoeffding deviations at the allocated epsilon,
split equally over the three derived quantities:

    n0 >= n0_est - sqrt(n_kept ln(1/eps) / 2)
    n1 >= n1_est - sqrt(n_kept ln(1/eps) / 2)
    e1 <= e1_est + sqrt(ln(1/eps) / (2 n1))

(the count deviations are Hoeffding bounds for a sum of n_kept indicator
variables; the e1 term is the random-sampling correction relating the
X-basis estimate to the key block).  Bounds are clamped to [0, observed
counts] and e1 to [0, 1/2].
"""

from __future__ import annotations

import math

from .channel import ProtocolParams, TallySet

N_DEVIATIONS = 3


def _hoeffding_count(n: float, eps: float) -> float:
    """Deviation bound for a sum of n indicator variables at level eps."""
    if n <= 0.0:
        return 0.0
    return math.sqrt(n * math.log(1.0 / eps) / 2.0)


def _scaled_grid(
    tallies: TallySet, basis: str, kind: str
) -> dict[tuple[int, int], float]:
    """Point rates D(a,b) = e^(a+b) * (count/sent)."""
    mus = tallies.intensities
    counts = tallies.coinc if kind == "gain" else tallies.errors
    grid = {}
    for j in range(3):
        for k in range(3):
            sent = tallies.sent[(basis, j, k)]
            rate = counts[(basis, j, k)] / sent if sent > 0 else 0.0
            grid[(j, k)] = rate * math.exp(mus[j] + mus[k])
    return grid


def _rect(grid: dict[tuple[int, int], float], a: int) -> float:
    """D(a,a) - D(a,w) - D(w,a) + D(w,w) with w = index 2."""
    return grid[(a, a)] - grid[(a, 2)] - grid[(2, a)] + grid[(2, 2)]


def _y11_estimate(grid: dict[tuple[int, int], float], mus) -> float:
    """Single-photon-pair yield lower estimate from the rectangles."""
    s, v, w = mus
    kappa = ((v - w) * (v * v - w * w)) / ((s - w) * (s * s - w * w))
    den = (v - w) ** 2 - kappa * (s - w) ** 2
    return max(0.0, (_rect(grid, 1) - kappa * _rect(grid, 0)) / den)


def _y0_lower(d: dict[int, float], v: float, w: float) -> float:
    return max(0.0, (v * d[2] - w * d[1]) / (v - w))


def _vacuum_gain_estimate(grid: dict[tuple[int, int], float], mus) -> float:
    """Lower estimate of e^(2s)*(either-party-vacuum coincidence rate).

    In scaled units the target is R + C - Y00 with
    R = sum_k s^k/k! Y_0k, C = sum_j s^j/j! Y_j0.
    """
    s, v, w = mus
    col = {j: grid[(j, 0)] for j in range(3)}  # Bob pinned at signal
    row = {k: grid[(0, k)] for k in range(3)}  # Alice pinned at signal
    r_lo = _y0_lower(row, v, w)
    c_lo = _y0_lower(col, v, w)
    y00_hi = grid[(2, 2)]  # D(w,w) dominates Y00: positive coefficients
    return max(0.0, r_lo + c_lo - y00_hi)


def decoy_bounds(
    tallies: TallySet, params: ProtocolParams
) -> tuple[float, float, float]:
    """(n0_lower, n1_lower, e1_upper) for the kept Z-signal key set.

    Counts are scaled to the post-parameter-estimation kept fraction and
    clamped to the observed kept coincidence count.  Degenerate statistics
    produce (0, 0, 0.5) rather than an exception.
    """
    mus = params.intensities
    s, v, w = mus
    eps_each = params.eps_pe / N_DEVIATIONS
    z_gain = _scaled_grid(tallies, "Z", "gain")
    x_gain = _scaled_grid(tallies, "X", "gain")
    x_err = _scaled_grid(tallies, "X", "error")

    kept = 1.0 - params.pe_fraction
    sent_key = tallies.sent[("Z", 0, 0)]
    n_kept = kept * tallies.coinc[("Z", 0, 0)]

    # Vacuum events: the signal-signal setting emits a vacuum on either
    # side with scaled weight e^(-2s) per the rectangle normalisation.
    g0 = _vacuum_gain_estimate(z_gain, mus)
    n0_est = kept * sent_key * math.exp(-2 * s) * g0
    n0 = min(max(0.0, n0_est - _hoeffding_count(n_kept, eps_each)), n_kept)

    # Single-photon pairs in the Z key set.
    y11_z = _y11_estimate(z_gain, mus)
    p1 = s * math.exp(-s)
    n1_est = kept * sent_key * p1 * p1 * y11_z
    n1 = min(
        max(0.0, n1_est - _hoeffding_count(n_kept, eps_each)),
        max(0.0, n_kept - n0),
    )

    # Phase error of those pairs, estimated in the X basis.
    y11_x = _y11_estimate(x_gain, mus)
    core = _rect(x_err, 1)
    if y11_x <= 0.0 or n1 <= 0.0:
        return n0, 0.0, 0.5
    e1 = core / ((v - w) ** 2 * y11_x)
    e1 += math.sqrt(math.log(1.0 / eps_each) / (2.0 * n1))
    e1 = min(max(e1, 0.0), 0.5)
    return n0, n1, e1
