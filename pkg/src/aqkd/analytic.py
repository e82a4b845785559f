"""Semi-analytic expected yields, independent of the Monte Carlo engine.

For a fixed pair of mode intensities, Bob's four detectors and Eve's two
photon counters see independent Poisson photon numbers, so the probability
that a pulse sifts with a given (Bob error, Eve outcome) combination factors
into Bob's closed-form click algebra times a Skellam probability for Eve.
Averaging over the P-representation intensity law by Gauss quadrature gives
the per-sifted-bit joint table; sifted bits come from independent pulses, so
distillation rounds act on that table exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite, roots_laguerre
from scipy.stats import skellam

from .keyrate import binary_entropy, secret_fraction
from .measurement import DetectorSpec
from .optical_path import AmplifierSpec, amplified_state

# Eve outcome columns of the joint table
AMBIGUOUS, EVE_RIGHT, EVE_WRONG = 0, 1, 2


def _nodes(s: float, n: float, order: int):
    """Quadrature nodes/weights for (signal intensity, orthogonal intensity)."""
    if n == 0.0:
        return np.array([s]), np.array([0.0]), np.array([1.0])
    x, wx = roots_hermite(order)
    # field quadratures: N(sqrt(s), n/2) each, Hermite weight exp(-x^2)
    re = math.sqrt(s) + math.sqrt(n) * x
    im = math.sqrt(n) * x
    w2 = np.outer(wx, wx) / math.pi
    i_s = (re[:, None] ** 2 + im[None, :] ** 2).ravel()
    w_s = w2.ravel()
    u, wu = roots_laguerre(order)
    i_o = n * u
    I_s = np.repeat(i_s, u.size)
    I_o = np.tile(i_o, i_s.size)
    W = np.repeat(w_s, u.size) * np.tile(wu, i_s.size)
    return I_s, I_o, W


def sifted_joint_table(mu: float, amp: AmplifierSpec, eta: float, detector: DetectorSpec,
                       p_pol: float, order: int = 48):
    """Return ``(p_sift, table)`` where ``table[b, e]`` is the distribution of a sifted bit.

    ``b`` is Bob's error indicator and ``e`` Eve's outcome (ambiguous / right / wrong).
    """
    state = amplified_state(mu, amp)
    I_s, I_o, W = _nodes(state.signal.signal, state.signal.noise, order)
    t = eta * detector.eta_d
    q = 1.0 - detector.p_dark
    a_s = np.array([t * (1 - p_pol) / 2, t * p_pol / 2, t / 4, t / 4])
    a_o = np.array([t * p_pol / 2, t * (1 - p_pol) / 2, t / 4, t / 4])
    z = q * np.exp(-np.outer(I_s, a_s) - np.outer(I_o, a_o))  # no-click prob per detector
    z1, z2, z3, z4 = z.T
    conj = 0.5 * (1 + z3 * z4)
    p_sift = (1 - z1 * z2) * conj
    p_wrong = 0.5 * (1 + z1 - z2 - z1 * z2) * conj
    bob = np.stack([p_sift - p_wrong, p_wrong])

    lam_s = (1 - t) * I_s
    lam_o = (1 - t) * I_o
    if np.all(lam_o == 0):
        tie = np.exp(-lam_s)
        wrong = np.zeros_like(tie)
    else:
        tie = skellam.pmf(0, lam_s, lam_o)
        wrong = skellam.cdf(-1, lam_s, lam_o)
    eve = np.stack([tie, 1 - tie - wrong, wrong])
    joint = np.einsum("bk,ek,k->be", bob, eve, W)
    total = joint.sum()
    return float(total), joint / total


def distill_table(table: np.ndarray):
    """One GAD round on independent sifted bits; returns ``(keep_probability, new_table)``."""
    bob = table.sum(axis=1)
    keep = float((bob**2).sum())
    out = np.zeros_like(table)
    for b in (0, 1):
        first = table[b]
        # second bit of the pair must carry the same Bob error indicator
        second_amb = table[b, AMBIGUOUS]
        second_clear = bob[b] - second_amb
        out[b, AMBIGUOUS] = first[AMBIGUOUS] * bob[b] + (first[EVE_RIGHT] + first[EVE_WRONG]) * second_amb
        out[b, EVE_RIGHT] = first[EVE_RIGHT] * second_clear
        out[b, EVE_WRONG] = first[EVE_WRONG] * second_clear
    return keep, out / keep


@dataclass(frozen=True)
class ExpectedPoint:
    rounds: int
    sift_yield: float
    ber_sift: float
    dist_yield: float
    ber_dist: float
    eve_delta: float
    eve_ber: float
    secret_fraction: float
    secret_yield: float


def table_stats(table):
    ber = float(table[1].sum())
    delta = float(table[:, AMBIGUOUS].sum())
    clear = 1.0 - delta
    e_eve = float(table[:, EVE_WRONG].sum() / clear) if clear > 0 else 0.0
    return ber, delta, e_eve


def expected_points(mu, amp, eta, detector, p_pol, f_ec=1.16, max_rounds=3, order=48):
    """Expected statistics for ``rounds = 0..max_rounds``."""
    p_sift, table = sifted_joint_table(mu, amp, eta, detector, p_pol, order)
    ber0 = float(table[1].sum())
    y = p_sift
    points = []
    for k in range(max_rounds + 1):
        ber, delta, e_eve = table_stats(table)
        r = secret_fraction(min(ber, 0.5), delta, min(e_eve, 1.0), f_ec)
        points.append(ExpectedPoint(k, p_sift, ber0, y, ber, delta, e_eve, r, y * r))
        keep, table = distill_table(table)
        y *= keep / 2
    return points


def expected_best_yield(mu, amp, eta, detector, p_pol, f_ec=1.16, rounds=(0, 1, 2, 3), order=48):
    points = expected_points(mu, amp, eta, detector, p_pol, f_ec, max(rounds), order)
    return max((points[k] for k in rounds), key=lambda p: p.secret_yield)


def bb84_expected_yield(mu, eta, detector, p_pol, f_ec=1.16):
    """Closed form for an unamplified source without distillation."""
    return expected_points(mu, AmplifierSpec(), eta, detector, p_pol, f_ec, 0)[0].secret_yield


__all__ = [
    "sifted_joint_table",
    "distill_table",
    "expected_points",
    "expected_best_yield",
    "bb84_expected_yield",
    "table_stats",
    "ExpectedPoint",
    "binary_entropy",
]
