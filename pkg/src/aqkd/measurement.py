"""Bob's passive-basis BB84 receiver and Eve's photon-number-resolving tap.

Detector and basis labels are relative to Alice's preparation: basis 0 is the
basis Alice prepared in, basis 1 the conjugate one; in basis 0, detector 0 is
the one matching Alice's bit. ``bob_detect``/``resolve_event``/``eve_measure``
are literal per-photon implementations; the ``*_batch`` variants are the
vectorized equivalents the session engine uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .photon_stats import PhotonDistribution

PREP, CONJ = 0, 1


@dataclass(frozen=True)
class DetectorSpec:
    """Gated single-photon detectors, one value shared by all four of Bob's."""

    eta_d: float = 0.20
    p_dark: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.eta_d <= 1.0:
            raise ValueError(f"detection efficiency must lie in (0, 1], got {self.eta_d!r}")
        if not 0.0 <= self.p_dark < 1.0:
            raise ValueError(f"dark-count probability must lie in [0, 1), got {self.p_dark!r}")


@dataclass(frozen=True)
class BobOutcome:
    clicks: np.ndarray  # bool, shape (2, 2): [basis, detector]
    detected_photons: int
    undetected_signal: int = 0
    undetected_orth: int = 0


class EveBit(NamedTuple):
    value: int
    ambiguous: bool


class ResolvedEvent(NamedTuple):
    basis: int
    bit: int
    double_click: bool


def bob_detect(n_signal, n_orth, spec: DetectorSpec, p_pol, rng, alice_bit=0, channel_eta=1.0):
    """Route every photon of one pulse through Bob's receiver.

    Each photon survives the channel and is absorbed with probability
    ``channel_eta * spec.eta_d``; photons that are not absorbed are reported
    back as undetected (they are what a passive tap collects).
    """
    p_abs = channel_eta * spec.eta_d
    photons = np.zeros((2, 2), dtype=np.int64)
    detected = 0
    undetected = [0, 0]
    for mode, count in ((0, n_signal), (1, n_orth)):
        for _ in range(int(count)):
            if rng.random() >= p_abs:
                undetected[mode] += 1
                continue
            detected += 1
            if rng.random() < 0.5:
                # preparation basis: signal photon lands on the matching
                # detector unless misrouted, orthogonal photon the reverse
                misrouted = rng.random() < p_pol
                det = mode ^ int(misrouted)
                photons[PREP, det] += 1
            else:
                photons[CONJ, int(rng.random() < 0.5)] += 1
    dark = rng.random((2, 2)) < spec.p_dark
    clicks = (photons > 0) | dark
    # detector index in the preparation basis is Alice's bit for detector 0
    if alice_bit:
        clicks = clicks.copy()
        clicks[PREP] = clicks[PREP, ::-1]
    return BobOutcome(clicks, detected, undetected[0], undetected[1])


def resolve_event(outcome: BobOutcome, rng) -> ResolvedEvent | None:
    clicks = np.asarray(outcome.clicks, dtype=bool)
    fired = clicks.any(axis=1)
    if not fired.any():
        return None
    if fired.all():
        basis = int(rng.random() < 0.5)
    else:
        basis = int(np.argmax(fired))
    pair = clicks[basis]
    if pair.all():
        return ResolvedEvent(basis, int(rng.random() < 0.5), True)
    return ResolvedEvent(basis, int(np.argmax(pair)), False)


def eve_measure(undetected_signal, undetected_orth, rng, alice_bit=0) -> EveBit:
    """Count comparison in the sifted basis. Signal photons vote for Alice's bit."""
    if undetected_signal > undetected_orth:
        return EveBit(int(alice_bit), False)
    if undetected_signal < undetected_orth:
        return EveBit(1 - int(alice_bit), False)
    return EveBit(int(rng.random() < 0.5), True)


def analytic_click_probability(dist_at_detector: PhotonDistribution, spec: DetectorSpec) -> float:
    return 1.0 - (1.0 - spec.p_dark) * dist_at_detector.thin(spec.eta_d).vacuum_probability()


# -- vectorized paths -------------------------------------------------------


def route_batch(k_signal, k_orth, p_pol, rng):
    """Split absorbed photons over Bob's four detectors.

    Returns an ``(m, 4)`` int array with columns
    ``[prep/correct, prep/wrong, conj/0, conj/1]``.
    """
    k_signal = np.asarray(k_signal, dtype=np.int64)
    k_orth = np.asarray(k_orth, dtype=np.int64)
    prep_s = rng.binomial(k_signal, 0.5)
    prep_o = rng.binomial(k_orth, 0.5)
    ok_s = rng.binomial(prep_s, 1.0 - p_pol)
    bad_o = rng.binomial(prep_o, 1.0 - p_pol)
    conj = k_signal - prep_s + k_orth - prep_o
    conj0 = rng.binomial(conj, 0.5)
    out = np.empty((k_signal.size, 4), dtype=np.int64)
    out[:, 0] = ok_s + (prep_o - bad_o)
    out[:, 1] = (prep_s - ok_s) + bad_o
    out[:, 2] = conj0
    out[:, 3] = conj - conj0
    return out


def resolve_batch(clicks, rng):
    """Vectorized :func:`resolve_event` on ``(m, 4)`` relative click flags.

    Returns ``(basis, wrong, double_click, fired)``: basis is -1 where nothing
    fired; ``wrong`` is 1 when the resolved bit differs from Alice's.
    """
    clicks = np.asarray(clicks, dtype=bool)
    m = clicks.shape[0]
    prep_any = clicks[:, 0] | clicks[:, 1]
    conj_any = clicks[:, 2] | clicks[:, 3]
    coin = rng.random((m, 2)) < 0.5
    basis = np.where(prep_any & conj_any, coin[:, 0].astype(np.int64), np.where(prep_any, 0, 1))
    fired = prep_any | conj_any
    basis = np.where(fired, basis, -1)
    lo = np.where(basis == 1, clicks[:, 2], clicks[:, 0])
    hi = np.where(basis == 1, clicks[:, 3], clicks[:, 1])
    double = lo & hi & fired
    wrong = np.where(double, coin[:, 1], hi & ~lo).astype(np.uint8)
    return basis, wrong, double, fired


def eve_measure_batch(u_signal, u_orth, rng):
    """Vectorized :func:`eve_measure`; returns ``(wrong, ambiguous)`` relative to Alice."""
    u_signal = np.asarray(u_signal)
    u_orth = np.asarray(u_orth)
    ambiguous = u_signal == u_orth
    coin = rng.random(u_signal.shape) < 0.5
    wrong = np.where(ambiguous, coin, u_orth > u_signal).astype(np.uint8)
    return wrong, ambiguous


# -- closed-form Bob model ---------------------------------------------------


def _laplace(dist: PhotonDistribution, t: float) -> float:
    """E[exp(-t * I)] for the P-representation intensity of ``dist``."""
    s, n = dist.signal, dist.noise
    return math.exp(-t * s / (1.0 + t * n)) / (1.0 + t * n)


def analytic_sift_statistics(signal: PhotonDistribution, orth: PhotonDistribution,
                             eta: float, spec: DetectorSpec, p_pol: float):
    """Exact per-pulse probabilities ``(P[sift], P[sift and Bob wrong])``.

    ``signal``/``orth`` are the mode laws at Alice's output and ``eta`` the
    channel transmittance; detector efficiency is applied here. Given the
    intensities, each detector sees an independent Poisson photon number, so
    both probabilities are sums of exponentials whose expectations are known
    in closed form.
    """
    t = eta * spec.eta_d
    q = 1.0 - spec.p_dark
    # Poisson rate per unit intensity at each detector: (signal coef, orth coef)
    rates = {
        1: (t * (1 - p_pol) / 2, t * p_pol / 2),   # prep / correct
        2: (t * p_pol / 2, t * (1 - p_pol) / 2),   # prep / wrong
        3: (t / 4, t / 4),                         # conj / 0
        4: (t / 4, t / 4),                         # conj / 1
    }

    def z(*dets):
        a = sum(rates[d][0] for d in dets)
        b = sum(rates[d][1] for d in dets)
        return q ** len(dets) * _laplace(signal, a) * _laplace(orth, b)

    # P(sift | I) = 1/2 (1 - z1 z2)(1 + z3 z4)
    p_sift = 0.5 * (1 + z(3, 4) - z(1, 2) - z(1, 2, 3, 4))
    # P(sift, wrong | I) = 1/4 (1 + z1 - z2 - z1 z2)(1 + z3 z4)
    p_err = 0.25 * (1 + z(1) - z(2) - z(1, 2) + z(3, 4) + z(1, 3, 4) - z(2, 3, 4) - z(1, 2, 3, 4))
    return p_sift, p_err
