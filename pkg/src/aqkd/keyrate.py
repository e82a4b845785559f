"""Information accounting: error-correction leakage, Eve's information, secret yield."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

log = logging.getLogger(__name__)


def binary_entropy(p):
    """h2(p) in bits; accepts scalars or arrays, with h2(0) = h2(1) = 0."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probability must lie in [0, 1]")
    inner = (p > 0) & (p < 1)
    q = np.where(inner, p, 0.5)
    h = np.where(inner, -q * np.log2(q) - (1 - q) * np.log2(1 - q), 0.0)
    return float(h) if h.ndim == 0 else h


def eve_information(delta: float, e_eve: float) -> float:
    """Bits Eve holds per key bit: ambiguous bits carry nothing, the rest form a BSC."""
    return (1.0 - delta) * (1.0 - binary_entropy(e_eve))


def secret_fraction(e_bob: float, delta: float, e_eve: float, f_ec: float = 1.16) -> float:
    if f_ec < 1.0:
        raise ValueError("f_ec must be >= 1")
    return max(0.0, 1.0 - f_ec * binary_entropy(e_bob) - eve_information(delta, e_eve))


def takeoka_bound(eta: float) -> float:
    """Upper bound on secret bits per pulse for a pure-loss channel of transmittance ``eta``."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"transmittance must lie in [0, 1), got {eta!r}")
    return math.log2((1.0 + eta) / (1.0 - eta))


def secret_yield(pulses: int, outcome, f_ec: float = 1.16) -> float:
    """Secret bits per transmitted pulse from a distilled key and its measured statistics."""
    n = len(outcome)
    if n == 0:
        log.info("no distilled bits; secret yield is 0")
        return 0.0
    r = secret_fraction(outcome.ber, outcome.eve_ambiguous_fraction, outcome.eve_ber, f_ec)
    return n / pulses * r


def bb84_yield(sift_yield: float, ber: float, eve_unambiguous_fraction: float, eve_ber: float,
               f_ec: float = 1.16) -> float:
    """One-way BB84 secret yield written directly in terms of sifted statistics."""
    info = eve_unambiguous_fraction * (1.0 - binary_entropy(eve_ber))
    return sift_yield * max(0.0, 1.0 - f_ec * binary_entropy(ber) - info)


@dataclass(frozen=True)
class YieldPoint:
    curve: str
    L_km: float
    G: float
    mu: float
    rounds: int
    sift_yield: float
    ber_sift: float
    dist_yield: float
    ber_dist: float
    eve_delta: float
    eve_ber: float
    secret_fraction: float
    secret_yield: float
    takeoka_bound: float

    def as_dict(self) -> dict:
        return asdict(self)
