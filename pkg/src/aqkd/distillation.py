"""Generalized advantage distillation (GAD) on sifted bit strings.

Keys are ``uint8`` numpy arrays of 0/1 values. Each round pairs positions
``(2i, 2i+1)``, compares pair parities, and keeps the even-position bit of
every pair whose parities agree. Eve keeps her own even-position bit and can
only call it unambiguous when both bits of her pair were.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RoundStats",
    "DistillationOutcome",
    "parity_sequence",
    "even_subsequence",
    "distill_pair",
    "distill_eve",
    "gad",
    "expected_distilled_ber",
]


def _bits(key) -> np.ndarray:
    return np.asarray(key, dtype=np.uint8)


def _require_even(key: np.ndarray) -> None:
    if key.size % 2:
        raise ValueError(f"key length must be even, got {key.size}")


def parity_sequence(key) -> np.ndarray:
    """``p_i = x[2i+1] ^ x[2i]``."""
    key = _bits(key)
    _require_even(key)
    return key[1::2] ^ key[0::2]


def even_subsequence(key) -> np.ndarray:
    key = _bits(key)
    _require_even(key)
    return key[0::2].copy()


def distill_pair(alice, bob):
    """One parity-exchange round between Alice and Bob.

    Returns ``(d_a, d_b, rejected)`` where ``rejected`` holds the sorted pair
    indices whose parities disagree.
    """
    alice, bob = _bits(alice), _bits(bob)
    if alice.size != bob.size:
        raise ValueError("Alice's and Bob's keys differ in length")
    p_a = parity_sequence(alice)
    p_b = parity_sequence(bob)
    agree = p_a == p_b
    rejected = np.flatnonzero(~agree)
    return even_subsequence(alice)[agree], even_subsequence(bob)[agree], rejected


def distill_eve(eve_values, eve_ambiguous, rejected, rng=None):
    """Eve's view of a round: keep ``e[2i]`` for accepted pairs.

    A kept bit stays unambiguous only if both bits of its pair were; ambiguous
    bits are redrawn uniformly (``rng`` required when any exist).
    """
    values = _bits(eve_values)
    amb = np.asarray(eve_ambiguous, dtype=bool)
    if values.size != amb.size:
        raise ValueError("Eve's values and ambiguity flags differ in length")
    _require_even(values)
    half = values.size // 2
    rejected = np.asarray(rejected, dtype=np.int64)
    if rejected.size and (rejected.min() < 0 or rejected.max() >= half):
        raise ValueError("rejection index out of range for Eve's key")
    keep = np.ones(half, dtype=bool)
    keep[rejected] = False
    out_amb = (amb[0::2] | amb[1::2])[keep]
    out = values[0::2][keep].copy()
    if out_amb.any():
        if rng is None:
            raise ValueError("a random generator is needed to redraw ambiguous bits")
        out[out_amb] = rng.integers(0, 2, int(out_amb.sum()), dtype=np.uint8)
    return out, out_amb


def expected_distilled_ber(e: float) -> float:
    """Bob's error rate after one round on a binary symmetric channel with error ``e``."""
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"error rate must lie in [0, 0.5], got {e!r}")
    if e == 0.0:
        return 0.0
    return e * e / (e * e + (1.0 - e) ** 2)


@dataclass(frozen=True)
class RoundStats:
    input_length: int
    rejected: int
    output_length: int
    ber_before: float
    ber_after: float
    eve_ambiguous_before: float
    eve_ambiguous_after: float

    @property
    def kept_fraction(self) -> float:
        half = self.input_length // 2
        return self.output_length / half if half else 0.0


@dataclass
class DistillationOutcome:
    d_a: np.ndarray
    d_b: np.ndarray
    d_e: np.ndarray
    d_e_ambiguous: np.ndarray
    rejections: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    @property
    def rejected(self) -> np.ndarray:
        """Rejection index of the last round (empty for zero rounds)."""
        return self.rejections[-1] if self.rejections else np.empty(0, dtype=np.int64)

    def __len__(self):
        return len(self.d_a)

    @property
    def ber(self) -> float:
        return float(np.mean(self.d_a != self.d_b)) if len(self) else 0.0

    @property
    def eve_ambiguous_fraction(self) -> float:
        return float(np.mean(self.d_e_ambiguous)) if len(self) else 1.0

    @property
    def eve_ber(self) -> float:
        unamb = ~self.d_e_ambiguous
        if not unamb.any():
            return 0.0
        return float(np.mean(self.d_e[unamb] != self.d_a[unamb]))


def _ber(x, y) -> float:
    return float(np.mean(x != y)) if len(x) else 0.0


def _amb(flags) -> float:
    return float(np.mean(flags)) if len(flags) else 1.0


def gad(triple, rounds: int, rng=None) -> DistillationOutcome:
    """Run ``rounds`` GAD rounds on a sifted triple (``rounds=0`` passes it through)."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    a, b = _bits(triple.alice), _bits(triple.bob)
    e, amb = _bits(triple.eve_values), np.asarray(triple.eve_ambiguous, dtype=bool)
    if rng is None:
        rng = np.random.default_rng()
    outcome = DistillationOutcome(a, b, e, amb)
    for _ in range(rounds):
        n = a.size & ~1
        a, b, e, amb = a[:n], b[:n], e[:n], amb[:n]
        ber_before, amb_before = _ber(a, b), _amb(amb)
        d_a, d_b, rejected = distill_pair(a, b)
        d_e, d_amb = distill_eve(e, amb, rejected, rng)
        outcome.rejections.append(rejected)
        outcome.rounds.append(RoundStats(n, rejected.size, d_a.size, ber_before, _ber(d_a, d_b),
                                         amb_before, _amb(d_amb)))
        a, b, e, amb = d_a, d_b, d_e, d_amb
    outcome.d_a, outcome.d_b, outcome.d_e, outcome.d_e_ambiguous = a, b, e, amb
    return outcome
