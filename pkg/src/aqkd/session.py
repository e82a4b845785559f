"""Full AQKD session: pulse generation, transmission, detection, sifting, tap.

Pulses are simulated in fixed-size shards. Shard ``i`` draws from its own
stream ``SeedSequence(seed, spawn_key=(i,))`` and shard outputs are
concatenated in order, so results do not depend on the worker count.

Within a shard each pulse is handled in the P-representation: given the
instantaneous intensities of the two polarization modes, the photons Bob
absorbs and the photons left for Eve are independent Poisson numbers. At long
range almost every pulse is empty, so when the detection probability is small
the engine only materializes pulses that carry a detector event (photon or
dark count) and draws their intensities from the correspondingly tilted law.
Both paths are exact in distribution.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .keyrate import binary_entropy
from .measurement import DetectorSpec, _laplace, eve_measure_batch, resolve_batch, route_batch
from .optical_path import (
    AmplifierSpec,
    FiberSpec,
    FilterSpec,
    PolarizationSpec,
    amplified_state,
    transmittance,
)

log = logging.getLogger(__name__)

SHARD_SIZE = 1 << 22

QUBITS = "Qubits"
SIFTING_BASES = "SiftingBases"
AD_PARITY = "ADParity"
AD_REJECTION_INDEX = "ADRejectionIndex"
EC_INFO = "ECInfo"
PA_FUNCTION = "PAFunction"
AUTH_TAG_A = "AuthTagA"
AUTH_TAG_B = "AuthTagB"

A_TO_B = "A->B"
B_TO_A = "B->A"

# placeholder payload sizes (bits) for messages that are accounting only
PA_FUNCTION_BITS = 256
AUTH_TAG_BITS = 128


@dataclass(frozen=True)
class SessionConfig:
    mu: float = 1.5
    amplifier: AmplifierSpec = field(default_factory=AmplifierSpec)
    fiber: FiberSpec = field(default_factory=FiberSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    polarization: PolarizationSpec = field(default_factory=PolarizationSpec)
    filter: FilterSpec = field(default_factory=FilterSpec)
    n_pulses: int = 10_000_000
    gad_rounds: int = 0
    f_ec: float = 1.16
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu!r}")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be a positive integer, got {self.n_pulses!r}")
        if int(self.gad_rounds) != self.gad_rounds or self.gad_rounds < 0:
            raise ValueError(f"gad_rounds must be a non-negative integer, got {self.gad_rounds!r}")
        if not self.f_ec >= 1.0:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def channel_transmittance(self) -> float:
        return transmittance(self.fiber)


@dataclass(frozen=True)
class TranscriptMessage:
    direction: str
    kind: str
    payload_bits: int


@dataclass
class SiftedTriple:
    alice: np.ndarray
    bob: np.ndarray
    eve_values: np.ndarray
    eve_ambiguous: np.ndarray
    pulse_index: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.alice)
        lengths = {len(self.bob), len(self.eve_values), len(self.eve_ambiguous)}
        if lengths != {n}:
            raise ValueError("sifted keys must have identical lengths")
        if self.pulse_index is not None and len(self.pulse_index) != n:
            raise ValueError("pulse index must align with the keys")

    def __len__(self):
        return len(self.alice)


@dataclass
class SessionStats:
    pulses: int
    resolved: int
    sifted: int
    double_clicks: int
    bob_errors: int
    eve_unambiguous: int
    eve_unambiguous_errors: int
    distillation: list = field(default_factory=list)

    @property
    def sift_yield(self) -> float:
        return self.sifted / self.pulses

    @property
    def ber(self) -> float:
        return self.bob_errors / self.sifted if self.sifted else 0.0

    @property
    def sift_fraction(self) -> float:
        return self.sifted / self.resolved if self.resolved else 0.0

    @property
    def double_click_fraction(self) -> float:
        return self.double_clicks / self.sifted if self.sifted else 0.0

    @property
    def eve_unambiguous_fraction(self) -> float:
        return self.eve_unambiguous / self.sifted if self.sifted else 0.0

    @property
    def eve_ber(self) -> float:
        return self.eve_unambiguous_errors / self.eve_unambiguous if self.eve_unambiguous else 0.0


@dataclass
class SessionResult:
    triple: SiftedTriple
    stats: SessionStats
    transcript: list
    photon_counts: np.ndarray  # (N, 4): absorbed signal/orth, undetected signal/orth


# -- shard engine ------------------------------------------------------------


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(shard,))))


def _zero_truncated_poisson(lam, rng):
    # first arrival of a rate-lam process conditioned to fall in [0, 1)
    u = rng.random(lam.shape)
    t1 = -np.log1p(-u * -np.expm1(-lam)) / lam
    return 1 + rng.poisson(lam * (1.0 - t1))


def _intensity(s, n, rng, size):
    if n == 0.0:
        return np.full(size, s)
    z = rng.standard_normal((2, size)) * math.sqrt(n / 2.0)
    return (math.sqrt(s) + z[0]) ** 2 + z[1] ** 2


def _size_biased_intensity(s, n, rng, size):
    # I ~ Gamma(1 + J, n) with J ~ Poisson(s/n); size-biasing shifts the
    # shape by one and tilts J towards J + 1 with probability s/(s + n)
    j = rng.poisson(s / n, size) + (rng.random(size) < s / (s + n))
    return rng.gamma(2.0 + j, n)


def _detecting_intensities(s, n_s, n_o, t, rng, size):
    """Intensities conditioned on at least one photon being absorbed.

    Rejection from the proposal proportional to ``I * p(I)``; the acceptance
    ratio ``(1 - exp(-t I)) / (t I)`` is close to one when ``t * I`` is small.
    """
    if n_s == 0.0:
        return np.full(size, s), np.zeros(size)
    mean_s, mean_o = s + n_s, n_o
    out_s = np.empty(size)
    out_o = np.empty(size)
    filled = 0
    while filled < size:
        m = max(size - filled, 16)
        bias_signal = rng.random(m) < mean_s / (mean_s + mean_o)
        i_s = np.where(bias_signal, _size_biased_intensity(s, n_s, rng, m), _intensity(s, n_s, rng, m))
        i_o = np.where(bias_signal, rng.exponential(n_o, m), rng.gamma(2.0, n_o, m))
        ti = t * (i_s + i_o)
        keep = rng.random(m) * ti < -np.expm1(-ti)
        take = min(int(keep.sum()), size - filled)
        out_s[filled:filled + take] = i_s[keep][:take]
        out_o[filled:filled + take] = i_o[keep][:take]
        filled += take
    return out_s, out_o


def _dark_only_intensities(s, n_s, n_o, t, size, rng):
    # intensity law tilted by exp(-t I): the pulse delivered no photon
    if n_s == 0.0:
        return np.full(size, s), np.zeros(size)
    shrink = 1.0 + t * n_s
    i_s = _intensity(s / shrink**2, n_s / shrink, rng, size)
    i_o = rng.exponential(n_o / (1.0 + t * n_o), size)
    return i_s, i_o


def simulate_shard(config: SessionConfig, shard: int, start: int, size: int) -> dict:
    """Simulate pulses ``start .. start + size - 1``; returns arrays for resolved events."""
    rng = _shard_rng(config.seed, shard)
    state = amplified_state(config.mu, config.amplifier)
    s, n_s, n_o = state.signal.signal, state.signal.noise, state.orth.noise
    t = config.channel_transmittance * config.detector.eta_d
    p_dark = config.detector.p_dark
    p_pol = config.polarization.p_pol

    p_active = 1.0 - _laplace(state.signal, t) * _laplace(state.orth, t)
    mean_absorbed = t * state.mean
    sparse = mean_absorbed > 0 and p_active >= 0.5 * mean_absorbed and p_active < 0.05

    if sparse:
        k = rng.binomial(size, p_active)
        photon_idx = np.sort(rng.choice(size, k, replace=False)) if k else np.empty(0, np.int64)
        n_dark = rng.binomial(4 * size, p_dark) if p_dark > 0 else 0
        slots = rng.choice(4 * size, n_dark, replace=False) if n_dark else np.empty(0, np.int64)
        dark_pulse, dark_det = np.divmod(slots, 4)
        idx = np.union1d(photon_idx, dark_pulse)
        m = idx.size
        has_photon = np.isin(idx, photon_idx, assume_unique=True)
        i_s = np.empty(m)
        i_o = np.empty(m)
        i_s[has_photon], i_o[has_photon] = _detecting_intensities(s, n_s, n_o, t, rng, int(has_photon.sum()))
        n_quiet = m - int(has_photon.sum())
        i_s[~has_photon], i_o[~has_photon] = _dark_only_intensities(s, n_s, n_o, t, n_quiet, rng)
        k_tot = np.zeros(m, dtype=np.int64)
        i_tot = i_s[has_photon] + i_o[has_photon]
        k_tot[has_photon] = _zero_truncated_poisson(t * i_tot, rng)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac_s = np.where(i_s + i_o > 0, i_s / (i_s + i_o), 1.0)
        k_s = rng.binomial(k_tot, frac_s)
        k_o = k_tot - k_s
        dark = np.zeros((m, 4), dtype=bool)
        dark[np.searchsorted(idx, dark_pulse), dark_det] = True
    else:
        idx = np.arange(size)
        i_s = _intensity(s, n_s, rng, size)
        i_o = rng.exponential(n_o, size) if n_o > 0 else np.zeros(size)
        k_s = rng.poisson(t * i_s)
        k_o = rng.poisson(t * i_o)
        dark = rng.random((size, 4)) < p_dark
        live = (k_s + k_o > 0) | dark.any(axis=1)
        idx, i_s, i_o, k_s, k_o, dark = idx[live], i_s[live], i_o[live], k_s[live], k_o[live], dark[live]

    u_s = rng.poisson((1.0 - t) * i_s)
    u_o = rng.poisson((1.0 - t) * i_o)
    clicks = (route_batch(k_s, k_o, p_pol, rng) > 0) | dark
    basis, bob_wrong, double, fired = resolve_batch(clicks, rng)
    alice_bit = rng.integers(0, 2, idx.size, dtype=np.uint8)
    alice_basis = rng.integers(0, 2, idx.size, dtype=np.uint8)
    eve_wrong, eve_amb = eve_measure_batch(u_s, u_o, rng)

    resolved = int(fired.sum())
    sift = basis == 0
    return {
        "pulse_index": idx[sift] + start,
        "alice": alice_bit[sift],
        "alice_basis": alice_basis[sift],
        "bob_wrong": bob_wrong[sift],
        "eve_wrong": eve_wrong[sift],
        "eve_ambiguous": eve_amb[sift],
        "double": double[sift],
        "counts": np.stack([k_s, k_o, u_s, u_o], axis=1)[sift],
        "resolved": resolved,
    }


def _run_shard(args):
    return simulate_shard(*args)


def _shards(config: SessionConfig):
    n = int(config.n_pulses)
    return [(config, i, start, min(SHARD_SIZE, n - start)) for i, start in enumerate(range(0, n, SHARD_SIZE))]


def run_session(config: SessionConfig, workers: int = 1) -> SessionResult:
    """Simulate a session up to (and including) sifting and the passive tap."""
    jobs = _shards(config)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_shard, jobs))
    else:
        parts = [_run_shard(job) for job in jobs]

    cat = {key: np.concatenate([p[key] for p in parts]) for key in parts[0] if key != "resolved"}
    resolved = sum(p["resolved"] for p in parts)
    n = len(cat["alice"]) & ~1
    cat = {key: value[:n] for key, value in cat.items()}
    alice = cat["alice"]
    triple = SiftedTriple(
        alice=alice,
        bob=alice ^ cat["bob_wrong"],
        eve_values=alice ^ cat["eve_wrong"],
        eve_ambiguous=cat["eve_ambiguous"].astype(bool),
        pulse_index=cat["pulse_index"],
    )
    unamb = ~triple.eve_ambiguous
    stats = SessionStats(
        pulses=int(config.n_pulses),
        resolved=resolved,
        sifted=n,
        double_clicks=int(cat["double"].sum()),
        bob_errors=int(cat["bob_wrong"].sum()),
        eve_unambiguous=int(unamb.sum()),
        eve_unambiguous_errors=int(cat["eve_wrong"][unamb].sum()),
    )
    if n == 0:
        log.warning("session produced no sifted bits (L=%.1f km, %d pulses)", config.fiber.length_km, config.n_pulses)
    transcript = [
        TranscriptMessage(A_TO_B, QUBITS, 0),
        TranscriptMessage(B_TO_A, SIFTING_BASES, resolved),
        TranscriptMessage(A_TO_B, SIFTING_BASES, resolved),
    ]
    return SessionResult(triple, stats, transcript, cat["counts"])


def sift(alice_basis, alice_bits, bob_basis, bob_bits, eve_values=None, eve_ambiguous=None) -> SiftedTriple:
    """Keep the events where Bob resolved a basis equal to Alice's.

    ``bob_basis`` is -1 for pulses without a resolved event. Eve's arrays
    default to fully ambiguous zeros (the pre-tap view).
    """
    alice_basis = np.asarray(alice_basis)
    keep = np.flatnonzero(np.asarray(bob_basis) == alice_basis)
    keep = keep[: keep.size & ~1]
    alice = np.asarray(alice_bits, dtype=np.uint8)[keep]
    bob = np.asarray(bob_bits, dtype=np.uint8)[keep]
    if eve_values is None:
        eve = np.zeros_like(alice)
        amb = np.ones(alice.size, dtype=bool)
    else:
        eve = np.asarray(eve_values, dtype=np.uint8)[keep]
        amb = np.asarray(eve_ambiguous, dtype=bool)[keep]
    return SiftedTriple(alice, bob, eve, amb, pulse_index=keep)


def ec_leakage_bits(length: int, ber: float, f_ec: float) -> int:
    return math.ceil(f_ec * binary_entropy(ber) * length)


def transcript_sizes(n_sifted: int, rejected, distilled_length: int = 0, distilled_ber: float = 0.0,
                     f_ec: float = 1.16) -> dict:
    """Payload sizes (bits) of the post-sifting messages for one distillation round.

    Rejected pair indices are sent at fixed width ``ceil(log2(N/2))``.
    """
    if n_sifted % 2:
        raise ValueError("sifted length must be even")
    half = n_sifted // 2
    width = math.ceil(math.log2(half)) if half > 0 else 0
    return {
        AD_PARITY: half,
        AD_REJECTION_INDEX: len(rejected) * width,
        EC_INFO: ec_leakage_bits(distilled_length, distilled_ber, f_ec),
        PA_FUNCTION: PA_FUNCTION_BITS,
        AUTH_TAG_A: AUTH_TAG_BITS,
        AUTH_TAG_B: AUTH_TAG_BITS,
    }


def complete_transcript(session: SessionResult, outcome, f_ec: float) -> list:
    """Append distillation, EC, PA and authentication messages in protocol order.

    Advantage distillation follows the textual order: Alice sends her parity
    sequence, Bob answers with the rejection index.
    """
    messages = list(session.transcript)
    for rnd, rejected in zip(outcome.rounds, outcome.rejections):
        sizes = transcript_sizes(rnd.input_length, rejected)
        messages.append(TranscriptMessage(A_TO_B, AD_PARITY, sizes[AD_PARITY]))
        messages.append(TranscriptMessage(B_TO_A, AD_REJECTION_INDEX, sizes[AD_REJECTION_INDEX]))
    messages.append(TranscriptMessage(A_TO_B, EC_INFO, ec_leakage_bits(len(outcome.d_a), outcome.ber, f_ec)))
    messages.append(TranscriptMessage(A_TO_B, PA_FUNCTION, PA_FUNCTION_BITS))
    messages.append(TranscriptMessage(A_TO_B, AUTH_TAG_A, AUTH_TAG_BITS))
    messages.append(TranscriptMessage(B_TO_A, AUTH_TAG_B, AUTH_TAG_BITS))
    return messages
