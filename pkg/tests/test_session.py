import math

import numpy as np
import pytest

import aqkd.session as session
from aqkd.analytic import sifted_joint_table
from aqkd.distillation import gad
from aqkd.keyrate import bb84_yield, secret_yield
from aqkd.measurement import DetectorSpec
from aqkd.optical_path import AmplifierSpec, FiberSpec, PolarizationSpec
from aqkd.session import (
    A_TO_B,
    AD_PARITY,
    AD_REJECTION_INDEX,
    AUTH_TAG_A,
    AUTH_TAG_B,
    B_TO_A,
    EC_INFO,
    PA_FUNCTION,
    QUBITS,
    SIFTING_BASES,
    SessionConfig,
    SiftedTriple,
    complete_transcript,
    run_session,
    sift,
    transcript_sizes,
)
from conftest import within_sigma

G16_L100 = dict(mu=1.7, amplifier=AmplifierSpec(16), fiber=FiberSpec(100), detector=DetectorSpec(0.2, 1e-5))


@pytest.fixture(scope="module")
def g16_l100():
    return run_session(SessionConfig(**G16_L100, n_pulses=2_000_000, seed=2024))


def test_lossless_noiseless_bb84_has_no_errors():
    config = SessionConfig(mu=1.5, detector=DetectorSpec(0.2, 0.0), polarization=PolarizationSpec(0.0),
                           n_pulses=10**6, seed=1)
    run = run_session(config)
    assert run.stats.sifted > 10**5
    assert run.stats.bob_errors == 0
    # no orthogonal mode: Eve is never wrong, only ambiguous on ties
    assert run.stats.eve_unambiguous_errors == 0


def test_sift_fraction_is_half():
    run = run_session(SessionConfig(mu=1.7, amplifier=AmplifierSpec(16), fiber=FiberSpec(50),
                                    n_pulses=10**6, seed=4))
    assert within_sigma(run.stats.sift_fraction, 0.5, run.stats.resolved, 3)


def test_g16_l100_ber_band_and_regression(g16_l100):
    stats = g16_l100.stats
    assert 0.15 <= stats.ber <= 0.35
    # frozen regression values for seed 2024, 2e6 pulses
    assert (stats.resolved, stats.sifted, stats.bob_errors) == (212362, 106652, 28638)
    assert (stats.eve_unambiguous, stats.eve_unambiguous_errors) == (105899, 16756)
    out = gad(g16_l100.triple, 2, np.random.default_rng(7))
    assert secret_yield(stats.pulses, out) == pytest.approx(0.0017246291897864625, rel=1e-12)


def test_g16_l100_sift_yield_matches_closed_form(g16_l100):
    p_sift, table = sifted_joint_table(1.7, AmplifierSpec(16), 0.01, DetectorSpec(0.2, 1e-5), 0.01)
    stats = g16_l100.stats
    assert within_sigma(stats.sift_yield, p_sift, stats.pulses, 3)
    assert within_sigma(stats.ber, table[1].sum(), stats.sifted, 3)


def test_alignment(g16_l100):
    t = g16_l100.triple
    n = len(t)
    assert n % 2 == 0
    assert len(t.bob) == len(t.eve_values) == len(t.eve_ambiguous) == len(t.pulse_index) == n
    assert np.all(np.diff(t.pulse_index) > 0)
    assert g16_l100.photon_counts.shape == (n, 4)
    assert (g16_l100.photon_counts >= 0).all()
    assert int((t.alice != t.bob).sum()) == g16_l100.stats.bob_errors


def test_sifted_pulses_carry_photons_or_dark_counts():
    run = run_session(SessionConfig(mu=1.5, fiber=FiberSpec(20), detector=DetectorSpec(0.2, 0.0),
                                    n_pulses=500_000, seed=8))
    assert (run.photon_counts[:, :2].sum(axis=1) > 0).all()


def test_gain_increases_sift_yield_and_ber():
    runs = {}
    for gain in (1.0, 16.0):
        runs[gain] = run_session(SessionConfig(mu=1.5, amplifier=AmplifierSpec(gain), fiber=FiberSpec(100),
                                               n_pulses=4_000_000, seed=6)).stats
    lo, hi = runs[1.0], runs[16.0]
    sd = math.sqrt(lo.sift_yield / lo.pulses + hi.sift_yield / hi.pulses)
    assert hi.sift_yield - lo.sift_yield > -3 * sd
    sd = math.sqrt(lo.ber * (1 - lo.ber) / lo.sifted + hi.ber * (1 - hi.ber) / hi.sifted)
    assert hi.ber - lo.ber > -3 * sd
    assert hi.sift_yield > lo.sift_yield and hi.ber > lo.ber


def test_determinism_across_workers(monkeypatch):
    monkeypatch.setattr(session, "SHARD_SIZE", 1 << 15)
    config = SessionConfig(mu=1.7, amplifier=AmplifierSpec(16), fiber=FiberSpec(30), n_pulses=200_000, seed=11)
    a = run_session(config, workers=1)
    b = run_session(config, workers=3)
    c = run_session(config, workers=1)
    for other in (b, c):
        for field in ("alice", "bob", "eve_values", "eve_ambiguous", "pulse_index"):
            assert np.array_equal(getattr(a.triple, field), getattr(other.triple, field))
        assert a.stats == other.stats


def test_seed_changes_output():
    base = SessionConfig(mu=1.5, fiber=FiberSpec(10), n_pulses=100_000, seed=1)
    a = run_session(base)
    b = run_session(SessionConfig(mu=1.5, fiber=FiberSpec(10), n_pulses=100_000, seed=2))
    assert not np.array_equal(a.triple.pulse_index, b.triple.pulse_index)


def test_transcript_skeleton(g16_l100):
    kinds = [(m.direction, m.kind) for m in g16_l100.transcript]
    assert kinds == [(A_TO_B, QUBITS), (B_TO_A, SIFTING_BASES), (A_TO_B, SIFTING_BASES)]


def test_complete_transcript_order(g16_l100):
    out = gad(g16_l100.triple, 2, np.random.default_rng(0))
    messages = complete_transcript(g16_l100, out, 1.16)
    kinds = [m.kind for m in messages[3:]]
    assert kinds == [AD_PARITY, AD_REJECTION_INDEX] * 2 + [EC_INFO, PA_FUNCTION, AUTH_TAG_A, AUTH_TAG_B]
    assert messages[3].payload_bits == len(g16_l100.triple) // 2
    assert messages[3].direction == A_TO_B and messages[4].direction == B_TO_A
    width = math.ceil(math.log2(len(g16_l100.triple) // 2))
    assert messages[4].payload_bits == out.rejections[0].size * width


def test_transcript_sizes_examples():
    sizes = transcript_sizes(4, [])
    assert (sizes[AD_PARITY], sizes[AD_REJECTION_INDEX]) == (2, 0)
    sizes = transcript_sizes(4, [1])
    assert (sizes[AD_PARITY], sizes[AD_REJECTION_INDEX]) == (2, 1)
    assert transcript_sizes(2000, [], 1000, 0.05, 1.16)[EC_INFO] == 333
    with pytest.raises(ValueError):
        transcript_sizes(5, [])


def test_sift_examples():
    empty = sift([0, 1, 0], [1, 1, 0], [-1, -1, -1], [0, 0, 0])
    assert len(empty) == 0
    matched = sift([0, 1, 0, 1, 1], [1, 1, 0, 0, 1], [0, 1, 0, 1, 1], [1, 0, 0, 0, 1])
    assert len(matched) == 4
    assert list(matched.pulse_index) == [0, 1, 2, 3]
    assert list(matched.bob) == [1, 0, 0, 0]
    assert matched.eve_ambiguous.all()


def test_sift_keep_fraction():
    rng = np.random.default_rng(2)
    m = 10**6
    a_basis = rng.integers(0, 2, m)
    b_basis = rng.integers(0, 2, m)
    bits_ = rng.integers(0, 2, m)
    t = sift(a_basis, bits_, b_basis, bits_)
    assert within_sigma(len(t) / m, 0.5, m, 3)


def test_unity_gain_pipeline_equals_bb84_formula():
    run = run_session(SessionConfig(mu=1.5, fiber=FiberSpec(50), n_pulses=10**6, seed=12))
    out = gad(run.triple, 0)
    s = run.stats
    assert secret_yield(s.pulses, out) == pytest.approx(
        bb84_yield(s.sift_yield, s.ber, s.eve_unambiguous_fraction, s.eve_ber), rel=1e-12)


@pytest.mark.parametrize("kwargs", [dict(mu=-1), dict(n_pulses=0), dict(gad_rounds=-1), dict(f_ec=0.9),
                                    dict(seed=-1), dict(n_pulses=1.5)])
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ValueError):
        SessionConfig(**kwargs)


def test_triple_length_mismatch():
    with pytest.raises(ValueError):
        SiftedTriple(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2))


def test_no_sifted_bits_is_not_fatal():
    run = run_session(SessionConfig(mu=0.0, detector=DetectorSpec(0.2, 0.0), n_pulses=1000))
    assert run.stats.sifted == 0 and run.stats.ber == 0.0
