"""Fast invariant checks behind ``aqkd selftest``; one PASS/FAIL line per check."""

from __future__ import annotations

import itertools
import math
import sys

import numpy as np
from scipy import stats

from .analytic import sifted_joint_table
from .distillation import expected_distilled_ber, gad
from .measurement import DetectorSpec
from .optical_path import AmplifierSpec, FiberSpec
from .photon_stats import BoseEinstein, LaguerreGauss, Poisson, cutoff
from .session import SessionConfig, SiftedTriple, run_session


def _normalization():
    for d in (Poisson(1.5), BoseEinstein(15), LaguerreGauss(27.2, 15), LaguerreGauss(0.272, 0.15)):
        if d.pmf_table().sum() < 1 - 1e-9:
            return False
    return True


def _reductions():
    n = np.arange(80)
    a = np.max(np.abs(LaguerreGauss(0, 3.0).pmf(n) - BoseEinstein(3.0).pmf(n)))
    b = np.max(np.abs(LaguerreGauss(2.5, 0).pmf(n) - Poisson(2.5).pmf(n)))
    return max(a, b) < 1e-12


def _sampler_vs_pmf():
    rng = np.random.default_rng(7)
    dist = LaguerreGauss(3.33, 0.33)
    draws = dist.sample(rng, 200_000)
    nmax = cutoff(dist)
    expected = dist.pmf(np.arange(nmax + 1)) * draws.size
    observed = np.bincount(draws, minlength=nmax + 1)[: nmax + 1]
    # pool sparse tail cells
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], draws.size - expected[keep].sum())
    return stats.chisquare(obs, exp).pvalue > 1e-3


def _reference_round(a, b, e, amb):
    da, db, de, damb = [], [], [], []
    for i in range(len(a) // 2):
        if a[2 * i + 1] ^ a[2 * i] == b[2 * i + 1] ^ b[2 * i]:
            da.append(a[2 * i])
            db.append(b[2 * i])
            de.append(e[2 * i])
            damb.append(amb[2 * i] or amb[2 * i + 1])
    return da, db, de, damb


def _gad_oracle():
    for n in (2, 4, 6):
        for a in itertools.product((0, 1), repeat=n):
            for b in itertools.product((0, 1), repeat=n):
                amb = [False] * n
                out = gad(SiftedTriple(np.array(a, np.uint8), np.array(b, np.uint8),
                                       np.array(a, np.uint8), np.array(amb)), 1)
                ra, rb, _, _ = _reference_round(a, b, a, amb)
                if list(out.d_a) != ra or list(out.d_b) != rb:
                    return False
    return True


def _distilled_ber():
    rng = np.random.default_rng(11)
    n = 1_000_000
    for e in (0.05, 0.2, 0.45):
        a = rng.integers(0, 2, n, dtype=np.uint8)
        b = a ^ (rng.random(n) < e).astype(np.uint8)
        out = gad(SiftedTriple(a, b, a, np.ones(n, bool)), 1, rng)
        p = expected_distilled_ber(e)
        if abs(out.ber - p) > 3 * math.sqrt(p * (1 - p) / len(out)):
            return False
    return True


def _session_vs_analytic():
    config = SessionConfig(mu=1.7, amplifier=AmplifierSpec(16), fiber=FiberSpec(50),
                           detector=DetectorSpec(0.2, 1e-5), n_pulses=400_000, seed=3)
    run = run_session(config)
    p_sift, _ = sifted_joint_table(1.7, AmplifierSpec(16), config.channel_transmittance, config.detector, 0.01)
    sd = math.sqrt(p_sift * (1 - p_sift) / config.n_pulses)
    return abs(run.stats.sifted / config.n_pulses - p_sift) < 4 * sd + 2 / config.n_pulses


def _determinism():
    import aqkd.session as session

    config = SessionConfig(mu=1.5, fiber=FiberSpec(20), n_pulses=300_000, seed=5)
    saved = session.SHARD_SIZE
    session.SHARD_SIZE = 1 << 16
    try:
        a = run_session(config, workers=1)
        b = run_session(config, workers=2)
    finally:
        session.SHARD_SIZE = saved
    return (np.array_equal(a.triple.bob, b.triple.bob)
            and np.array_equal(a.triple.pulse_index, b.triple.pulse_index))


CHECKS = [
    ("photon pmf normalization", _normalization),
    ("laguerre-gauss reduction identities", _reductions),
    ("amplified sampler matches pmf (chi-square)", _sampler_vs_pmf),
    ("distillation matches pairwise reference", _gad_oracle),
    ("distilled error rate predictor", _distilled_ber),
    ("session sift yield matches closed form", _session_vs_analytic),
    ("worker-count determinism", _determinism),
]


def run(out=sys.stdout) -> int:
    failed = 0
    for name, check in CHECKS:
        ok = bool(check())
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}", file=out)
    return 1 if failed else 0
