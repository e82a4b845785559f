import io
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from aqkd.config import ConfigError, build_spec, load_spec, parse_grid, read_config
from aqkd.harness import (
    CHANNEL,
    CSV_COLUMNS,
    CurveResult,
    CurveSpec,
    SweepSpec,
    emit_csv,
    evaluate_point,
    figure3_spec,
    max_range,
    point_seed,
    range_from_samples,
    run_sweep,
    takeoka_range,
    takeoka_transmittance,
)
from aqkd.keyrate import YieldPoint

DATA = Path(__file__).parent / "data"


def _curve(lengths, yields, label="c"):
    points = tuple(YieldPoint(label, float(L), 1.0, 1.5, 0, 0, 0, 0, 0, 0, 0, 0, float(y), 0.0)
                   for L, y in zip(lengths, yields))
    return CurveResult(label, points)


def test_max_range_examples():
    assert max_range(_curve([0, 50, 100], [1e-3, 1e-3, 1e-3])) == 100.0
    assert max_range(_curve([0, 50, 100], [1e-7, 1e-8, 0])) == 0.0
    # log-linear interpolation: 1e-5 -> 1e-7 crosses 1e-6 halfway
    assert max_range(_curve([0, 10, 20], [1e-3, 1e-5, 1e-7])) == pytest.approx(15.0)
    # a zero next sample stops at the last grid point above the floor
    assert max_range(_curve([0, 10, 20], [1e-3, 1e-5, 0.0])) == 10.0
    with pytest.raises(ValueError):
        range_from_samples([0, 1], [1, 1], floor=0)


def test_max_range_uses_last_crossing():
    assert range_from_samples([0, 10, 20, 30], [1e-7, 1e-5, 1e-7, 1e-9]) == pytest.approx(15.0)


def test_curve_result_requires_increasing_lengths():
    with pytest.raises(ValueError):
        _curve([0, 10, 10], [1, 1, 1])


def test_single_point_lossless_has_key():
    point = evaluate_point(CurveSpec("x"), 0.0, pulses=10**6, seed=1)
    assert point.secret_yield > 0
    assert point.secret_yield == pytest.approx(point.dist_yield * point.secret_fraction)
    assert point.secret_yield <= point.takeoka_bound


def test_escalation_to_max_pulses(caplog):
    curve = CurveSpec("x", gain=16.0, mu=(1.7,), rounds=(0,))
    with caplog.at_level(logging.INFO, logger="aqkd.harness"):
        point = evaluate_point(curve, 200.0, pulses=10**4, max_pulses=10**6, seed=2)
    assert "escalating to 1000000 pulses" in caplog.text
    # the escalated run resolves the sifted yield on a 1e-6 grid
    assert point.sift_yield * 10**6 == pytest.approx(round(point.sift_yield * 10**6))
    caplog.clear()
    with caplog.at_level(logging.INFO, logger="aqkd.harness"):
        evaluate_point(curve, 0.0, pulses=10**5, max_pulses=10**6, seed=2)
    assert "escalating" not in caplog.text


def test_bb84_yield_monotone_in_length():
    spec = SweepSpec(curves=(CurveSpec("bb84"),), lengths_km=tuple(float(x) for x in range(0, 125, 25)),
                     pulses=4 * 10**6, max_pulses=4 * 10**6, seed=5)
    (curve,) = run_sweep(spec)
    y = curve.yields
    for p, q in zip(curve.points, curve.points[1:]):
        # 3 sigma slack on the difference from the sifted-count standard errors
        sd = math.sqrt(p.secret_yield * p.secret_fraction / spec.pulses + q.secret_yield * q.secret_fraction / spec.pulses)
        assert q.secret_yield <= p.secret_yield + 3 * sd
    assert y[-1] < y[0]


def test_mu_grid_unimodal_at_50km():
    grid = (0.2, 0.4, 0.8, 1.5, 3.0, 5.0)
    ys, sds = [], []
    for i, mu in enumerate(grid):
        p = evaluate_point(CurveSpec("bb84", mu=(mu,)), 50.0, pulses=4 * 10**6, seed=point_seed(9, i))
        ys.append(p.secret_yield)
        sds.append(math.sqrt(max(p.sift_yield, 1e-12) / 4e6) * max(p.secret_fraction, 0.05))
    k = int(np.argmax(ys))
    assert 0 < k < len(grid) - 1
    for i in range(k):
        assert ys[i] <= ys[i + 1] + 3 * (sds[i] + sds[i + 1])
    for i in range(k, len(grid) - 1):
        assert ys[i + 1] <= ys[i] + 3 * (sds[i] + sds[i + 1])


def test_takeoka_conventions():
    curve = CurveSpec("x", eta_d=0.2)
    assert takeoka_transmittance(curve, 100.0, CHANNEL) == pytest.approx(0.01)
    assert takeoka_transmittance(curve, 100.0, "channel-times-detector") == pytest.approx(0.002)
    lengths = np.arange(0, 400, 5.0)
    points = tuple(YieldPoint("t", float(L), 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                              float(np.log2((1 + e) / (1 - e))))
                   for L, e in zip(lengths, 0.2 * 10 ** (-0.02 * lengths)))
    assert takeoka_range(CurveResult("t", points)) == pytest.approx(288, abs=2)


def test_emit_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_emit_csv_one_point(tmp_path):
    path = tmp_path / "one.csv"
    emit_csv([_curve([5.0], [0.1])], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert len(lines[1].split(",")) == 14
    assert lines[0] == "curve,L_km,G,mu,rounds,sift_yield,ber_sift,dist_yield,ber_dist,eve_delta,eve_ber," \
                       "secret_fraction,secret_yield,takeoka_bound"


def test_emit_csv_round_trip_floats():
    buf = io.StringIO()
    value = 0.1 + 0.2
    emit_csv([_curve([1.0], [value])], buf)
    assert float(buf.getvalue().splitlines()[1].split(",")[12]) == value


def test_golden_csv(tmp_path):
    spec = load_spec(DATA / "golden.ini", {"out": str(tmp_path / "out.csv")})
    emit_csv(run_sweep(spec), spec.out)
    assert (tmp_path / "out.csv").read_bytes() == (DATA / "golden.csv").read_bytes()


def test_sweep_parallel_matches_serial():
    spec = load_spec(DATA / "golden.ini")
    serial = io.StringIO()
    parallel = io.StringIO()
    emit_csv(run_sweep(spec), serial)
    emit_csv(run_sweep(spec.replace(workers=2)), parallel)
    assert serial.getvalue() == parallel.getvalue()


def test_figure3_preset():
    spec = figure3_spec()
    assert [c.label for c in spec.curves] == ["bb84", "gad", "g4over3", "g16"]
    gains = {c.label: (c.gain, c.mu) for c in spec.curves}
    assert gains == {"bb84": (1.0, (1.5,)), "gad": (1.0, (1.5,)), "g4over3": (4 / 3, (2.5,)), "g16": (16.0, (1.7,))}
    assert spec.lengths_km[0] == 0 and spec.lengths_km[-1] == 300


def test_sweep_spec_validation():
    base = SweepSpec(curves=(CurveSpec("a"),))
    for bad in (dict(curves=()), dict(lengths_km=()), dict(lengths_km=(10.0, 5.0)), dict(pulses=100),
                dict(max_pulses=10), dict(takeoka_convention="x"), dict(curves=(CurveSpec("a"), CurveSpec("a")))):
        with pytest.raises(ValueError):
            base.replace(**bad).validate()
    for bad in (dict(label=""), dict(label="a,b"), dict(mu=()), dict(rounds=(-1,)), dict(gain=0.5), dict(eta_d=2)):
        with pytest.raises(ValueError):
            CurveSpec(**{"label": "a", **bad})


def test_point_seed_independent_of_order():
    assert point_seed(1, 2, 3) == point_seed(1, 2, 3)
    assert len({point_seed(1, 0, i) for i in range(100)}) == 100


# -- config -----------------------------------------------------------------


def test_parse_grid():
    assert parse_grid("1,2,3") == (1.0, 2.0, 3.0)
    assert parse_grid("0:300:5")[-1] == 300.0 and len(parse_grid("0:300:5")) == 61
    assert parse_grid("0:3:1", int) == (0, 1, 2, 3)
    for bad in ("", "1:2", "0:10:0"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def _write(tmp_path, text):
    path = tmp_path / "c.ini"
    path.write_text(text)
    return path


def test_unknown_key_is_error(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'LL'"):
        read_config(_write(tmp_path, "[global]\nLL = 5\n"))
    with pytest.raises(ConfigError, match="unknown key"):
        read_config(_write(tmp_path, "[curve.a]\nseed = 5\n"))
    with pytest.raises(ConfigError, match="unknown section"):
        read_config(_write(tmp_path, "[curves]\nG = 5\n"))
    with pytest.raises(ConfigError, match="bad value"):
        read_config(_write(tmp_path, "[global]\npulses = lots\n"))


def test_config_and_overrides(tmp_path):
    path = _write(tmp_path, """
[global]
L = 0:20:10
eta-d = 0.25
seed = 7

[curve.a]
G = 16
mu = 1.0,1.7
rounds = 0:2:1

[curve.b]
eta-d = 0.3
""")
    spec = load_spec(path, {"seed": 9, "p_dark": None, "p-dark": 2e-6})
    assert spec.lengths_km == (0.0, 10.0, 20.0)
    assert spec.seed == 9
    a, b = spec.curves
    assert (a.label, a.gain, a.mu, a.rounds, a.eta_d, a.p_dark) == ("a", 16.0, (1.0, 1.7), (0, 1, 2), 0.25, 2e-6)
    assert (b.label, b.eta_d) == ("b", 0.3)
    # CLI overrides beat per-curve values
    spec = load_spec(path, {"eta-d": 0.15})
    assert all(c.eta_d == 0.15 for c in spec.curves)


def test_build_spec_defaults():
    spec = build_spec({}, {}, {"G": 16.0, "mu": (1.7,)})
    (curve,) = spec.curves
    assert (curve.label, curve.gain, curve.mu) == ("point", 16.0, (1.7,))
    spec = build_spec({}, {}, {"alpha": 0.17}, figure3_spec())
    assert len(spec.curves) == 4 and all(c.alpha == 0.17 for c in spec.curves)
