"""Command line entry point: ``aqkd point|sweep|figure3|calibrate|selftest``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfg
from .harness import (
    CALIBRATED_ETA_D,
    CHANNEL,
    CHANNEL_TIMES_DETECTOR,
    CSV_COLUMNS,
    CurveResult,
    CurveSpec,
    SweepSpec,
    calibrate_dark_count,
    emit_csv,
    evaluate_point,
    figure3_spec,
    max_range,
    run_sweep,
    takeoka_range,
    YIELD_FLOOR,
)

log = logging.getLogger("aqkd")

# CLI dest -> config key
_OVERRIDES = {
    "seed": "seed",
    "pulses": "pulses",
    "max_pulses": "max-pulses",
    "out": "out",
    "L": "L",
    "G": "G",
    "chi": "chi",
    "mu": "mu",
    "rounds": "rounds",
    "alpha": "alpha",
    "eta_d": "eta-d",
    "p_dark": "p-dark",
    "p_pol": "p-pol",
    "f_ec": "f-ec",
    "takeoka_convention": "takeoka-convention",
    "workers": "workers",
}


def _grid(cast):
    def parse(text):
        try:
            return cfg.parse_grid(text, cast)
        except (ValueError, cfg.ConfigError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file with [global] and [curve.<label>] sections")
    p.add_argument("--seed", type=int, help="64-bit master seed")
    p.add_argument("--pulses", type=int, help="pulses per point before escalation")
    p.add_argument("--max-pulses", type=int, help="pulses per point when too few bits were sifted")
    p.add_argument("--out", help="CSV output path (default: standard output)")
    p.add_argument("--L", type=_grid(float), help="span length(s) in km: list a,b,c or start:stop:step")
    p.add_argument("--G", type=float, help="amplifier gain")
    p.add_argument("--chi", type=float, help="amplifier excess noise factor")
    p.add_argument("--mu", type=_grid(float), help="mean photon number(s) into the amplifier")
    p.add_argument("--rounds", type=_grid(int), help="advantage distillation rounds to try")
    p.add_argument("--alpha", type=float, help="fiber attenuation in dB/km")
    p.add_argument("--eta-d", type=float, help="detector efficiency")
    p.add_argument("--p-dark", type=float, help="dark-count probability per gate")
    p.add_argument("--p-pol", type=float, help="polarization error probability")
    p.add_argument("--f-ec", type=float, help="error-correction inefficiency")
    p.add_argument("--takeoka-convention", choices=[CHANNEL, CHANNEL_TIMES_DETECTOR])
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqkd", description="Amplified QKD secret-yield simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("point", "simulate one configuration and print its yield point"),
        ("sweep", "run a config-driven sweep"),
        ("figure3", "run the built-in four-curve yield-vs-distance preset"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "figure3":
            p.add_argument("--gnuplot", help="also write a gnuplot script plotting the CSV")
    cal = sub.add_parser("calibrate", help="solve the dark-count probability for a BB84 target range")
    cal.add_argument("--eta-d", type=float, default=CALIBRATED_ETA_D)
    cal.add_argument("--target-km", type=float, default=145.0)
    cal.add_argument("--alpha", type=float, default=0.2)
    cal.add_argument("--p-pol", type=float, default=0.01)
    cal.add_argument("--f-ec", type=float, default=1.16)
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def _overrides(args) -> dict:
    return {key: getattr(args, dest, None) for dest, key in _OVERRIDES.items()}


def _spec(args, base: SweepSpec | None) -> SweepSpec:
    overrides = _overrides(args)
    if args.config:
        return cfg.load_spec(args.config, overrides, base)
    return cfg.build_spec({}, {}, overrides, base)


def _write(results, out) -> None:
    if out:
        emit_csv(results, out)
        log.info("wrote %s", out)
    else:
        emit_csv(results, sys.stdout)


def _summary(results) -> None:
    for curve in results:
        print(f"{curve.label}: max range {max_range(curve):.1f} km (yield floor {YIELD_FLOOR:g})", file=sys.stderr)
    if results:
        print(f"takeoka bound: reaches floor at {takeoka_range(results[0]):.1f} km", file=sys.stderr)


def gnuplot_script(csv_path: str, labels) -> str:
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'span length (km)'",
        "set ylabel 'secret bits per pulse'",
        "set yrange [1e-7:1]",
        "plot \\",
    ]
    parts = [f"  '< grep ^{lab}, {csv_path}' using 2:13 with linespoints title '{lab}'" for lab in labels]
    parts.append(f"  '< grep ^{labels[0]}, {csv_path}' using 2:14 with lines title 'takeoka'")
    lines.append(", \\\n".join(parts))
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            from .selftest import run
            return run()
        if args.command == "calibrate":
            pd = calibrate_dark_count(args.eta_d, args.target_km, alpha=args.alpha, p_pol=args.p_pol, f_ec=args.f_ec)
            print(f"eta_d = {args.eta_d}\np_dark = {pd:.4g}")
            return 0
        if args.command == "point":
            spec = _spec(args, SweepSpec(curves=(CurveSpec("point"),), lengths_km=(0.0,)))
            if len(spec.lengths_km) != 1 or len(spec.curves) != 1:
                raise ValueError("point takes exactly one span length and one curve")
            spec.validate()
            curve = spec.curves[0]
            result = evaluate_point(curve, spec.lengths_km[0], spec.pulses, spec.max_pulses, spec.seed,
                                    spec.takeoka_convention, spec.workers)
            _write([CurveResult(curve.label, (result,))], spec.out)
            return 0
        base = figure3_spec() if args.command == "figure3" else None
        if args.command == "sweep" and not args.config:
            raise ValueError("sweep needs --config")
        spec = _spec(args, base)
        results = run_sweep(spec)
        _write(results, spec.out)
        _summary(results)
        if args.command == "figure3" and args.gnuplot:
            with open(args.gnuplot, "w") as fh:
                fh.write(gnuplot_script(spec.out or "figure3.csv", [c.label for c in spec.curves]))
        return 0
    except (ValueError, cfg.ConfigError, OSError) as exc:
        print(f"aqkd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "CSV_COLUMNS"]
