"""Command-line interface: plan inspection, sweeps, single frames, self-tests."""

from __future__ import annotations

import argparse
import dataclasses
import pathlib
import sys

import numpy as np

from . import fec, harness
from .channel import load_scenario, sample_scenario
from .pipeline import run_frame
from .planner import PlannerError, plan_summary
from .radar import ca_cfar, export_periodogram, periodogram, target_snr


def _load_cfg(args) -> harness.SweepConfig:
    cfg = harness.load_config(args.config) if args.config else harness.table_defaults()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "modes", None):
        overrides["modes"] = tuple(args.modes)
    if getattr(args, "snr", None):
        start, stop, step = args.snr
        grid = np.arange(start, stop + step / 2, step)
        overrides["snr_db"] = tuple(float(s) for s in grid)
    if getattr(args, "realizations", None) is not None:
        overrides["realizations"] = args.realizations
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _cmd_plan(args) -> int:
    cfg = _load_cfg(args)
    print(plan_summary(cfg.plan()))
    return 0


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    outdir = pathlib.Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    records = harness.run_sweep(cfg, progress=args.progress)
    csv_path = outdir / "results.csv"
    harness.write_results(records, csv_path)
    harness.save_config(cfg, outdir / "config.json")
    print(harness.summarize(records))
    print(f"wrote {csv_path}")
    return 0


def _cmd_frame(args) -> int:
    cfg = _load_cfg(args)
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, 0, 0, 0]))
        scenario = sample_scenario(rng, cfg.scenario, cfg.numerology.f_c)
    frame_rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, 1, 0, 0]))
    res = run_frame(
        scenario,
        cfg.plan(args.mode),
        args.mode,
        args.snr_db,
        frame_rng,
        keep_frames=args.dump is not None,
    )
    pgram = periodogram(res.h_hat, cfg.z_f, cfg.z_t, res.delta_f_eff, res.t0_eff)
    gamma = target_snr(pgram, scenario.excess_ranges, scenario.diff_dopplers)
    dets = ca_cfar(pgram, cfg.cfar)
    print(f"mode {args.mode} at receive SNR {args.snr_db:+.1f} dB")
    print(f"  SER: {res.ser!r}")
    for name, st in res.stream_stats.items():
        print(
            f"  stream {name}: {st.n_block_errors}/{st.n_decodable} block errors, "
            f"mean iters {st.mean_iterations:.1f}"
        )
    print(f"  target SNR: {10 * np.log10(gamma):.2f} dB, {len(dets)} detections")
    for det in dets[:10]:
        print(
            f"    peak at ({det.excess_range_m:8.2f} m, {det.diff_doppler_hz:+9.1f} Hz)"
            f" power {det.power:.4g}"
        )
    if args.dump is not None:
        dump = pathlib.Path(args.dump)
        dump.mkdir(parents=True, exist_ok=True)
        export_periodogram(dump / "periodogram", pgram)
        np.save(dump / "h_hat.npy", res.h_hat)
        np.save(dump / "x.npy", res.x)
        np.save(dump / "x_hat.npy", res.x_hat)
        print(f"  diagnostics written to {dump}")
    return 0


def _cmd_validate(args) -> int:
    from .channel import steering_doppler, steering_range
    from .modem import constellation, demodulate_llr, modulate
    from .planner import FramePlan, Numerology, spectral_efficiency
    from .radar import periodogram_oracle

    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1

    a = steering_range(0.0, 64, 120e3)
    b = steering_doppler(0.0, 64, 1 / 120e3)
    check("steering vectors at zero are all-ones", np.allclose(a, 1) and np.allclose(b, 1))

    num = Numerology(n_subcarriers=792, n_symbols=560, delta_f=120e3, f_c=27.4e9)
    plan = FramePlan(numerology=num, k_f=4, k_t=4)
    check("hybrid spectral efficiency is 1.9375", spectral_efficiency(plan) == 1.9375)

    rng = np.random.default_rng(0)
    h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    pg = periodogram(h, 2, 2)
    check(
        "periodogram matches the double-sum oracle",
        np.allclose(pg.p, periodogram_oracle(h, 2, 2), rtol=1e-9, atol=1e-12),
    )
    check("periodogram satisfies Parseval", np.isclose(pg.p.sum(), (np.abs(h) ** 2).sum()))

    for q in (2, 4):
        pts = constellation(q).points
        bits = rng.integers(0, 2, size=64 * q, dtype=np.uint8)
        sym = modulate(bits, q)
        llr = demodulate_llr(sym, q, 1e-6)
        check(
            f"order-{q} noiseless demodulation round trip",
            ((llr < 0).astype(np.uint8) == bits).all()
            and np.isclose(np.mean(np.abs(pts) ** 2), 1.0),
        )

    code = fec.default_code()
    info = rng.integers(0, 2, size=code.k, dtype=np.uint8)
    cw = fec.encode(info, code)
    llr = np.where(cw == 0, 20.0, -20.0)
    res = fec.decode_bp(llr, code)
    check(
        "LDPC noiseless decode converges immediately",
        res.converged and res.iterations_used == 0 and (res.bits == cw).all(),
    )

    print("all checks passed" if failures == 0 else f"{failures} check(s) failed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisac",
        description="Bistatic OFDM ISAC link-level simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", help="JSON sweep configuration file")
        p.add_argument("--seed", type=int, help="override the master seed")

    p_plan = sub.add_parser("plan", help="print the allocation plan summary")
    add_common(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_run = sub.add_parser("run", help="execute a Monte Carlo sweep")
    add_common(p_run)
    p_run.add_argument("--modes", nargs="+", help="subset of modes to run")
    p_run.add_argument(
        "--snr",
        nargs=3,
        type=float,
        metavar=("START", "STOP", "STEP"),
        help="override the SNR grid in dB",
    )
    p_run.add_argument("--realizations", type=int, help="realizations per SNR point")
    p_run.add_argument("--workers", type=int, help="parallel worker processes")
    p_run.add_argument("-o", "--output", default="results", help="output directory")
    p_run.add_argument("--progress", action="store_true", help="print per-cell progress")
    p_run.set_defaults(func=_cmd_run)

    p_frame = sub.add_parser("frame", help="run one diagnostic frame")
    add_common(p_frame)
    p_frame.add_argument("--mode", default="hybrid", help="allocation mode")
    p_frame.add_argument("--snr-db", type=float, default=5.0, help="receive SNR in dB")
    p_frame.add_argument("--scenario", help="scenario override JSON file")
    p_frame.add_argument("--dump", help="directory for diagnostic dumps")
    p_frame.set_defaults(func=_cmd_frame)

    p_val = sub.add_parser("validate", help="run quick invariant self-tests")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PlannerError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
