"""Command-line front end.

dB-valued options are converted to linear quantities here, at the boundary;
the library itself works in linear units throughout.  Exit codes: 0 on
success, 2 for configuration problems, 3 for numeric failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .ambiguity import AfMode, average_af, to_db
from .channel import ChannelConfig, Target, apply_channel
from .detect import CfarConfig, PdPipeline, calibrate_cfar, pd_experiment
from .errors import ConfigError, NumericError
from .experiments import (
    ExperimentConfig,
    _tx_generator,
    _write_csv,
    list_scenarios,
    run_scenario,
)
from .pa import PaConfig, limiter_compression_power, sel_amplify
from .radar import division_filter, periodogram
from .seeding import derive_rng
from .signaling import (
    Frame,
    FrameConfig,
    add_cp,
    draw_symbols,
    parse_basis,
    parse_constellation,
    synthesize,
)


def _cmd_list(args) -> int:
    for scn in list_scenarios():
        if args.machine:
            print(f"{scn.name}\t{scn.default_trials}\t{scn.runtime_hint}\t{scn.description}")
        else:
            print(f"{scn.name}")
            print(f"    {scn.description}")
            print(f"    default trials: {scn.default_trials}   runtime: {scn.runtime_hint}")
    return 0


def _cmd_run(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    config.scenario = args.scenario
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.out is not None:
        config.out_dir = args.out
    if args.workers is not None:
        config.workers = args.workers
    if args.plots:
        config.plots = True
    manifest = run_scenario(config)
    out = Path(config.out_dir) / manifest.scenario
    print(f"scenario {manifest.scenario}: {len(manifest.files)} files in {out} "
          f"({manifest.wallclock_s:.1f} s)")
    for name in manifest.files:
        print(f"  {name}")
    return 0


def _cmd_calibrate_cfar(args) -> int:
    cfg = CfarConfig(window=args.window, guard=args.guard, p_fa=args.pfa)
    rng = derive_rng(args.seed, "cli/calibrate-cfar")
    factor = calibrate_cfar(cfg, args.trials, rng)
    print(f"window={cfg.window} guard={cfg.guard} p_fa={cfg.p_fa:g} "
          f"factor={factor!r}")
    return 0


def _pa_from_args(args) -> PaConfig:
    v_sat = args.v_sat
    p1db = limiter_compression_power(v_sat) if args.compression else None
    return PaConfig(v_sat=v_sat, ibo=10.0 ** (args.ibo_db / 10.0), p1db=p1db)


def _cmd_af_cut(args) -> int:
    const = parse_constellation(args.constellation)
    basis = parse_basis(args.basis, args.n)
    pa = None if args.linear else _pa_from_args(args)
    gen = _tx_generator(const, basis, pa)
    mode = AfMode.PERIODIC if args.mode == "periodic" else AfMode.APERIODIC
    rng = derive_rng(args.seed, "cli/af-cut")
    surf = average_af(gen, args.trials, k_grid=1, mode=mode, rng=rng)
    _write_csv(Path(args.out), [
        ("lag", surf.delays),
        ("level_db", to_db(surf.values[:, 0])),
    ])
    print(f"wrote {args.out}")
    return 0


def _default_cli_targets() -> tuple[Target, ...]:
    return (Target(b=1.0, delay=4), Target(b=10.0 ** -0.5, delay=8))


def _cmd_pd_curve(args) -> int:
    const = parse_constellation(args.constellation)
    fc = FrameConfig(n=args.n, m=args.m, cp_len=args.cp)
    cfar = CfarConfig()
    rng = derive_rng(args.seed, "cli/pd-curve")
    if args.factor is not None:
        factor = args.factor
    else:
        factor = calibrate_cfar(cfar, 4_000_000, derive_rng(args.seed, "cli/pd-curve/cal"))
    cfar = CfarConfig(window=cfar.window, guard=cfar.guard, p_fa=cfar.p_fa, factor=factor)
    pipeline = PdPipeline(
        constellation=const,
        basis=parse_basis("ofdm", args.n),
        frame=fc,
        pa=_pa_from_args(args),
        cfar=cfar,
        targets=_default_cli_targets(),
        linear=args.linear,
        distortion_limited=args.distortion_limited,
    )
    grid = [float(v) for v in args.snr_db_grid.split(",")]
    curve = pd_experiment(pipeline, grid, args.trials, rng, workers=args.workers)
    _write_csv(Path(args.out), [
        ("snr_db", curve.snr_db),
        ("pd", curve.pd),
        ("ci_halfwidth", curve.ci_halfwidth),
        ("trials", np.full(curve.snr_db.size, curve.trials, dtype=int)),
    ])
    print(f"wrote {args.out}")
    return 0


def _cmd_periodogram(args) -> int:
    const = parse_constellation(args.constellation)
    fc = FrameConfig(n=args.n, m=args.m, cp_len=args.cp)
    basis = parse_basis("ofdm", args.n)
    pa = _pa_from_args(args)
    rng = derive_rng(args.seed, "cli/periodogram")
    sym = draw_symbols(const, (fc.m, fc.n), rng)
    x = synthesize(basis, sym)
    tx = pa.g * pa.alpha * x if args.linear else sel_amplify(x, pa)
    frame = Frame(add_cp(tx, fc.cp_len), fc, has_cp=fc.cp_len > 0)
    noise_var = (abs(pa.g) * pa.alpha) ** 2 / 10.0 ** (args.snr_db / 10.0)
    chan = ChannelConfig(targets=_default_cli_targets(), noise_var=noise_var)
    rx = apply_channel(frame, chan, rng)
    per = periodogram(division_filter(rx, sym), args.n_per, args.m_per)
    dgrid, kgrid = np.meshgrid(per.delay_bins, per.doppler_bins, indexing="ij")
    _write_csv(Path(args.out), [
        ("delay_bin", dgrid.ravel()),
        ("doppler_bin", kgrid.ravel()),
        ("power_db", to_db(per.values / per.values.max()).ravel()),
    ])
    print(f"wrote {args.out}")
    return 0


def _add_pa_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ibo-db", type=float, default=1.0, help="input back-off in dB")
    p.add_argument("--v-sat", type=float, default=1.0, help="saturation magnitude")
    p.add_argument("--compression", action=argparse.BooleanOptionalAction, default=True,
                   help="reference back-off to the 1 dB compression point")
    p.add_argument("--linear", action="store_true", help="bypass the clipper")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isacsim",
        description="OFDM sensing-waveform simulation: ambiguity, clipping, detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list available scenarios")
    p.add_argument("--machine", action="store_true", help="tab-separated output")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("run", help="run a named scenario")
    p.add_argument("scenario")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--plots", action="store_true", help="also render SVG quick-looks")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("calibrate-cfar", help="calibrate the SO-CFAR threshold factor")
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--guard", type=int, default=2)
    p.add_argument("--pfa", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=4_000_000, help="cell tests")
    p.add_argument("--seed", type=int, default=20260815)
    p.set_defaults(func=_cmd_calibrate_cfar)

    p = sub.add_parser("af-cut", help="averaged zero-Doppler cut to CSV")
    p.add_argument("--constellation", default="16-PSK")
    p.add_argument("--basis", default="ofdm")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--mode", choices=("periodic", "aperiodic"), default="periodic")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=20260815)
    p.add_argument("--out", default="af_cut.csv")
    _add_pa_args(p)
    p.set_defaults(func=_cmd_af_cut)

    p = sub.add_parser("pd-curve", help="weak-target detection probability vs SNR")
    p.add_argument("--constellation", default="16-PSK")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--cp", type=int, default=16)
    p.add_argument("--snr-db-grid", default="4,6,8,10,12,14,16",
                   help="comma-separated SNR grid in dB")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=20260815)
    p.add_argument("--factor", type=float, help="skip calibration, use this factor")
    p.add_argument("--distortion-limited", action="store_true")
    p.add_argument("--out", default="pd_curve.csv")
    _add_pa_args(p)
    p.set_defaults(func=_cmd_pd_curve)

    p = sub.add_parser("periodogram", help="single-frame range-Doppler map to CSV")
    p.add_argument("--constellation", default="16-QAM")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--cp", type=int, default=16)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--n-per", type=int, default=None)
    p.add_argument("--m-per", type=int, default=None)
    p.add_argument("--seed", type=int, default=20260815)
    p.add_argument("--out", default="periodogram.csv")
    _add_pa_args(p)
    p.set_defaults(func=_cmd_periodogram)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
