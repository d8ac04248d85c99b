"""Command-line entry point: ``gradcode {gen-code,optimize,simulate,calibrate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, apply_override
from .construction import mask_layout
from .delay import DelayParams, TimeModel, optimal_alpha_offline, optimal_f, sweep, write_sweep_csv
from .encoding import DecodingError, build_code
from .simulator import build_dataset, calibrate_cg, prepare, run_experiment, seed_streams
from .training import train_test_split

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

# reference workload for optimize: N c_g = 0.035 s over 12000 samples
REFERENCE_N = 12000
REFERENCE_CG = 0.035 / REFERENCE_N


class UsageError(Exception):
    pass


def cmd_gen_code(args) -> int:
    n, k, w = args.n, args.k, args.w
    try:
        layout = mask_layout(n, k, w)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if layout.d_light < 2:
        raise UsageError(
            f"floor(n*w/k) = floor({n * w}/{k}) = {layout.d_light} < 2: "
            "the straggler bound s <= floor(w*n/k) - 1 leaves no straggler to tolerate"
        )
    code = build_code(n, k, w)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code.mask.save(out / "mask.txt")
    code.save(out / "encoding.txt")
    p = code.params
    summary = f"{p.n} {p.k} {p.w} {p.s} {p.f}"
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def _delay_params(args) -> DelayParams:
    return DelayParams(args.t0, args.xi, args.cg, args.cm, args.N, args.n)


def cmd_optimize(args) -> int:
    try:
        params = _delay_params(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    best = optimal_alpha_offline(params)
    if best.valid:
        print(f"alpha* = {best.alpha:.4f}")
    else:
        print(f"alpha* = {best.alpha:.4f} INVALID: t0 >= c_g*N*xi "
              f"({params.t0} >= {params.compute_total * params.xi:.6g}), no interior optimum")
    for mode in ("offline", "online"):
        print(f"f* ({mode}) = {optimal_f(TimeModel(mode, params))}")
    if args.out:
        write_sweep_csv(sweep(params, args.step), args.out)
        print(f"sweep written to {args.out}")
    return EXIT_OK


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
    for assignment in args.set or []:
        apply_override(raw, assignment)
    if getattr(args, "seed", None) is not None:
        raw["seeds"] = [args.seed]
    if getattr(args, "out", None):
        raw["out_dir"] = args.out
    return ExperimentConfig.from_dict(raw)


def cmd_simulate(args) -> int:
    config = load_config(args)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = []
    try:
        for seed in config.seeds:
            setup = prepare(config, seed)
            for scheme in config.schemes:
                trace = run_experiment(config, scheme, seed, setup)
                stem = out / f"{scheme}_seed{seed}"
                for path, text in ((stem.with_suffix(".csv"), trace.to_csv()),
                                   (stem.with_suffix(".json"),
                                    json.dumps(trace.config, indent=2, sort_keys=True) + "\n")):
                    path.write_text(text)
                    written.append(path)
                rows.append((scheme, seed, setup.f, len(trace.records),
                             trace.final_test_error, trace.mean_round_time, trace.status))
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise

    lines = ["scheme,seed,f,iters,final_test_error,mean_round_time,status"]
    lines += [",".join("" if v is None else str(v) for v in row) for row in rows]
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    print(f"{'scheme':<20}{'seed':>6}{'f':>5}{'iters':>7}{'test_err':>10}{'round_s':>12}  status")
    for scheme, seed, f, iters, err, rt, status in rows:
        err_s = "-" if err is None else f"{err:.4f}"
        rt_s = "-" if rt is None else f"{rt:.6f}"
        print(f"{scheme:<20}{seed:>6}{f:>5}{iters:>7}{err_s:>10}{rt_s:>12}  {status}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = load_config(args)
    data_rng, _ = seed_streams(config.seeds[0])
    train, _ = train_test_split(build_dataset(config, data_rng), config.data.test_fraction, data_rng)
    cal = calibrate_cg(train, config.train.loss, args.batch, args.repeats)
    print(f"c_g = {cal.c_g:.6g} s/sample (relative IQR {cal.spread:.2f}, {cal.status})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradcode", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-code", help="write mask and encoding matrix for (n, k, w)")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--w", type=int, required=True)
    g.add_argument("--out", default="code")
    g.set_defaults(func=cmd_gen_code)

    o = sub.add_parser("optimize", help="optimal load fraction and wait count")
    o.add_argument("--t0", type=float, default=0.001)
    o.add_argument("--xi", type=float, default=1.1)
    o.add_argument("--cg", type=float, default=REFERENCE_CG, help="seconds per sample gradient")
    o.add_argument("--cm", type=float, default=1e-9, help="seconds per decode FLOP")
    o.add_argument("--N", type=int, default=REFERENCE_N)
    o.add_argument("--n", type=int, default=80)
    o.add_argument("--step", type=float, default=1e-3, help="alpha grid step for the sweep")
    o.add_argument("--out", help="CSV path for the (alpha, T_offline, T_online) sweep")
    o.set_defaults(func=cmd_optimize)

    for name, func, helptext in (("simulate", cmd_simulate, "run training simulations"),
                                 ("calibrate", cmd_calibrate, "measure c_g on this machine")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="JSON experiment config")
        s.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. train.step_size=1e-4")
        s.add_argument("--seed", type=int)
        s.set_defaults(func=func)
    sim = sub.choices["simulate"]
    sim.add_argument("--out", help="output directory")
    cal = sub.choices["calibrate"]
    cal.add_argument("--batch", type=int, default=256)
    cal.add_argument("--repeats", type=int, default=25)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecodingError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
