"""Command-line front-end: ``cpgd {simulate,recover,denoise,bench,time}``.

Every command accepts ``--config FILE``, a flat text file of ``key = value``
lines whose keys are the long option names (dashes or underscores). Values
given on the command line override the file, which overrides the built-in
defaults. The effective configuration is echoed next to the outputs as
``<command>_config.txt``.

The default output directory is ``$CPGD_OUTPUT_DIR`` or the current directory.

Exit codes: 0 on success (and convergence), 2 when a solver stops at its
iteration cap, 1 on usage or IO errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .denoise import DenoiseConfig, cadzow_denoise, inexact_prox, rank_ratio
from .fri import (
    DiracStream,
    SamplingScheme,
    build_forward_matrix,
    psnr_to_sigma,
    random_sampling,
    random_stream,
    recover_amplitudes,
    recover_locations,
    synthesize_measurements,
)
from .solvers import (
    ForwardModel,
    NotInjectiveError,
    SolverConfig,
    cpgd,
    genfri,
    ls_cadzow,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
OUTPUT_ENV = "CPGD_OUTPUT_DIR"
TIMING_NS = (19, 37, 73, 145, 289, 577, 1153, 1981)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return repr(float(v))


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _float_or_inf(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


# ---------------------------------------------------------------- config


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def write_config(path, values: dict) -> None:
    with open(path, "w") as fh:
        for k in sorted(values):
            v = values[k]
            if isinstance(v, (tuple, list)):
                v = ",".join(str(x) for x in v)
            fh.write(f"{k} = {v}\n")


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    known = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in config.items():
        if key not in known or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for '{parser.prog}'")
        action = known[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in _BOOL:
                raise UsageError(f"config key {key!r} expects true/false, got {value!r}")
            defaults[key] = _BOOL[value.lower()]
        else:
            # argparse runs string defaults through the option's type
            defaults[key] = value
    parser.set_defaults(**defaults)


# ---------------------------------------------------------------- csv io


def write_coefficients(path, x) -> None:
    x = np.asarray(x, dtype=complex)
    M = (x.shape[0] - 1) // 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "re", "im"])
        for m, v in zip(range(-M, M + 1), x):
            w.writerow([m, _fmt(v.real), _fmt(v.imag)])


def read_coefficients(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or {"re", "im"} - set(rows[0]):
        raise UsageError(f"{path}: expected columns m,re,im")
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])


def write_measurements(path, y) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y_re", "y_im"])
        for v in np.asarray(y, dtype=complex):
            w.writerow([_fmt(v.real), _fmt(v.imag)])


def read_measurements(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([complex(float(r["y_re"]), float(r["y_im"])) for r in rows])


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual", "rel_change", "norm_change"])
        for k, (r, c, d) in enumerate(
            zip(trace.residuals, trace.rel_changes, trace.norm_changes), 1
        ):
            w.writerow([k, _fmt(r), _fmt(c), _fmt(d)])


# ---------------------------------------------------------------- commands


def _outdir(args) -> Path:
    out = Path(args.out if args.out is not None else os.environ.get(OUTPUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    if args.K < 1 or args.L < 1 or args.gamma < 1:
        raise UsageError("K, L and gamma must be positive integers")
    if args.sigma is not None and args.psnr is not None:
        raise UsageError("give either --sigma or --psnr, not both")
    if args.sigma is not None and args.sigma < 0:
        raise UsageError("--sigma must be non-negative")
    out = _outdir(args)
    M = args.gamma * args.K
    seeds = bench.trial_seeds(args.seed, args.gamma, 0)
    stream = random_stream(args.K, seeds["stream"])
    scheme = random_sampling(args.L, M, seeds["scheme"])
    if args.psnr is not None:
        sigma = psnr_to_sigma(args.psnr, stream.amplitudes)
    else:
        sigma = args.sigma or 0.0
    model = synthesize_measurements(stream, scheme, sigma, seeds["noise"])
    stream.to_csv(out / "stream.csv")
    scheme.to_csv(out / "scheme.csv")
    write_measurements(out / "measurements.csv", model.y)
    meta = {
        "K": args.K,
        "L": args.L,
        "gamma": args.gamma,
        "M": M,
        "sigma": _fmt(sigma),
        "psnr": "none" if args.psnr is None else _fmt(args.psnr),
        "seed": args.seed,
    }
    write_config(out / "meta.txt", meta)
    print(f"wrote K={args.K} Diracs and L={args.L} samples (M={M}, sigma={sigma:.6g}) to {out}")
    return EXIT_OK


def _load_model(indir: Path, M: int | None) -> tuple[ForwardModel, dict]:
    meta = read_config(indir / "meta.txt") if (indir / "meta.txt").exists() else {}
    if M is None:
        if "M" not in meta:
            raise UsageError(f"{indir}: no meta.txt with M; pass --M")
        M = int(meta["M"])
    scheme = SamplingScheme.from_csv(indir / "scheme.csv", M)
    y = read_measurements(indir / "measurements.csv")
    if y.shape[0] != scheme.L:
        raise UsageError(f"{scheme.L} sampling times but {y.shape[0]} measurements")
    return ForwardModel(build_forward_matrix(scheme), y), meta


def cmd_recover(args) -> int:
    indir = Path(args.input)
    model, meta = _load_model(indir, args.M)
    K = args.K if args.K is not None else int(meta.get("K", 9))
    cfg = SolverConfig(
        K=K,
        P=args.P,
        tau=args.tau,
        radius=args.radius,
        map_iterations=args.map_iterations,
        max_iter=args.max_iter,
        rel_tol=args.rel_tol,
        seed=args.seed,
        stop_rule=args.stop_rule,
    )
    P = cfg.order_for(model.M)
    if args.method == "cpgd":
        trace = cpgd(model, cfg)
    elif args.method == "genfri":
        trace = genfri(model, cfg)
    else:
        trace = ls_cadzow(model, cfg)
    out = _outdir(args)
    x = trace.coefficients
    t = recover_locations(x, K, P)
    a = recover_amplitudes(x, t)
    write_coefficients(out / "coefficients.csv", x)
    DiracStream(t, a).to_csv(out / "diracs.csv")
    write_trace(out / "trace.csv", trace)
    write_config(
        out / "trace_meta.txt",
        {
            "method": args.method,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "tau": "none" if trace.tau is None else _fmt(trace.tau),
            "radius": "none" if trace.radius is None else _fmt(trace.radius),
            "K": K,
            "P": P,
            "M": model.M,
            "wall_time_s": _fmt(trace.wall_time),
        },
    )
    state = "converged" if trace.converged else "stopped at max_iter"
    print(f"{args.method}: {state} after {trace.iterations} iterations; results in {out}")
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_denoise(args) -> int:
    x = read_coefficients(args.input)
    M = (x.shape[0] - 1) // 2
    P = M if args.P is None else args.P
    if x.shape[0] % 2 == 0 or not 1 <= args.K <= P <= M:
        raise UsageError(f"need odd length and 1 <= K <= P <= M; got K={args.K}, P={P}, M={M}")
    cfg = DenoiseConfig(args.K, P, args.iterations, args.radius)
    z = inexact_prox(x, cfg) if math.isfinite(args.radius) else cadzow_denoise(x, cfg)
    out = Path(args.out) if args.out else _outdir(args) / "denoised.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_coefficients(out, z)
    before = rank_ratio(x, args.K, P) if args.K < P + 1 else 0.0
    after = rank_ratio(z, args.K, P) if args.K < P + 1 else 0.0
    print(f"sigma_(K+1)/sigma_K: before {before:.3e}, after {after:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    trials = bench.FULL_TRIALS if args.full else args.trials
    grid = bench.ExperimentGrid(
        K=args.K,
        L=args.L,
        gammas=args.gammas,
        psnrs=args.psnrs,
        trials=trials,
        methods=args.methods,
        base_seed=args.seed,
    )
    out = _outdir(args)
    records = bench.run_sweep(grid, workers=args.workers)
    bench.write_records(out / "records.csv", records)
    bench.write_summary(out / "summary.csv", bench.summarize(records))
    rows = bench.condition_table(grid.gammas, grid.K, grid.L, seed=args.seed)
    with open(out / "conditions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "N", "median_condition", "injective"])
        for r in rows:
            w.writerow([r.gamma, r.N, _fmt(r.median_condition), r.injective])
    failed = sum(1 for r in records if r.error)
    for r in records:
        if r.error:
            print(f"{r.method} gamma={r.gamma} psnr={r.psnr_db} trial={r.trial}: {r.error}", file=sys.stderr)
    print(f"{len(records)} records ({failed} failed) written to {out}")
    return EXIT_OK


def cmd_time(args) -> int:
    Ns = [n for n in TIMING_NS if n <= args.max_n]
    Ns = [n for n in Ns if n >= 2 * args.K + 1]
    if len(Ns) < 2:
        raise UsageError("--max-n leaves fewer than two problem sizes")
    res = bench.timing_study(Ns, K=args.K, repeats=args.repeats, seed=args.seed)
    out = _outdir(args)
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "cpgd_iteration_s", "genfri_iteration_s", "cpgd_total_s", "genfri_total_s"])
        for row in zip(res.N, res.cpgd_iteration_s, res.genfri_iteration_s, res.cpgd_total_s, res.genfri_total_s):
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    write_config(out / "timing_slopes.txt", {"cpgd_slope": _fmt(res.cpgd_slope), "genfri_slope": _fmt(res.genfri_slope)})
    print(f"fitted log-log slopes: cpgd {res.cpgd_slope:.3f}, genfri {res.genfri_slope:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cpgd", description="Dirac stream recovery from irregular low-pass samples.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, out_help=f"output directory (default ${OUTPUT_ENV} or .)"):
        sp.add_argument("--config", help="key = value file with option defaults")
        sp.add_argument("--out", default=None, help=out_help)
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="draw a Dirac stream and noisy samples")
    common(s)
    s.add_argument("--K", type=int, default=9)
    s.add_argument("--L", type=int, default=73)
    s.add_argument("--gamma", type=int, default=1, help="bandwidth factor, M = gamma K")
    s.add_argument("--psnr", type=float, default=None, help="noise level as PSNR in dB")
    s.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("recover", help="reconstruct from simulate outputs")
    common(r)
    r.add_argument("--input", required=True, help="directory with scheme.csv and measurements.csv")
    r.add_argument("--method", choices=bench.METHODS, default="cpgd")
    r.add_argument("--K", type=int, default=None)
    r.add_argument("--M", type=int, default=None)
    r.add_argument("--P", type=int, default=None)
    r.add_argument("--tau", type=float, default=None)
    r.add_argument("--radius", type=_float_or_inf, default=None)
    r.add_argument("--map-iterations", type=int, default=10)
    r.add_argument("--max-iter", type=int, default=500)
    r.add_argument("--rel-tol", type=float, default=1e-4)
    r.add_argument("--stop-rule", choices=("norm", "step"), default="norm")
    r.set_defaults(func=cmd_recover)

    d = sub.add_parser("denoise", help="Cadzow-denoise a coefficient file")
    common(d, seed=False, out_help=f"output CSV (default ${OUTPUT_ENV}/denoised.csv)")
    d.add_argument("--input", required=True, help="CSV with columns m,re,im")
    d.add_argument("--K", type=int, required=True)
    d.add_argument("--P", type=int, default=None)
    d.add_argument("--iterations", type=int, default=10)
    d.add_argument("--radius", type=_float_or_inf, default=math.inf)
    d.set_defaults(func=cmd_denoise)

    b = sub.add_parser("bench", help="positioning-error sweep")
    common(b)
    b.add_argument("--K", type=int, default=9)
    b.add_argument("--L", type=int, default=73)
    b.add_argument("--gammas", type=_int_list, default=(1, 2, 3, 4, 5))
    b.add_argument("--psnrs", type=_float_list, default=(-30, -20, -10, 0, 10, 20, 30))
    b.add_argument("--methods", type=_str_list, default=bench.METHODS)
    b.add_argument("--trials", type=int, default=bench.CI_TRIALS)
    b.add_argument("--full", action="store_true", help=f"{bench.FULL_TRIALS} trials per cell")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("time", help="per-iteration timing against N")
    common(t)
    t.add_argument("--K", type=int, default=9)
    t.add_argument("--max-n", type=int, default=TIMING_NS[-1])
    t.add_argument("--repeats", type=int, default=5)
    t.set_defaults(func=cmd_time)
    return p


def _effective(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config")}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        try:
            args = parser.parse_args(argv)
            if args.config:
                sub = parser._subparsers._group_actions[0].choices[args.command]
                _apply_config(sub, read_config(args.config))
                args = parser.parse_args(argv)
        except SystemExit as exc:  # --help or an argparse usage error
            return exc.code if isinstance(exc.code, int) else EXIT_ERROR
        code = args.func(args)
        if args.command != "denoise" or args.out is None:
            write_config(_outdir(args) / f"{args.command}_config.txt", _effective(args))
        else:
            write_config(Path(args.out).with_suffix(".config.txt"), _effective(args))
        return code
    except (UsageError, ValueError, NotInjectiveError, OSError) as exc:
        print(f"cpgd {argv[0] if argv else ''}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
