"""Monte Carlo harness: positioning-error sweeps, conditioning and timing."""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .denoise import DenoiseConfig
from .fri import (
    build_forward_matrix,
    psnr_to_sigma,
    random_sampling,
    random_stream,
    recover_locations,
    synthesize_measurements,
)
from .solvers import (
    ForwardModel,
    SolverConfig,
    _resolve,
    cpgd,
    cpgd_update,
    genfri,
    genfri_h_update_linearised,
    genfri_x_update,
    ls_cadzow,
)

__all__ = [
    "METHODS",
    "CI_TRIALS",
    "FULL_TRIALS",
    "RECORD_HEADER",
    "SUMMARY_HEADER",
    "ExperimentGrid",
    "BenchmarkRecord",
    "SummaryRow",
    "ConditionRow",
    "TimingResult",
    "circular_distance",
    "positioning_error",
    "positioning_error_bruteforce",
    "trial_seeds",
    "run_trial",
    "run_sweep",
    "summarize",
    "condition_table",
    "timing_study",
    "fit_loglog_slope",
    "write_records",
    "read_records",
    "write_summary",
]

METHODS = ("cpgd", "genfri", "ls-cadzow")
CI_TRIALS = 24
FULL_TRIALS = 192
RECORD_HEADER = [
    "method",
    "gamma",
    "psnr_db",
    "trial",
    "seed",
    "positioning_error",
    "iterations",
    "wall_time_ms",
    "converged",
]
SUMMARY_HEADER = ["method", "gamma", "psnr_db", "median_error", "q25", "q75", "n_trials"]


@dataclass
class ExperimentGrid:
    """Sweep over oversampling factors ``gamma`` (``M = gamma K``) and PSNRs."""

    K: int = 9
    L: int = 73
    gammas: tuple = (1, 2, 3, 4, 5)
    psnrs: tuple = (-30, -20, -10, 0, 10, 20, 30)
    trials: int = CI_TRIALS
    methods: tuple = METHODS
    base_seed: int = 0

    def __post_init__(self):
        self.gammas = tuple(int(g) for g in self.gammas)
        self.psnrs = tuple(float(p) for p in self.psnrs)
        self.methods = tuple(self.methods)
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be positive")
        if any(g < 1 for g in self.gammas):
            raise ValueError("every gamma must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}; choose from {METHODS}")

    def cells(self):
        return itertools.product(self.gammas, enumerate(self.psnrs), range(self.trials))


@dataclass
class BenchmarkRecord:
    method: str
    gamma: int
    psnr_db: float
    trial: int
    seed: int
    positioning_error: float
    iterations: int
    wall_time_ms: float
    converged: bool
    error: str = field(default="", compare=False)

    def key(self):
        return (self.method, self.gamma, self.psnr_db, self.trial)

    def row(self) -> list[str]:
        return [
            self.method,
            str(self.gamma),
            repr(float(self.psnr_db)),
            str(self.trial),
            str(self.seed),
            repr(float(self.positioning_error)),
            str(self.iterations),
            repr(float(self.wall_time_ms)),
            str(bool(self.converged)),
        ]


@dataclass
class SummaryRow:
    method: str
    gamma: int
    psnr_db: float
    median_error: float
    q25: float
    q75: float
    n_trials: int


def circular_distance(t, w):
    """Distance on the unit circle ``min(|t - w|, 1 - |t - w|)``."""
    r = np.asarray(t, dtype=float) - np.asarray(w, dtype=float)
    # r - round(r) is odd in r, so the distance is exactly symmetric
    d = np.abs(r - np.round(r))
    return d if d.ndim else float(d)


def _cost_matrix(truth, estimate) -> np.ndarray:
    t = np.atleast_1d(np.asarray(truth, dtype=float))
    w = np.atleast_1d(np.asarray(estimate, dtype=float))
    if t.shape != w.shape or t.ndim != 1:
        raise ValueError(f"location counts differ: {t.shape} vs {w.shape}")
    return circular_distance(t[:, None], w[None, :])


def _exact_costs(truth, estimate) -> tuple[list[list[int]], int]:
    """Circular distances as integers over a common power-of-two denominator.

    Floats are dyadic rationals, so the distances and any sum of them are
    exact; tied assignments then give bit-identical totals.
    """
    t = [Fraction(float(v)) for v in np.atleast_1d(truth)]
    w = [Fraction(float(v)) for v in np.atleast_1d(estimate)]
    if len(t) != len(w):
        raise ValueError(f"location counts differ: {len(t)} vs {len(w)}")
    D = [[abs((a - b) - round(a - b)) for b in w] for a in t]
    den = max((d.denominator for row in D for d in row), default=1)
    return [[d.numerator * (den // d.denominator) for d in row] for row in D], den


def _exact_mean(total: int, den: int, K: int) -> float:
    return float(Fraction(total, den * K))


def positioning_error(truth, estimate) -> float:
    """Mean circular distance under the optimal one-to-one matching.

    The matching comes from the Hungarian algorithm on the float costs; its
    cost is then summed exactly.
    """
    D = _cost_matrix(truth, estimate)
    r, c = linear_sum_assignment(D)
    exact, den = _exact_costs(truth, estimate)
    return _exact_mean(sum(exact[i][j] for i, j in zip(r, c)), den, D.shape[0])


def positioning_error_bruteforce(truth, estimate) -> float:
    """Same as :func:`positioning_error` by enumerating all permutations."""
    exact, den = _exact_costs(truth, estimate)
    K = len(exact)
    best = min(sum(exact[i][p[i]] for i in range(K)) for p in itertools.permutations(range(K)))
    return _exact_mean(best, den, K)


def trial_seeds(seed: int, gamma: int, psnr_index: int) -> dict[str, np.random.SeedSequence]:
    """Independent streams for the signal, the sampling times and the noise.

    Signal and sampling times depend on the trial seed only, so all cells of
    a trial share them; the noise also depends on the cell.
    """
    return {
        "stream": np.random.SeedSequence([seed, 0]),
        "scheme": np.random.SeedSequence([seed, 1]),
        "noise": np.random.SeedSequence([seed, 2, gamma, psnr_index]),
    }


def _solve(method: str, model: ForwardModel, cfg: SolverConfig):
    if method == "cpgd":
        return cpgd(model, cfg)
    if method == "genfri":
        return genfri(model, cfg)
    return ls_cadzow(model, cfg)


def run_trial(grid: ExperimentGrid, gamma: int, psnr_index: int, trial: int) -> list[BenchmarkRecord]:
    """All methods on one (gamma, PSNR, trial) cell; failures become NaN rows."""
    seed = grid.base_seed + trial
    psnr = grid.psnrs[psnr_index]
    seeds = trial_seeds(seed, gamma, psnr_index)
    M = gamma * grid.K
    stream = random_stream(grid.K, seeds["stream"])
    scheme = random_sampling(grid.L, M, seeds["scheme"])
    sigma = psnr_to_sigma(psnr, stream.amplitudes)
    model = synthesize_measurements(stream, scheme, sigma, seeds["noise"])
    out = []
    for method in grid.methods:
        if method == "genfri" and not model.injective:
            continue
        cfg = SolverConfig(K=grid.K, seed=seed)
        t0 = time.perf_counter()
        try:
            tr = _solve(method, model, cfg)
            est = recover_locations(tr.coefficients, grid.K, cfg.order_for(M))
            err = positioning_error(stream.locations, est)
            its, conv, msg = tr.iterations, tr.converged, ""
        except Exception as exc:  # recorded per row, the sweep goes on
            err, its, conv, msg = math.nan, 0, False, f"{type(exc).__name__}: {exc}"
        ms = 1e3 * (time.perf_counter() - t0)
        out.append(BenchmarkRecord(method, gamma, psnr, trial, seed, err, its, ms, conv, msg))
    return out


def _run_cell(args):
    return run_trial(*args)


def run_sweep(grid: ExperimentGrid, workers: int | None = 1) -> list[BenchmarkRecord]:
    """Every cell of ``grid``; ``workers > 1`` runs trials in separate processes.

    Results are sorted by (method, gamma, PSNR, trial) whatever the schedule.
    """
    tasks = [(grid, g, i, t) for g, (i, _), t in grid.cells()]
    if workers is not None and workers <= 1:
        chunks = map(_run_cell, tasks)
        records = [r for chunk in chunks for r in chunk]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = [r for chunk in ex.map(_run_cell, tasks, chunksize=4) for r in chunk]
    order = {m: i for i, m in enumerate(METHODS)}
    records.sort(key=lambda r: (order[r.method], r.gamma, r.psnr_db, r.trial))
    return records


def summarize(records) -> list[SummaryRow]:
    """Median and quartiles of the positioning error per (method, gamma, PSNR)."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.method, r.gamma, r.psnr_db), [])
        if np.isfinite(r.positioning_error):
            cells[(r.method, r.gamma, r.psnr_db)].append(r.positioning_error)
    out = []
    for (m, g, p), errs in cells.items():
        if errs:
            q25, med, q75 = np.percentile(errs, [25, 50, 75])
        else:
            q25 = med = q75 = math.nan
        out.append(SummaryRow(m, g, p, float(med), float(q25), float(q75), len(errs)))
    return out


@dataclass
class ConditionRow:
    gamma: int
    N: int
    median_condition: float
    injective: bool


def condition_table(
    gammas=(1, 2, 3, 4, 5), K: int = 9, L: int = 73, draws: int = 20, seed: int = 0
) -> list[ConditionRow]:
    """Median condition number of ``G^H G`` over random sampling schemes.

    Computed as the squared ratio of extreme singular values of ``G`` so that
    values near ``1e16`` are not lost to rounding in the Gram matrix. A fat
    ``G`` (``2M + 1 > L``) is reported as infinite and non-injective.
    """
    rows = []
    for g in gammas:
        M = g * K
        N = 2 * M + 1
        kappas = []
        for d in range(draws):
            scheme = random_sampling(L, M, np.random.SeedSequence([seed, d]))
            model = ForwardModel(build_forward_matrix(scheme), np.zeros(L))
            s = model.singular_values
            kappas.append((s[0] / s[-1]) ** 2 if model.injective else math.inf)
        med = float(np.median(kappas))
        rows.append(ConditionRow(g, N, med, N <= L and math.isfinite(med)))
    return rows


@dataclass
class TimingResult:
    N: list[int]
    cpgd_iteration_s: list[float]
    genfri_iteration_s: list[float]
    cpgd_iterations: int
    genfri_iterations: int
    cpgd_slope: float
    genfri_slope: float

    @property
    def cpgd_total_s(self) -> list[float]:
        return [t * self.cpgd_iterations for t in self.cpgd_iteration_s]

    @property
    def genfri_total_s(self) -> list[float]:
        return [t * self.genfri_iterations for t in self.genfri_iteration_s]


def fit_loglog_slope(n, t) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    n, t = np.asarray(n, dtype=float), np.asarray(t, dtype=float)
    ok = (n > 0) & (t > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(n[ok]), np.log(t[ok]), 1)[0])


def _median_time(fn, repeats: int) -> float:
    fn()  # warm-up, discarded
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def timing_study(
    Ns=(19, 37, 73, 145, 289, 577, 1153, 1981),
    K: int = 9,
    repeats: int = 5,
    seed: int = 0,
    cpgd_iterations: int = 100,
    genfri_iterations: int = 15 * 50,
    methods=("cpgd", "genfri"),
) -> TimingResult:
    """Per-iteration wall time of CPGD and GenFRI as ``N`` grows.

    Each ``N`` uses ``L = N`` irregular samples (square, injective ``G``)
    and ``P = M``. Totals scale one iteration by the typical iteration
    counts of each method.
    """
    cp, gf = [], []
    for N in Ns:
        if N % 2 == 0 or N < 2 * K + 1:
            raise ValueError(f"N={N} must be odd and >= 2K + 1")
        M = (N - 1) // 2
        L = N
        rng_s, rng_t, rng_n, rng_h = np.random.SeedSequence([seed, N]).spawn(4)
        stream = random_stream(K, rng_s)
        scheme = random_sampling(L, M, rng_t, min_sep=min(0.005, 0.5 / L))
        model = synthesize_measurements(stream, scheme, psnr_to_sigma(20.0, stream.amplitudes), rng_n)
        cfg = SolverConfig(K=K)
        if "cpgd" in methods:
            P, tau, radius = _resolve(model, cfg)
            den = DenoiseConfig(K, P, cfg.map_iterations, radius)
            x = cpgd_update(np.zeros(N, dtype=complex), model, tau, den)
            cp.append(_median_time(lambda: cpgd_update(x, model, tau, den), repeats))
        if "genfri" in methods:
            rng = np.random.default_rng(rng_h)
            h0 = rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1)
            x_ls = np.linalg.lstsq(model.G, model.y, rcond=None)[0]

            def sweep():
                h = genfri_h_update_linearised(model, x_ls, h0, h0)
                genfri_x_update(model, h)

            gf.append(_median_time(sweep, repeats))
    Ns = list(Ns)
    return TimingResult(
        Ns,
        cp,
        gf,
        cpgd_iterations,
        genfri_iterations,
        fit_loglog_slope(Ns, cp) if cp else math.nan,
        fit_loglog_slope(Ns, gf) if gf else math.nan,
    )


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow(r.row())


def read_records(path) -> list[BenchmarkRecord]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != RECORD_HEADER:
            raise ValueError(f"unexpected header {rd.fieldnames}")
        return [
            BenchmarkRecord(
                r["method"],
                int(r["gamma"]),
                float(r["psnr_db"]),
                int(r["trial"]),
                int(r["seed"]),
                float(r["positioning_error"]),
                int(r["iterations"]),
                float(r["wall_time_ms"]),
                r["converged"] == "True",
            )
            for r in rd
        ]


def write_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s in rows:
            w.writerow(
                [
                    s.method,
                    str(s.gamma),
                    repr(float(s.psnr_db)),
                    repr(s.median_error),
                    repr(s.q25),
                    repr(s.q75),
                    str(s.n_trials),
                ]
            )
