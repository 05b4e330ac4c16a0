"""
Estimation pipeline and the two experiments: convergence study and cost benchmark.

Every experiment row owns its random streams, derived from (seed, N, M), so a
row's result does not depend on which worker ran it or in what order.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .capacity import alpha_star_from_spectrum, capacity_sup, spectrum
from .config import RunConfig
from .errors import KernelError, RndError
from .estimator import RatioModel, fit, subsample_plan
from .kernels import KernelSpec, Sample, gram
from .selection import (
    choose_alpha,
    choose_subsample_size,
    cost_exponent,
    sample_scale,
    subsample_schedule,
    theory_rate_exponent,
)
from .synth import draw, embedded_error, l2p_error, mc_seed

logger = logging.getLogger(__name__)

THREADS_ENV = "RND_THREADS"

CONVERGENCE_FIELDS = [
    "kind",
    "N",
    "M",
    "seed",
    "alpha",
    "m",
    "l2p_error",
    "embedded_hk_error",
    "kernel_evals",
    "fit_flops",
    "median_l2p_error",
    "slope",
    "rate_exponent",
    "error",
]

BENCH_FIELDS = [
    "kind",
    "n",
    "m_sub",
    "mode",
    "kernel_evals",
    "solver_flops",
    "total_cost",
    "wall_seconds",
    "exponent",
    "predicted_exponent",
    "error",
]

# Failures that turn into an error row instead of aborting the run
ROW_ERRORS = (RndError, ValueError, ArithmeticError, MemoryError)


def worker_count() -> int:
    """Worker cap from RND_THREADS, defaulting to the CPU count."""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            workers = int(value)
            if workers >= 1:
                return workers
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid {THREADS_ENV}={value!r}")
    return os.cpu_count() or 1


@dataclass
class Estimate:
    """A fitted model together with the choices that produced it."""

    model: RatioModel
    kernel: KernelSpec
    alpha: float
    m: int


def _pilot(config: RunConfig, xp: Sample) -> Sample:
    return xp.take(np.arange(min(config.subsample.pilot, xp.n)))


def select_alpha(config: RunConfig, kernel: KernelSpec, xp: Sample, n_q: int) -> float:
    """Configured alpha: a fixed number, the a priori rule, or the balance point alpha*."""
    alpha = config.selection.alpha
    if alpha == "auto":
        return choose_alpha(config.selection.policy(), xp.n, n_q)
    if alpha == "star":
        # Spectrum from the pilot, threshold for the full N
        return alpha_star_from_spectrum(spectrum(gram(kernel, _pilot(config, xp))), xp.n)
    return float(alpha)


def select_subsample(config: RunConfig, kernel: KernelSpec, xp: Sample, n_q: int, alpha: float) -> int:
    """Configured subsample size, or the capacity rule with n_inf(alpha) from the pilot."""
    fixed = config.subsample.resolve(xp.n, n_q)
    if fixed is not None:
        return fixed
    n_inf = capacity_sup(kernel, _pilot(config, xp), alpha)
    return choose_subsample_size(config.selection.policy(), n_inf, alpha, xp.n, n_q)


def estimate(config: RunConfig, xp: Sample, xq: Sample, plan_seed: int = 0) -> Estimate:
    """Select alpha and m, then fit in the configured mode."""
    if xp.dim != xq.dim:
        raise KernelError(f"Dimension mismatch: p-sample has d={xp.dim}, q-sample has d={xq.dim}")
    kernel = config.kernel.to_spec(xp.dim, xp)
    alpha = select_alpha(config, kernel, xp, xq.n)

    plan = None
    if config.subsample.mode == "full":
        m = min(xp.n, xq.n)
    else:
        m = select_subsample(config, kernel, xp, xq.n, alpha)
        plan = subsample_plan(xp.n, xq.n, m, plan_seed)
    model = fit(
        kernel, xp, xq, alpha, mode=config.subsample.mode, plan=plan, weighting=config.subsample.weighting
    )
    logger.info(f"Estimate: N={xp.n}, M={xq.n}, alpha={alpha:.6g}, m={m}, mode={config.subsample.mode}")
    return Estimate(model=model, kernel=kernel, alpha=alpha, m=m)


def row_seeds(seed: int, n: int, m: int) -> tuple[int, int, int]:
    """(p, q, plan) seeds of one grid row."""
    state = np.random.SeedSequence([int(seed), int(n), int(m)]).generate_state(3, dtype=np.uint64)
    return int(state[0]), int(state[1]), int(state[2])


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvWriter:
    """Single serialized CSV writer shared by all rows of a run."""

    def __init__(self, path: Path, fields: list[str], comments: Iterable[str] = ()):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fields = fields
        self._lock = threading.Lock()
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        for line in comments:
            self._file.write(f"# {line}\n")
        self._writer.writerow(fields)

    def write(self, row: dict[str, Any]) -> None:
        with self._lock:
            self._writer.writerow([_fmt(row.get(name)) for name in self.fields])
            self._file.flush()

    def comment(self, line: str) -> None:
        with self._lock:
            self._file.write(f"# {line}\n")
            self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "CsvWriter":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


@dataclass
class ConvergenceResult:
    """Rows, per-size summaries and the fitted slope of a convergence run."""

    rows: list[dict[str, Any]]
    summaries: list[dict[str, Any]]
    slope: float
    rate_exponent: float
    theory_exponent: float
    csv_path: Path | None = None

    @property
    def failures(self) -> list[dict[str, Any]]:
        return [r for r in self.rows if r.get("error")]


def convergence_row(config: RunConfig, n: int, m: int, seed: int) -> dict[str, Any]:
    """One (N, M, seed) cell: draw, select, fit, score."""
    row: dict[str, Any] = {"kind": "row", "N": n, "M": m, "seed": seed}
    try:
        p_seed, q_seed, plan_seed = row_seeds(seed, n, m)
        xp = draw(config.pair, "p", n, p_seed)
        xq = draw(config.pair, "q", m, q_seed)
        est = estimate(config, xp, xq, plan_seed)
        report = l2p_error(config.pair, est.model, config.mc.points, mc_seed(p_seed))
        row.update(
            alpha=est.alpha,
            m=est.m,
            l2p_error=report.l2p_error,
            kernel_evals=est.model.ledger.kernel_evals,
            fit_flops=est.model.ledger.solver_flops,
        )
        if config.mc.embedded_points:
            row["embedded_hk_error"] = embedded_error(
                config.pair, est.model, config.mc.embedded_points, mc_seed(p_seed)
            )
    except ROW_ERRORS as e:
        logger.error(f"Convergence row N={n}, M={m}, seed={seed} failed: {e}")
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def fit_slope(scales: list[float], medians: list[float]) -> float:
    """Least-squares slope of log(median) against log(1/u); nan with fewer than two sizes."""
    pairs = [(u, e) for u, e in zip(scales, medians) if e is not None and e > 0 and math.isfinite(e)]
    if len(pairs) < 2:
        return math.nan
    x = np.log([1.0 / u for u, _ in pairs])
    y = np.log([e for _, e in pairs])
    return float(np.polyfit(x, y, 1)[0])


def run_convergence(
    config: RunConfig, csv_path: Path | None = None, workers: int | None = None
) -> ConvergenceResult:
    """
    Run every (grid point, seed) row and summarize per size.

    Rows are computed by a thread pool and written in grid order through one
    writer; a failed row carries its message in the error column.
    """
    cells = [(n, m, seed) for n, m in config.grid for seed in config.seeds]
    workers = workers or worker_count()
    writer = CsvWriter(csv_path, CONVERGENCE_FIELDS) if csv_path else None

    rows: list[dict[str, Any]] = []
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(lambda cell: convergence_row(config, *cell), cells):
                rows.append(row)
                if writer:
                    writer.write(row)

        scales, medians = [], []
        for n, m in config.grid:
            errors = [
                r["l2p_error"] for r in rows if r["N"] == n and r["M"] == m and not r.get("error")
            ]
            scales.append(sample_scale(n, m))
            medians.append(float(np.median(errors)) if errors else None)

        slope = fit_slope(scales, medians)
        rate = -slope if math.isfinite(slope) else math.nan
        summaries = [
            {
                "kind": "summary",
                "N": n,
                "M": m,
                "median_l2p_error": med,
                "slope": slope,
                "rate_exponent": rate,
                "error": None if med is not None else "no successful rows",
            }
            for (n, m), med in zip(config.grid, medians)
        ]
        if writer:
            for summary in summaries:
                writer.write(summary)
    finally:
        if writer:
            writer.close()

    metric = "l2" if config.selection.regime == "out_of_rkhs" else "hk"
    theory = theory_rate_exponent(config.selection.policy().idx, metric)
    logger.info(f"Convergence: {len(rows)} rows, slope={slope:.4g}")
    return ConvergenceResult(
        rows=rows,
        summaries=summaries,
        slope=slope,
        rate_exponent=rate,
        theory_exponent=theory,
        csv_path=csv_path,
    )


@dataclass
class CostRecord:
    """Deterministic cost of one benchmark fit, plus its wall time."""

    n: int
    m_sub: int
    mode: str
    kernel_evals: int = 0
    solver_flops: int = 0
    wall_seconds: float = 0.0
    error: str | None = None

    @property
    def total_cost(self) -> int:
        return self.kernel_evals + self.solver_flops

    def to_row(self) -> dict[str, Any]:
        return {
            "kind": "row",
            "n": self.n,
            "m_sub": self.m_sub,
            "mode": self.mode,
            "kernel_evals": self.kernel_evals,
            "solver_flops": self.solver_flops,
            "total_cost": self.total_cost,
            "wall_seconds": self.wall_seconds,
            "error": self.error,
        }


@dataclass
class BenchResult:
    records: list[CostRecord]
    exponents: dict[str, float]
    predicted_exponent: float | None = None
    csv_path: Path | None = None
    schedule: str = "ceil(sqrt(N) log N)"

    @property
    def failures(self) -> list[CostRecord]:
        return [r for r in self.records if r.error]


def bench_row(config: RunConfig, n: int, mode: str) -> CostRecord:
    """One benchmark fit with M = N."""
    bench = config.bench
    if mode == "full":
        m_sub = n
        cap = bench.max_full_n
    else:
        m_sub = subsample_schedule(n, bench.s, bench.gamma)
        cap = bench.max_n
    record = CostRecord(n=n, m_sub=m_sub, mode=mode)
    if n > cap:
        record.error = f"N={n} exceeds the configured {mode} cap {cap}"
        logger.error(record.error)
        return record

    try:
        p_seed, q_seed, plan_seed = row_seeds(bench.seed, n, n)
        xp = draw(config.pair, "p", n, p_seed)
        xq = draw(config.pair, "q", n, q_seed)
        kernel = config.kernel.to_spec(xp.dim, xp)
        alpha = choose_alpha(config.selection.policy(), n, n)
        plan = subsample_plan(n, n, m_sub, plan_seed) if mode == "nystrom" else None
        start = time.perf_counter()
        model = fit(kernel, xp, xq, alpha, mode=mode, plan=plan, weighting=config.subsample.weighting)
        record.wall_seconds = time.perf_counter() - start
        record.kernel_evals = model.ledger.kernel_evals
        record.solver_flops = model.ledger.solver_flops
    except ROW_ERRORS as e:
        logger.error(f"Bench row N={n}, mode={mode} failed: {e}")
        record.error = f"{type(e).__name__}: {e}"
    return record


def fit_exponent(records: list[CostRecord]) -> float:
    """Slope of log(total cost) against log(N)."""
    ok = [r for r in records if not r.error and r.total_cost > 0]
    if len(ok) < 2:
        return math.nan
    x = np.log([r.n for r in ok])
    y = np.log([r.total_cost for r in ok])
    return float(np.polyfit(x, y, 1)[0])


def run_bench(config: RunConfig, csv_path: Path | None = None) -> BenchResult:
    """
    Sweep N for the Nystrom and full fits and fit cost exponents.

    Rows run one at a time so wall times are uncontended.
    """
    bench = config.bench
    records = [bench_row(config, n, "nystrom") for n in bench.nystrom_sizes]
    records += [bench_row(config, n, "full") for n in bench.full_sizes]

    exponents = {
        mode: fit_exponent([r for r in records if r.mode == mode]) for mode in ("nystrom", "full")
    }
    predicted = None
    schedule = "ceil(sqrt(N) log N)"
    if bench.s is not None and bench.gamma is not None:
        predicted = cost_exponent(bench.s, bench.gamma)
        schedule = f"ceil(N^((1 - {bench.gamma:g})/({bench.s:g} + 1)) log N)"

    if csv_path:
        with CsvWriter(csv_path, BENCH_FIELDS, comments=[f"nystrom schedule m = {schedule}"]) as writer:
            for record in records:
                writer.write(record.to_row())
            for mode, exponent in exponents.items():
                writer.write(
                    {
                        "kind": "exponent",
                        "mode": mode,
                        "exponent": exponent,
                        "predicted_exponent": predicted if mode == "nystrom" else None,
                    }
                )

    logger.info(f"Bench exponents: {exponents}")
    return BenchResult(
        records=records,
        exponents=exponents,
        predicted_exponent=predicted,
        csv_path=csv_path,
        schedule=schedule,
    )

