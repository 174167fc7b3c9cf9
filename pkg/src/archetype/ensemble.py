"""Many seeded solver runs and the fit-then-coherence model selection."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from archetype import edaa
from archetype.core import DataError, Prng
from archetype.criteria import coherence, fit_l1

__all__ = [
    "DEFAULT_GAMMA_SET",
    "EnsembleConfig",
    "EnsembleError",
    "RunRecord",
    "SelectionReport",
    "coherence",
    "fit_l1",
    "run_ensemble",
    "sample_gamma",
    "select_model",
    "worker_count",
]

log = logging.getLogger(__name__)

DEFAULT_GAMMA_SET = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
THREADS_ENV = "ARCHETYPE_THREADS"


class EnsembleError(RuntimeError):
    """Every run of the ensemble failed."""


@dataclass(frozen=True)
class EnsembleConfig:
    solver: edaa.SolverConfig
    runs: int = 50
    base_seed: int = 0
    gamma_set: tuple[float, ...] = DEFAULT_GAMMA_SET
    fit_slack: float = 1.05

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError(f"need at least one run, got {self.runs}")
        if not self.fit_slack >= 1.0:
            raise ValueError(f"fit_slack must be >= 1, got {self.fit_slack}")
        gs = tuple(float(g) for g in self.gamma_set)
        if not gs or any(not g > 0 for g in gs):
            raise ValueError("gamma_set must be a non-empty list of positive values")
        object.__setattr__(self, "gamma_set", gs)

    def run_config(self, index: int) -> edaa.SolverConfig:
        """Solver settings of run ``index``: seed ``base_seed + index`` and a
        step factor drawn from that seed's stream."""
        seed = self.base_seed + index
        gamma = sample_gamma(Prng(seed), self.gamma_set)
        return replace(self.solver, gamma=gamma, seed=seed)


@dataclass
class RunRecord:
    index: int
    seed: int
    gamma: float
    fit_l1: float | None
    coherence: float | None
    wall_ms: float
    error: str | None = None


@dataclass
class SelectionReport:
    per_run: list[RunRecord]
    candidate_set: list[int]
    selected: int
    fit_min: float
    failures: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_run": [asdict(r) for r in self.per_run],
            "candidate_set": list(self.candidate_set),
            "selected": self.selected,
            "fit_min": self.fit_min,
            "failures": list(self.failures),
        }


def sample_gamma(rng: Prng, gamma_set) -> float:
    """Uniform pick from ``gamma_set`` using one draw of ``rng``."""
    if len(gamma_set) == 0:
        raise ValueError("empty gamma set")
    idx = int(rng.next_unit() * len(gamma_set))
    return float(gamma_set[min(idx, len(gamma_set) - 1)])


def select_model(fits, coherences, fit_slack: float = 1.05):
    """Keep runs whose l1 fit is within ``fit_slack`` of the best, then take
    the least coherent one (lowest index on ties).

    Entries that are None or NaN mark failed runs and are ignored. Returns
    ``(candidates, selected, fit_min)``.
    """
    fits = np.array([np.nan if f is None else f for f in fits], dtype=float)
    mus = np.array([np.nan if m is None else m for m in coherences], dtype=float)
    if fits.shape != mus.shape:
        raise ValueError("fits and coherences differ in length")
    ok = np.isfinite(fits) & np.isfinite(mus)
    if not ok.any():
        raise EnsembleError("no successful run to select from")
    fit_min = float(fits[ok].min())
    candidates = [i for i in np.flatnonzero(ok) if fits[i] <= fit_slack * fit_min]
    selected = min(candidates, key=lambda i: (mus[i], i))
    return [int(i) for i in candidates], int(selected), fit_min


def worker_count(workers: int | None = None) -> int:
    """Resolve the pool size; None reads ARCHETYPE_THREADS, 0 means all cores."""
    if workers is None:
        try:
            workers = int(os.environ.get(THREADS_ENV, "0"))
        except ValueError:
            log.warning("ignoring non-integer %s", THREADS_ENV)
            workers = 0
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _execute(x, config: EnsembleConfig, index: int):
    solver = config.run_config(index)
    start = time.perf_counter()
    try:
        result = edaa.run(x, solver)
        error = None
    except (ArithmeticError, DataError) as exc:
        result, error = None, f"{type(exc).__name__}: {exc}"
    wall_ms = (time.perf_counter() - start) * 1e3
    record = RunRecord(
        index=index,
        seed=solver.seed,
        gamma=solver.gamma,
        fit_l1=None if result is None else result.fit_l1,
        coherence=None if result is None else result.coherence,
        wall_ms=wall_ms,
        error=error,
    )
    return result, record


def run_ensemble(x, config: EnsembleConfig, workers: int | None = None):
    """Run ``config.runs`` seeded solves and select one.

    Runs execute on a thread pool with BLAS pinned to one thread, so the
    output does not depend on ``workers``. Returns ``(result, report)``.
    """
    n_workers = min(worker_count(workers), config.runs)
    with threadpool_limits(limits=1, user_api="blas"):
        if n_workers == 1:
            outcomes = [_execute(x, config, m) for m in range(config.runs)]
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                outcomes = list(pool.map(lambda m: _execute(x, config, m), range(config.runs)))

    results = [o[0] for o in outcomes]
    records = [o[1] for o in outcomes]
    failures = [r.index for r in records if r.error is not None]
    for m in failures:
        log.warning("run %d (seed %d, gamma %g) failed: %s", m, records[m].seed, records[m].gamma, records[m].error)
    if len(failures) == len(records):
        detail = "; ".join(f"run {r.index}: {r.error}" for r in records)
        raise EnsembleError(f"all {len(records)} runs failed: {detail}")

    candidates, selected, fit_min = select_model(
        [r.fit_l1 for r in records], [r.coherence for r in records], config.fit_slack
    )
    report = SelectionReport(records, candidates, selected, fit_min, failures)
    return results[selected], report
