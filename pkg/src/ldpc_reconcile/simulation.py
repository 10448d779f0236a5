"""Seeded Monte-Carlo sessions and sweep CSV output."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .channel import BscParams, generate_key_pair
from .ldpc_core import ParityCheckMatrix
from .metrics import AggregateStats, aggregate
from .prng import derive_seed
from .protocol import ProtocolConfig, SessionResult, run_session
from .rate_adapt import reserved_count

SWEEP_COLUMNS = ["e", "M", "N_hat", "p_hat", "s_hat", "pi_hat", "sigma_hat", "f_hat", "FER"]


def trial_seed(master: int, e: float, trial: int) -> int:
    """Per-trial seed; a pure function of its inputs so any trial order works."""
    return derive_seed(master, e, trial)


def simulate_session(code: ParityCheckMatrix, config: ProtocolConfig, e: float, seed: int) -> SessionResult:
    """One reconciliation of a fresh correlated key pair at crossover ``e``."""
    key_len = code.n - reserved_count(code.n, config.delta)
    x, y = generate_key_pair(key_len, BscParams(e, derive_seed(seed, "keys")))
    return run_session(x, y, code, config, seed=derive_seed(seed, "session"))


@dataclass(frozen=True)
class SweepTask:
    e: float
    trial: int
    seed: int


_WORKER_STATE: dict = {}


def _init_worker(code, config):
    _WORKER_STATE["code"] = code
    _WORKER_STATE["config"] = config


def _run_task(task: SweepTask):
    res = simulate_session(_WORKER_STATE["code"], _WORKER_STATE["config"], task.e, task.seed)
    return task.e, task.trial, res.record(task.e)


def run_sweep(code: ParityCheckMatrix, config: ProtocolConfig, grid, trials: int, master_seed: int,
              workers: int = 1) -> list[AggregateStats]:
    """Aggregate ``trials`` sessions per crossover value.

    Records are folded in trial-index order, so ``workers`` never changes
    the output.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = [float(e) for e in grid]
    tasks = [SweepTask(e, t, trial_seed(master_seed, e, t)) for e in grid for t in range(trials)]
    if workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(code, config)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        _init_worker(code, config)
        results = [_run_task(t) for t in tasks]
    by_point: dict[float, list] = {e: [None] * trials for e in grid}
    for e, t, rec in results:
        by_point[e][t] = rec
    return [aggregate(by_point[e]) for e in grid]


def _fmt(value, fmt: str) -> str:
    return "" if value is None else format(value, fmt)


def sweep_csv(stats: list[AggregateStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for st in stats:
        writer.writerow([
            f"{st.e:g}", st.m, f"{st.n_hat:.4f}", f"{st.p_hat:.2f}", f"{st.s_hat:.2f}",
            _fmt(st.pi_hat, ".6f"), _fmt(st.sigma_hat, ".6f"), _fmt(st.f_hat, ".6f"), f"{st.fer:.4f}",
        ])
    return buf.getvalue()
