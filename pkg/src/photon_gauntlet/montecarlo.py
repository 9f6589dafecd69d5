"""Seeded Monte Carlo over photon fates, separate streams and bunches.

Randomness is counter-based: a Philox generator keyed by the experiment
seed, with the block (or trial) index placed in the top word of the
counter. Trials are split into fixed-size blocks independent of the worker
count, so every block draws the same numbers whichever process runs it and
tallies are plain integer sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import QVector

__all__ = [
    "BLOCK_TRIALS",
    "EmpiricalDistribution",
    "ExperimentResult",
    "TrialBatch",
    "TrialOutcome",
    "block_stream",
    "run_experiment",
    "run_trial_bunched",
    "run_trial_separate",
    "simulate",
    "simulate_block",
    "trial_stream",
]

BLOCK_TRIALS = 16384
MODES = ("separate", "bunched")

_U64 = 2**64


def _philox(seed: int, word2: int, word3: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed % _U64, counter=[0, 0, word2, word3]))


def block_stream(seed: int, block: int) -> np.random.Generator:
    return _philox(seed, 0, block)


def trial_stream(seed: int, index: int) -> np.random.Generator:
    """Stream for a single trial, disjoint from every block stream."""
    return _philox(seed, 1, index)


@dataclass(frozen=True)
class TrialOutcome:
    detected: int
    absorbed_at: tuple[int, ...]
    survivors_at_detector: int


def run_trial_separate(qv: QVector, k: int, stream: np.random.Generator) -> TrialOutcome:
    absorbed = [0] * qv.n_absorbers
    survivors = 0
    detected = 0
    for _ in range(k):
        for j, q in enumerate(qv.absorber_qs):
            if stream.random() < q:
                absorbed[j] += 1
                break
        else:
            survivors += 1
            if stream.random() < qv.detector_q:
                detected += 1
    return TrialOutcome(detected, tuple(absorbed), survivors)


def run_trial_bunched(qv: QVector, k: int, stream: np.random.Generator) -> TrialOutcome:
    absorbed = [0] * qv.n_absorbers
    s = k
    for j, q in enumerate(qv.absorber_qs):
        if s and stream.random() < 1.0 - (1.0 - q) ** s:
            absorbed[j] = 1
            s -= 1
    detected = int(stream.binomial(s, qv.detector_q))
    return TrialOutcome(detected, tuple(absorbed), s)


@dataclass
class TrialBatch:
    """Per-trial arrays for one block: ``absorbed`` is (trials, A)."""

    detected: np.ndarray
    survivors: np.ndarray
    absorbed: np.ndarray


def simulate(qv: QVector, k: int, mode: str, n: int, rng: np.random.Generator) -> TrialBatch:
    """Vectorized trials over ``n`` independent realizations."""
    if mode not in MODES:
        raise ValueError(f"unknown emission mode {mode!r}")
    s = np.full(n, k, dtype=np.int64)
    absorbed = np.zeros((n, qv.n_absorbers), dtype=np.int64)
    for j, q in enumerate(qv.absorber_qs):
        if mode == "separate":
            # independent photons: the captured count is Binomial(s, q)
            caught = rng.binomial(s, q)
        else:
            caught = (rng.random(n) < 1.0 - (1.0 - q) ** s).astype(np.int64)
        absorbed[:, j] = caught
        s = s - caught
    detected = rng.binomial(s, qv.detector_q)
    return TrialBatch(detected.astype(np.int64), s, absorbed)


def simulate_block(qv: QVector, k: int, mode: str, seed: int, block: int, n: int) -> TrialBatch:
    return simulate(qv, k, mode, n, block_stream(seed, block))


@dataclass(frozen=True)
class EmpiricalDistribution:
    counts: tuple[int, ...]
    trials: int
    seed: int
    path: str = "montecarlo"

    @property
    def k(self) -> int:
        return len(self.counts) - 1

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(c / self.trials for c in self.counts)

    def at_least(self, m: int) -> int:
        """Tally of trials with at least ``m`` detections."""
        return sum(self.counts[max(m, 0):])


@dataclass(frozen=True)
class ExperimentResult:
    mode: str
    k: int
    distribution: EmpiricalDistribution
    survivor_counts: tuple[int, ...]
    absorbed_totals: tuple[int, ...]
    # largest single-trial capture count per shell
    absorbed_max: tuple[int, ...]

    @property
    def min_survivors(self) -> int:
        return next(s for s, c in enumerate(self.survivor_counts) if c)

    @property
    def photons_detected(self) -> int:
        return sum(m * c for m, c in enumerate(self.distribution.counts))


def _tally_block(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    qv, k, mode, seed, block, n = args
    batch = simulate_block(qv, k, mode, seed, block, n)
    if qv.n_absorbers:
        totals = batch.absorbed.sum(axis=0)
        maxima = batch.absorbed.max(axis=0)
    else:
        totals = maxima = np.zeros(0, dtype=np.int64)
    return (
        np.bincount(batch.detected, minlength=k + 1),
        np.bincount(batch.survivors, minlength=k + 1),
        totals,
        maxima,
    )


def run_experiment(
    qv: QVector,
    k: int,
    mode: str,
    trials: int,
    seed: int,
    workers: int = 1,
) -> ExperimentResult:
    """Run ``trials`` independent trials; output depends only on the
    arguments other than ``workers``."""
    if trials < 1:
        raise ValueError("empty-experiment: trials must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown emission mode {mode!r}")
    n_blocks = math.ceil(trials / BLOCK_TRIALS)
    jobs = [
        (qv, k, mode, seed, b, min(BLOCK_TRIALS, trials - b * BLOCK_TRIALS))
        for b in range(n_blocks)
    ]
    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_tally_block, jobs))
    else:
        parts = [_tally_block(job) for job in jobs]

    detected = np.zeros(k + 1, dtype=np.int64)
    survivors = np.zeros(k + 1, dtype=np.int64)
    totals = np.zeros(qv.n_absorbers, dtype=np.int64)
    maxima = np.zeros(qv.n_absorbers, dtype=np.int64)
    for det, surv, tot, mx in parts:
        detected += det
        survivors += surv
        totals += tot
        maxima = np.maximum(maxima, mx)
    return ExperimentResult(
        mode=mode,
        k=k,
        distribution=EmpiricalDistribution(tuple(int(c) for c in detected), trials, seed),
        survivor_counts=tuple(int(c) for c in survivors),
        absorbed_totals=tuple(int(c) for c in totals),
        absorbed_max=tuple(int(c) for c in maxima),
    )
