"""Closed-form detection statistics for photons crossing capacity-1 absorbers.

Absorbers are indexed 1..A from the source outward; index A+1 is the
detector surface. Every shell carries a vacuum interaction probability q_j,
the detector carries q_D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ABS_TOL",
    "CountDistribution",
    "InequalityVerdict",
    "QVector",
    "SurvivorDistribution",
    "absorb_probability",
    "all_k_detect",
    "binomial_pmf",
    "binomial_tail",
    "bunched_count_distribution",
    "bunched_detect_at_least",
    "bunched_survivor_distribution",
    "detect_probability_product",
    "detect_probability_recurrent",
    "event_count",
    "inequality_report",
    "m_of_k_distribution",
    "ordering_verdict",
    "reach_probability",
]

# margin for every strict comparison in verdicts
ABS_TOL = 1e-12

# above this K the float running-product coefficients would overflow
_DIRECT_COEFF_MAX_K = 1000


def _check_probability(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class QVector:
    absorber_qs: tuple[float, ...]
    detector_q: float

    def __post_init__(self):
        object.__setattr__(self, "absorber_qs", tuple(float(q) for q in self.absorber_qs))
        object.__setattr__(self, "detector_q", float(self.detector_q))
        for j, q in enumerate(self.absorber_qs, start=1):
            _check_probability(q, f"q_{j}")
        _check_probability(self.detector_q, "q_D")

    @property
    def n_absorbers(self) -> int:
        return len(self.absorber_qs)


@dataclass(frozen=True)
class CountDistribution:
    """Probability mass over detected counts 0..len(probabilities)-1."""

    probabilities: tuple[float, ...]
    path: str = "analytic"

    @property
    def k(self) -> int:
        return len(self.probabilities) - 1

    def at_least(self, m: int) -> float:
        return math.fsum(self.probabilities[max(m, 0):])

    def __getitem__(self, m: int) -> float:
        return self.probabilities[m]

    def __len__(self) -> int:
        return len(self.probabilities)


@dataclass(frozen=True)
class SurvivorDistribution:
    """Probability mass over the bunch size reaching the detector surface."""

    probabilities: tuple[float, ...]
    n_absorbers: int

    @property
    def k(self) -> int:
        return len(self.probabilities) - 1

    @property
    def floor(self) -> int:
        return max(0, self.k - self.n_absorbers)

    def __getitem__(self, s: int) -> float:
        return self.probabilities[s]


@dataclass(frozen=True)
class InequalityVerdict:
    p_separate: float
    p_bunched: float
    p_vacuum: float
    vacuum_power_bound: float
    ordering_holds: bool
    event_m: int
    # no absorber removes anything: all three paths coincide
    degenerate_vacuum: bool = field(default=False)

    def line(self) -> str:
        return (
            f"p_separate={self.p_separate:.6f} p_bunched={self.p_bunched:.6f} "
            f"p_vacuum={self.p_vacuum:.6f} bound={self.vacuum_power_bound:.6f} "
            f"ordering_holds={'true' if self.ordering_holds else 'false'}"
        )


# -- single photon ---------------------------------------------------------


def reach_probability(qv: QVector, index: int) -> float:
    """P(r_index): chance an emitted photon arrives at surface ``index``
    uncaptured. ``index`` runs 1..A+1, the last being the detector."""
    if not 1 <= index <= qv.n_absorbers + 1:
        raise IndexError(f"surface index {index} outside 1..{qv.n_absorbers + 1}")
    p = 1.0
    for q in qv.absorber_qs[: index - 1]:
        p *= 1.0 - q
    return p


def absorb_probability(qv: QVector, n: int) -> float:
    if not 1 <= n <= qv.n_absorbers:
        raise IndexError(f"absorber index {n} outside 1..{qv.n_absorbers}")
    return reach_probability(qv, n) * qv.absorber_qs[n - 1]


def detect_probability_recurrent(qv: QVector) -> float:
    """Detection probability via the running sum of upstream absorptions.

    Each P(n) is built from the sum of all earlier P(j), exactly as the
    recurrence is stated; nothing is taken from the product form.
    """
    absorbed = 0.0
    for q in qv.absorber_qs:
        p_n = (1.0 - absorbed) * q
        absorbed += p_n
    return (1.0 - absorbed) * qv.detector_q


def detect_probability_product(qv: QVector) -> float:
    p = qv.detector_q
    for q in qv.absorber_qs:
        p *= 1.0 - q
    return p


def all_k_detect(p_n: float, k: int) -> float:
    _check_probability(p_n, "p_n")
    if k < 1:
        raise ValueError("k must be >= 1")
    return p_n**k


# -- binomial helpers ------------------------------------------------------


def _mode_anchored_pmf(k: int, p: float) -> np.ndarray:
    # successive-term ratios walked outward from the mode, then normalized
    mode = min(k, int((k + 1) * p))
    odds = p / (1.0 - p)
    out = np.zeros(k + 1)
    out[mode] = 1.0
    for m in range(mode, k):
        out[m + 1] = out[m] * (k - m) / (m + 1) * odds
        if out[m + 1] < 1e-300:
            break
    for m in range(mode, 0, -1):
        out[m - 1] = out[m] * m / (k - m + 1) / odds
        if out[m - 1] < 1e-300:
            break
    return out / math.fsum(out)


def _binomial_coefficients(k: int) -> list[float]:
    coeffs = [1.0]
    c = 1.0
    for m in range(k):
        c = c * (k - m) / (m + 1)
        coeffs.append(c)
    return coeffs


def binomial_pmf(k: int, p: float) -> np.ndarray:
    """Binomial(k, p) mass over 0..k.

    Coefficients come from a multiplicative running product. Past
    k = 1000 the coefficients overflow a double, so the terms are instead
    chained by their ratios starting at the mode and normalized, which
    keeps K in the millions accurate.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _check_probability(p, "p")
    out = np.zeros(k + 1)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[k] = 1.0
        return out
    m = np.arange(k + 1)
    if k <= _DIRECT_COEFF_MAX_K:
        coeffs = np.array(_binomial_coefficients(k))
        return coeffs * p**m * (1.0 - p) ** (k - m)
    return _mode_anchored_pmf(k, p)


def binomial_tail(k: int, p: float, m: int) -> float:
    """P(Binomial(k, p) >= m)."""
    if m <= 0:
        return 1.0
    if m > k:
        return 0.0
    return math.fsum(binomial_pmf(k, p)[m:])


def m_of_k_distribution(p_n: float, k: int) -> CountDistribution:
    if k < 1:
        raise ValueError("k must be >= 1")
    return CountDistribution(tuple(float(x) for x in binomial_pmf(k, p_n)))


# -- bunches ---------------------------------------------------------------


def bunched_survivor_distribution(qv: QVector, k: int) -> SurvivorDistribution:
    """Distribution of the bunch size after all absorbers.

    Forward DP over the bunch size: at shell j a bunch of s photons loses
    exactly one with probability 1 - (1 - q_j)^s and is untouched otherwise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    dist = np.zeros(k + 1)
    dist[k] = 1.0
    sizes = np.arange(k + 1)
    for q in qv.absorber_qs:
        miss = (1.0 - q) ** sizes
        nxt = dist * miss
        nxt[:-1] += dist[1:] * (1.0 - miss[1:])
        dist = nxt
    return SurvivorDistribution(tuple(float(x) for x in dist), qv.n_absorbers)


def bunched_count_distribution(qv: QVector, k: int) -> CountDistribution:
    """Detected-count distribution for a bunch and a multiphoton detector
    registering each survivor independently with probability q_D."""
    survivors = bunched_survivor_distribution(qv, k)
    out = np.zeros(k + 1)
    for s, ps in enumerate(survivors.probabilities):
        if ps:
            out[: s + 1] += ps * binomial_pmf(s, qv.detector_q)
    return CountDistribution(tuple(float(x) for x in out))


def bunched_detect_at_least(qv: QVector, k: int, m: int) -> float:
    if m > k:
        raise ValueError(f"m={m} exceeds bunch size k={k}")
    survivors = bunched_survivor_distribution(qv, k)
    return math.fsum(
        ps * binomial_tail(s, qv.detector_q, m) for s, ps in enumerate(survivors.probabilities)
    )


def event_count(n_absorbers: int, k: int) -> int:
    """Largest detected count a bunch of k can still guarantee to deliver,
    never below one."""
    return max(1, k - n_absorbers)


def ordering_verdict(p_separate, p_bunched, p_vacuum, bound, tol: float = ABS_TOL) -> bool:
    return bool(
        p_bunched - p_separate > tol
        and p_bunched <= p_vacuum + tol
        and p_bunched - bound > tol
    )


def inequality_report(qv: QVector, k: int) -> InequalityVerdict:
    """Separate stream vs bunch vs vacuum for the event "at least M detected",
    M = max(1, K - A)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = event_count(qv.n_absorbers, k)
    p_sep = binomial_tail(k, detect_probability_product(qv), m)
    p_bun = bunched_detect_at_least(qv, k, m)
    p_vac = binomial_tail(k, qv.detector_q, m)
    bound = qv.detector_q**m
    return InequalityVerdict(
        p_separate=p_sep,
        p_bunched=p_bun,
        p_vacuum=p_vac,
        vacuum_power_bound=bound,
        ordering_holds=ordering_verdict(p_sep, p_bun, p_vac, bound),
        event_m=m,
        degenerate_vacuum=all(q == 0.0 for q in qv.absorber_qs),
    )

