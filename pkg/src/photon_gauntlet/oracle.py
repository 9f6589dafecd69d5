"""Exact brute-force enumeration of photon histories on small instances.

All arithmetic is done on :class:`fractions.Fraction`. Every finite float is
a dyadic rational, so converting the inputs with ``Fraction(x)`` is exact and
the enumerated probabilities are the exact values for the doubles the
engine sees. Nothing here calls into :mod:`photon_gauntlet.analytic` to
compute a probability; the analytic engine is only consulted by
:func:`cross_check` to be compared against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import analytic
from .analytic import ABS_TOL, QVector

__all__ = [
    "MAX_ABSORBERS_BUNCHED",
    "MAX_ABSORBERS_SEPARATE",
    "MAX_PHOTONS",
    "CrossCheckReport",
    "ExactDistribution",
    "InstanceTooLarge",
    "OracleVerdict",
    "cross_check",
    "enumerate_bunched",
    "enumerate_separate",
    "oracle_inequality",
]

MAX_PHOTONS = 12
MAX_ABSORBERS_SEPARATE = 8
MAX_ABSORBERS_BUNCHED = 16


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ExactDistribution:
    """Exact mass over detected counts, plus the survivor-count marginal."""

    outcomes: dict[int, Fraction]
    survivors: dict[int, Fraction] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return max(self.outcomes)

    @property
    def total(self) -> Fraction:
        return sum(self.outcomes.values(), Fraction(0))

    def at_least(self, m: int) -> Fraction:
        return sum((p for c, p in self.outcomes.items() if c >= m), Fraction(0))

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(self.outcomes.get(m, 0)) for m in range(self.k + 1))

    def survivors_as_floats(self) -> tuple[float, ...]:
        return tuple(float(self.survivors.get(s, 0)) for s in range(self.k + 1))


def _exact(qv: QVector) -> tuple[list[Fraction], Fraction]:
    return [Fraction(q) for q in qv.absorber_qs], Fraction(qv.detector_q)


def _guard(k: int, n_absorbers: int, max_absorbers: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_PHOTONS or n_absorbers > max_absorbers:
        raise InstanceTooLarge(
            f"instance K={k}, A={n_absorbers} exceeds oracle limits "
            f"K<={MAX_PHOTONS}, A<={max_absorbers}"
        )


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative ints summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def _multinomial(counts: tuple[int, ...]) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def enumerate_separate(qv: QVector, k: int) -> ExactDistribution:
    """Exact detected-count law for k photons emitted one at a time.

    A single photon has A + 2 fates: captured at shell 1..A, reaching the
    detector and registering, or reaching it and passing unregistered.
    Photons are independent, so the k-photon law is the multinomial over
    fate counts.
    """
    _guard(k, qv.n_absorbers, MAX_ABSORBERS_SEPARATE)
    qs, q_d = _exact(qv)

    fates: list[Fraction] = []
    alive = Fraction(1)
    for q in qs:
        fates.append(alive * q)
        alive *= 1 - q
    fates.append(alive * q_d)
    fates.append(alive * (1 - q_d))
    n_fates = len(fates)

    outcomes = {m: Fraction(0) for m in range(k + 1)}
    survivors = {s: Fraction(0) for s in range(k + 1)}
    for counts in _compositions(k, n_fates):
        p = Fraction(_multinomial(counts))
        for c, f in zip(counts, fates):
            if c:
                p *= f**c
        if not p:
            continue
        detected = counts[-2]
        outcomes[detected] += p
        survivors[detected + counts[-1]] += p
    return ExactDistribution(outcomes, survivors)


def enumerate_bunched(qv: QVector, k: int) -> ExactDistribution:
    """Exact detected-count law for a bunch of k photons.

    Walks all 2^A capture/no-capture histories. A shell facing s photons
    captures one of them with probability 1 - (1 - q)^s.
    """
    _guard(k, qv.n_absorbers, MAX_ABSORBERS_BUNCHED)
    qs, q_d = _exact(qv)

    survivors = {s: Fraction(0) for s in range(k + 1)}
    for history in itertools.product((False, True), repeat=len(qs)):
        p = Fraction(1)
        s = k
        for q, captured in zip(qs, history):
            miss = (1 - q) ** s
            if captured:
                p *= 1 - miss
                s -= 1
            else:
                p *= miss
            if not p:
                break
        if p:
            survivors[s] += p

    outcomes = {m: Fraction(0) for m in range(k + 1)}
    for s, ps in survivors.items():
        if not ps:
            continue
        for m in range(s + 1):
            outcomes[m] += ps * math.comb(s, m) * q_d**m * (1 - q_d) ** (s - m)
    return ExactDistribution(outcomes, survivors)


@dataclass(frozen=True)
class OracleVerdict:
    p_separate: Fraction
    p_bunched: Fraction
    p_vacuum: Fraction
    vacuum_power_bound: Fraction
    event_m: int

    @property
    def ordering_holds(self) -> bool:
        tol = Fraction(ABS_TOL)
        return (
            self.p_bunched - self.p_separate > tol
            and self.p_bunched <= self.p_vacuum + tol
            and self.p_bunched - self.vacuum_power_bound > tol
        )


def oracle_inequality(qv: QVector, k: int) -> OracleVerdict:
    """Separate / bunched / vacuum comparison evaluated from enumerations only."""
    m = max(1, k - qv.n_absorbers)
    vacuum = QVector((), qv.detector_q)
    return OracleVerdict(
        p_separate=enumerate_separate(qv, k).at_least(m),
        p_bunched=enumerate_bunched(qv, k).at_least(m),
        p_vacuum=enumerate_separate(vacuum, k).at_least(m),
        vacuum_power_bound=Fraction(qv.detector_q) ** m,
        event_m=m,
    )


@dataclass(frozen=True)
class CrossCheckReport:
    deviations: dict[str, float]
    tol: float
    oracle: OracleVerdict
    analytic: analytic.InequalityVerdict
    totals_exact: bool

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())

    @property
    def passed(self) -> bool:
        return self.totals_exact and self.max_deviation <= self.tol

    @property
    def ordering_holds(self) -> bool:
        return self.oracle.ordering_holds


def _max_abs(a, b) -> float:
    return max(abs(float(x) - float(y)) for x, y in zip(a, b, strict=True))


def cross_check(qv: QVector, k: int, tol: float = ABS_TOL) -> CrossCheckReport:
    """Compare enumerations with the closed forms, entry by entry.

    Failures are report content; only oversize instances raise.
    """
    sep = enumerate_separate(qv, k)
    bun = enumerate_bunched(qv, k)
    verdict = oracle_inequality(qv, k)
    closed = analytic.inequality_report(qv, k)

    p_n = analytic.detect_probability_product(qv)
    deviations = {
        "separate_pmf": _max_abs(sep.as_floats(), analytic.m_of_k_distribution(p_n, k).probabilities),
        "bunched_survivors": _max_abs(
            bun.survivors_as_floats(), analytic.bunched_survivor_distribution(qv, k).probabilities
        ),
        "bunched_pmf": _max_abs(bun.as_floats(), analytic.bunched_count_distribution(qv, k).probabilities),
        "p_separate": abs(float(verdict.p_separate) - closed.p_separate),
        "p_bunched": abs(float(verdict.p_bunched) - closed.p_bunched),
        "p_vacuum": abs(float(verdict.p_vacuum) - closed.p_vacuum),
    }
    return CrossCheckReport(
        deviations=deviations,
        tol=tol,
        oracle=verdict,
        analytic=closed,
        totals_exact=sep.total == 1 and bun.total == 1,
    )
