"""Count-distribution summaries, interval estimates, goodness of fit, and the
bunched-vs-separate survival ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from .analytic import CountDistribution, InequalityVerdict
from .montecarlo import EmpiricalDistribution

__all__ = [
    "ComparisonReport",
    "SummaryStats",
    "UndefinedRatioError",
    "bunching_amplification",
    "compare_to_analytic",
    "summarize",
    "wilson_interval",
]

MIN_EXPECTED = 5.0


class UndefinedRatioError(ZeroDivisionError):
    """Separate-stream survival is zero; the bunched numerator is kept."""

    def __init__(self, numerator: float):
        self.numerator = numerator
        super().__init__(f"separate-stream probability is 0 (bunched numerator {numerator!r})")


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    variance: float
    fano: float
    mandel_q: float

    @property
    def fano_defined(self) -> bool:
        return not math.isnan(self.fano)


def _pmf(dist) -> np.ndarray:
    return np.asarray(dist.probabilities, dtype=float)


def summarize(dist: CountDistribution | EmpiricalDistribution) -> SummaryStats:
    """Mean, variance, Fano factor and Mandel Q of a count distribution.

    Fano and Mandel Q come back as NaN when the mean is zero.
    """
    p = _pmf(dist)
    if p.size == 0:
        raise ValueError("empty distribution")
    m = np.arange(p.size)
    mean = math.fsum(m * p)
    variance = max(math.fsum((m - mean) ** 2 * p), 0.0)
    if mean > 0:
        fano = variance / mean
        return SummaryStats(mean, variance, fano, fano - 1.0)
    return SummaryStats(mean, variance, math.nan, math.nan)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in 0..trials")
    if not z > 0:
        raise ValueError("z must be positive")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class ComparisonReport:
    z_scores: tuple[float, ...]
    chi_square: float
    dof: int
    p_value: float
    max_abs_deviation: float
    tol_z: float
    passed: bool
    inequality: InequalityVerdict | None = None


def _z_score(observed: float, expected: float, trials: int) -> float:
    se = math.sqrt(expected * (1.0 - expected) / trials)
    if se == 0.0:
        return 0.0 if observed == expected else math.inf
    return (observed - expected) / se


def _merged_cells(observed: np.ndarray, expected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # cells below the expected-tally floor are pooled; a pool still too
    # small is folded into the smallest regular cell
    small = expected < MIN_EXPECTED
    obs = list(observed[~small])
    exp = list(expected[~small])
    if small.any():
        pooled_obs, pooled_exp = observed[small].sum(), expected[small].sum()
        if pooled_exp >= MIN_EXPECTED or not exp:
            obs.append(pooled_obs)
            exp.append(pooled_exp)
        else:
            i = int(np.argmin(exp))
            obs[i] += pooled_obs
            exp[i] += pooled_exp
    return np.array(obs, dtype=float), np.array(exp, dtype=float)


def compare_to_analytic(
    empirical: EmpiricalDistribution,
    analytic: CountDistribution,
    tol_z: float = 4.0,
    inequality: InequalityVerdict | None = None,
) -> ComparisonReport:
    """Per-count z-scores with binomial standard errors, plus a chi-square
    over cells whose expected tally is at least 5. Passes when every
    ``|z| <= tol_z``."""
    if len(empirical.counts) != len(analytic.probabilities):
        raise ValueError(
            f"mismatched supports: {len(empirical.counts)} vs {len(analytic.probabilities)} cells"
        )
    n = empirical.trials
    observed = np.asarray(empirical.counts, dtype=float)
    expected_p = _pmf(analytic)
    z = tuple(_z_score(o / n, e, n) for o, e in zip(observed, expected_p))

    obs, exp = _merged_cells(observed, expected_p * n)
    if exp.size >= 2 and np.all(exp > 0):
        chi2 = float(np.sum((obs - exp) ** 2 / exp))
        dof = exp.size - 1
        p_value = float(_sps.chi2.sf(chi2, dof))
    else:
        chi2, dof, p_value = 0.0, 0, 1.0
    return ComparisonReport(
        z_scores=z,
        chi_square=chi2,
        dof=dof,
        p_value=p_value,
        max_abs_deviation=float(np.max(np.abs(observed / n - expected_p))),
        tol_z=tol_z,
        passed=all(abs(v) <= tol_z for v in z),
        inequality=inequality,
    )


def bunching_amplification(sep, bunch, m: int) -> float:
    """P_bunch(detected >= m) / P_sep(detected >= m).

    Both arguments are count distributions over the same K. Raises
    UndefinedRatioError when the separate stream never reaches m.
    """
    p_sep, p_bun = _pmf(sep), _pmf(bunch)
    if p_sep.size != p_bun.size:
        raise ValueError("distributions cover different photon numbers")
    if m < 1:
        raise ValueError("m must be >= 1")
    num = math.fsum(p_bun[m:])
    den = math.fsum(p_sep[m:])
    if den == 0.0:
        raise UndefinedRatioError(num)
    return num / den
