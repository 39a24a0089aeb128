"""Maximum-likelihood multi-hypothesis detection of transmit power levels.

Prior-sufficient path: candidate power levels and the noise variance are
known. The averaged-energy statistic of n complex samples is modeled as
Gaussian with mean mu_i = sigma^2 + P_i and variance mu_i^2 / n under
hypothesis i; decisions maximize the (prior-weighted) likelihood. Closed
form metrics integrate each hypothesis's Gaussian over the decision
regions, so theory and the Monte-Carlo decision path can be compared at
Monte-Carlo resolution.

Metrics follow the three-probability convention: false alarm (declare
active when idle), detection (declare active when active, averaged over
active levels), and discrimination (identify the exact level, averaged
over active levels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

__all__ = [
    "HypothesisSet",
    "DetectionMetrics",
    "MetricCurve",
    "ml_decide",
    "ml_decide_batch",
    "decision_regions",
    "theoretical_metrics",
    "simulated_metrics",
    "metric_curve",
]


@dataclass(frozen=True)
class HypothesisSet:
    """Noise variance plus the sorted candidate power levels (level 0 = idle)."""

    noise_variance: float
    power_levels: tuple[float, ...]
    priors: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError(f"noise_variance must be > 0, got {self.noise_variance}")
        levels = tuple(float(p) for p in self.power_levels)
        object.__setattr__(self, "power_levels", levels)
        if len(levels) == 0:
            raise ValueError("hypothesis set must contain at least the idle level")
        if levels[0] != 0.0:
            raise ValueError(f"first power level must be exactly 0, got {levels[0]}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"power levels must be strictly increasing, got {levels}")
        if self.priors is not None:
            pri = tuple(float(p) for p in self.priors)
            object.__setattr__(self, "priors", pri)
            if len(pri) != len(levels):
                raise ValueError("priors length must match power levels")
            if any(p < 0 for p in pri):
                raise ValueError("priors must be non-negative")
            if abs(sum(pri) - 1.0) > 1e-9:
                raise ValueError(f"priors must sum to 1 within 1e-9, got sum {sum(pri)}")

    @property
    def n_levels(self) -> int:
        return len(self.power_levels)

    def means(self) -> np.ndarray:
        return self.noise_variance + np.asarray(self.power_levels)

    def log_priors(self) -> np.ndarray:
        if self.priors is None:
            return np.zeros(self.n_levels)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.priors))


@dataclass(frozen=True)
class DetectionMetrics:
    """Pfa/Pd/Pdisc at one sample count; Pd/Pdisc are None when no active level exists."""

    p_false_alarm: float
    p_detection: float | None
    p_discrimination: float | None
    sample_count: int
    confusion: np.ndarray | None = None  # confusion[true, decided]


@dataclass(frozen=True)
class MetricCurve:
    """Theoretical metrics over a sample-count grid with monotonicity diagnostics."""

    points: list[DetectionMetrics]
    n_grid: tuple[int, ...]
    pd_nondecreasing: bool
    pdisc_nondecreasing: bool
    pdisc_le_pd: bool


def _check_n(n_samples: int) -> int:
    n = int(n_samples)
    if n < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    return n


def _scores(energy: np.ndarray, hyp: HypothesisSet, n: int, active_only: bool) -> np.ndarray:
    """Log prior + Gaussian log-likelihood per hypothesis, shape (m, L)."""
    mu = hyp.means()
    var = mu * mu / n
    logp = hyp.log_priors()
    s = logp - 0.5 * np.log(var) - (energy[:, None] - mu[None, :]) ** 2 / (2.0 * var[None, :])
    if active_only:
        s[:, 0] = -np.inf
    return s


def _np_threshold(hyp: HypothesisSet, n: int, fix_pfa: float) -> float:
    """Neyman-Pearson idle threshold: P(T > t | idle) = fix_pfa under the Gaussian model."""
    if not 0.0 < fix_pfa < 1.0:
        raise ValueError(f"fix_pfa must be in (0, 1), got {fix_pfa}")
    mu0 = hyp.noise_variance
    return mu0 + math.sqrt(mu0 * mu0 / n) * norm.isf(fix_pfa)


def ml_decide_batch(
    mean_energies, hyp: HypothesisSet, n_samples: int, fix_pfa: float | None = None
) -> np.ndarray:
    """Vectorized `ml_decide` over an array of mean energies."""
    n = _check_n(n_samples)
    e = np.asarray(mean_energies, dtype=np.float64).ravel()
    if np.any(e < 0):
        raise ValueError("mean energies must be >= 0")
    if fix_pfa is None:
        return np.argmax(_scores(e, hyp, n, active_only=False), axis=1)
    if hyp.n_levels == 1:
        return np.zeros(e.size, dtype=np.int64)
    t = _np_threshold(hyp, n, fix_pfa)
    decided = np.argmax(_scores(e, hyp, n, active_only=True), axis=1)
    decided[e <= t] = 0
    return decided


def ml_decide(
    mean_energy: float, hyp: HypothesisSet, n_samples: int, fix_pfa: float | None = None
) -> int:
    """Most likely power level index for an observed mean energy.

    With `fix_pfa` set, an idle-vs-active threshold at that false-alarm
    rate is applied first and the ML rule only discriminates among active
    levels. Ties resolve to the lowest index (argmax convention).
    """
    return int(ml_decide_batch(np.array([mean_energy]), hyp, n_samples, fix_pfa)[0])


def decision_regions(
    hyp: HypothesisSet, n_samples: int, fix_pfa: float | None = None
) -> list[tuple[float, float, int]]:
    """Partition of the mean-energy axis into (lo, hi, level) intervals.

    Boundaries are the crossings of the per-hypothesis quadratic
    log-likelihoods restricted to energies >= 0; all mass below 0 belongs
    to the region containing 0 (the statistic is non-negative).
    """
    n = _check_n(n_samples)
    L = hyp.n_levels
    mu = hyp.means()
    var = mu * mu / n
    logp = hyp.log_priors()
    cuts: set[float] = set()
    start = 0
    if fix_pfa is not None and L > 1:
        t = _np_threshold(hyp, n, fix_pfa)
        if t > 0:
            cuts.add(t)
        start = 1  # idle region handled by the threshold, not by crossings
    for i in range(start, L):
        for j in range(i + 1, L):
            # score_i(e) = score_j(e) is quadratic: a e^2 + b e + c = 0
            a = 1.0 / (2 * var[j]) - 1.0 / (2 * var[i])
            b = mu[i] / var[i] - mu[j] / var[j]
            c = (logp[i] - 0.5 * math.log(var[i]) - mu[i] ** 2 / (2 * var[i])) - (
                logp[j] - 0.5 * math.log(var[j]) - mu[j] ** 2 / (2 * var[j])
            )
            roots: list[float] = []
            if a == 0.0:
                if b != 0.0:
                    roots = [-c / b]
            else:
                disc = b * b - 4 * a * c
                if disc >= 0:
                    r = math.sqrt(disc)
                    roots = [(-b - r) / (2 * a), (-b + r) / (2 * a)]
            cuts.update(r for r in roots if r > 0.0 and math.isfinite(r))
    edges = [0.0] + sorted(cuts)
    edges.append(max(float(mu[-1] + 20.0 * math.sqrt(var[-1])), edges[-1] + 1.0))
    mids = np.array([(lo + hi) / 2.0 for lo, hi in zip(edges[:-1], edges[1:])])
    winners = ml_decide_batch(mids, hyp, n, fix_pfa)
    regions: list[tuple[float, float, int]] = []
    for k, w in enumerate(winners):
        w = int(w)
        if regions and regions[-1][2] == w:
            regions[-1] = (regions[-1][0], edges[k + 1], w)
        else:
            regions.append((edges[k], edges[k + 1], w))
    # the statistic is non-negative: mass below 0 belongs to the region at 0
    regions[0] = (-np.inf, regions[0][1], regions[0][2])
    regions[-1] = (regions[-1][0], np.inf, regions[-1][2])
    return regions


def theoretical_metrics(
    hyp: HypothesisSet, n_samples: int, fix_pfa: float | None = None
) -> DetectionMetrics:
    """Closed-form Pfa/Pd/Pdisc from Gaussian CDF differences at region boundaries.

    Pd and Pdisc average uniformly over the active (non-idle) hypotheses;
    with a single-level set they are flagged absent (None).
    """
    n = _check_n(n_samples)
    L = hyp.n_levels
    mu = hyp.means()
    sd = mu / math.sqrt(n)
    regions = decision_regions(hyp, n, fix_pfa)
    confusion = np.zeros((L, L))
    for lo, hi, winner in regions:
        confusion[:, winner] += norm.cdf((hi - mu) / sd) - norm.cdf((lo - mu) / sd)
    pfa = float(1.0 - confusion[0, 0])
    if L == 1:
        return DetectionMetrics(pfa, None, None, n, confusion)
    pd = float(np.mean(1.0 - confusion[1:, 0]))
    pdisc = float(np.mean(np.diag(confusion)[1:]))
    return DetectionMetrics(pfa, pd, pdisc, n, confusion)


def simulated_metrics(
    hyp: HypothesisSet,
    n_samples: int,
    trials: int,
    rng: np.random.Generator,
    fix_pfa: float | None = None,
) -> DetectionMetrics:
    """Monte-Carlo metrics: draw the averaged-energy statistic from the
    Gaussian hypothesis model and push it through the decision rule.

    This is the oracle counterpart of `theoretical_metrics`: it exercises
    the argmax decision path on random statistics instead of integrating
    closed-form regions, so the two must agree at Monte-Carlo resolution.
    """
    n = _check_n(n_samples)
    L = hyp.n_levels
    mu = hyp.means()
    sd = mu / math.sqrt(n)
    confusion = np.zeros((L, L))
    for i in range(L):
        draws = np.maximum(rng.normal(mu[i], sd[i], size=trials), 0.0)
        decided = ml_decide_batch(draws, hyp, n, fix_pfa)
        confusion[i] = np.bincount(decided, minlength=L) / trials
    pfa = float(1.0 - confusion[0, 0])
    if L == 1:
        return DetectionMetrics(pfa, None, None, n, confusion)
    pd = float(np.mean(1.0 - confusion[1:, 0]))
    pdisc = float(np.mean(np.diag(confusion)[1:]))
    return DetectionMetrics(pfa, pd, pdisc, n, confusion)


def metric_curve(
    hyp: HypothesisSet, n_grid: list[int], fix_pfa: float | None = None
) -> MetricCurve:
    """Theoretical metrics per grid point plus monotonicity diagnostics."""
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ValueError("n_grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n_grid must be strictly ascending, got {grid}")
    points = [theoretical_metrics(hyp, n, fix_pfa) for n in grid]
    pds = [m.p_detection for m in points]
    pdiscs = [m.p_discrimination for m in points]
    has_active = hyp.n_levels > 1
    eps = 1e-12
    pd_mono = has_active and all(b >= a - eps for a, b in zip(pds, pds[1:]))
    pdisc_mono = has_active and all(b >= a - eps for a, b in zip(pdiscs, pdiscs[1:]))
    le = has_active and all(d <= p + eps for d, p in zip(pdiscs, pds))
    return MetricCurve(
        points=points,
        n_grid=tuple(grid),
        pd_nondecreasing=bool(pd_mono),
        pdisc_nondecreasing=bool(pdisc_mono),
        pdisc_le_pd=bool(le),
    )
