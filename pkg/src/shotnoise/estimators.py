"""Monte Carlo estimators of ruin probabilities and martingale diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .distributions import MGFDomainError
from .dynamics import (
    MaxEventsExceeded,
    Physical,
    SimConfig,
    Tilted,
    simulate_paths,
)
from .exponent import (
    AdjustmentCoefficient,
    ModelParams,
    alpha,
    lundberg_bound,
    theta,
)


class PathNotRuined(RuntimeError):
    """An importance-sampling path ended without ruin, which would bias the estimate."""


@dataclass(frozen=True)
class Estimate:
    point: float
    stderr: float
    n: int
    ci95: Tuple[float, float]
    work: int
    method: str = ""
    hits: Optional[int] = None
    max_weight: Optional[float] = None

    def as_dict(self) -> Dict:
        out = {
            "method": self.method, "point": self.point, "stderr": self.stderr,
            "ci95": list(self.ci95), "n": self.n, "work": self.work,
        }
        if self.hits is not None:
            out["hits"] = self.hits
        if self.max_weight is not None:
            out["max_weight"] = self.max_weight
        return out


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def clopper_pearson(hits: int, n: int, level: float = 0.95) -> Tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(a / 2, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(stats.beta.ppf(1 - a / 2, hits + 1, n - hits))
    return lo, hi


def crude_ruin_probability(params: ModelParams, horizon: float, n: int, seed: int = 0,
                           threads: Optional[int] = None) -> Estimate:
    """Fraction of physical paths ruined before ``horizon``.

    This is the finite-horizon probability, a lower bound for the
    infinite-horizon ruin probability.  Fewer than 30 hits switch the
    interval to Clopper-Pearson.
    """
    batch = simulate_paths(params, SimConfig(Physical(), horizon=horizon, seed=seed), n, threads)
    hits = int(batch.ruined.sum())
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    if hits < 30:
        ci = clopper_pearson(hits, n)
    else:
        ci = (p - 1.96 * se, p + 1.96 * se)
    return Estimate(point=p, stderr=se, n=n, ci95=ci, work=batch.work,
                    method="crude", hits=hits)


def is_log_weights(params: ModelParams, r: float, n: int, seed: int = 0,
                   horizon: Optional[float] = None,
                   threads: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, int]:
    """Log likelihood ratios ``log dP/dQ^(r)`` at ruin, excluding ``-r u - alpha(r) lam0``.

    Returns ``(log_w, ruined, work)`` where non-ruined paths (possible only
    with a finite horizon) carry ``-inf``.
    """
    cfg = SimConfig(Tilted(r), horizon=horizon, seed=seed)
    batch = simulate_paths(params, cfg, n, threads)
    if horizon is None and not batch.ruined.all():
        missing = int((~batch.ruined).sum())
        raise PathNotRuined(f"{missing} of {n} tilted paths ended without ruin")
    a = alpha(params, r)
    th = theta(params, r)
    with np.errstate(invalid="ignore"):
        log_w = r * batch.x_tau + a * batch.lambda_tau
        if th != 0.0:
            log_w = log_w + th * batch.tau
    log_w = np.where(batch.ruined, log_w, -np.inf)
    return log_w, batch.ruined, batch.work


def is_weights(params: ModelParams, adj: AdjustmentCoefficient, n: int, seed: int = 0,
               threads: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """Per-path unbiased contributions to the ruin probability under ``Q^(R)``.

    Each weight is ``bound * exp(R x_tau + alpha(R) lambda_tau)``; the second
    factor is below 1 since ``x_tau < 0`` and ``alpha(R) < 0``, so every weight
    is at most the Lundberg bound in floating point as well.
    """
    log_w, _, work = is_log_weights(params, adj.R, n, seed, None, threads)
    return lundberg_bound(params, adj) * np.exp(log_w), work


def is_ruin_probability(params: ModelParams, adj: AdjustmentCoefficient, n: int,
                        seed: int = 0, threads: Optional[int] = None) -> Estimate:
    w, work = is_weights(params, adj, n, seed, threads)
    mean, se = _mean_se(w)
    return Estimate(point=mean, stderr=se, n=n, ci95=(mean - 1.96 * se, mean + 1.96 * se),
                    work=work, method="is", max_weight=float(w.max()))


def is_ruin_probability_at(params: ModelParams, r: float, n: int, seed: int = 0,
                           horizon: Optional[float] = None,
                           threads: Optional[int] = None) -> Estimate:
    """Importance-sampling estimate under an arbitrary admissible tilt ``r``.

    Off the adjustment coefficient the weight carries ``exp(theta(r) tau)``
    and, unless ruin is almost sure, a finite ``horizon`` is needed; the
    result then estimates the finite-horizon probability.
    """
    log_w, _, work = is_log_weights(params, r, n, seed, horizon, threads)
    shift = -r * params.u - alpha(params, r) * params.lambda0
    w = np.exp(log_w + shift)
    mean, se = _mean_se(w)
    return Estimate(point=mean, stderr=se, n=n, ci95=(mean - 1.96 * se, mean + 1.96 * se),
                    work=work, method=f"is(r={r:.6g})", max_weight=float(w.max()))


@dataclass(frozen=True)
class MartingaleCheckReport:
    r: float
    times: Tuple[float, ...]
    means: Tuple[float, ...]
    stderrs: Tuple[float, ...]
    passed: bool


def check_admissible(params: ModelParams, r: float) -> None:
    """Conditions under which ``h`` is an expectation-one martingale."""
    if math.isinf(params.claim_dist.mgf(r)):
        raise MGFDomainError(f"M_U({r}) is infinite")
    a = alpha(params, r)
    if math.isinf(params.shock_dist.mgf(-a)):
        raise MGFDomainError(f"M_Y({-a}) is infinite")
    # E[Y exp(-alpha Y)] = M_Y'(-alpha)
    params.shock_dist.mgf_prime(-a)


def martingale_values(params: ModelParams, r: float, snap_x: np.ndarray, snap_lam: np.ndarray,
                      times: Sequence[float]) -> np.ndarray:
    a = alpha(params, r)
    th = theta(params, r)
    t = np.asarray(times, dtype=float)
    return np.exp(-th * t - a * (snap_lam - params.lambda0) - r * (snap_x - params.u))


def martingale_check(params: ModelParams, r: float, times: Sequence[float], n: int,
                     seed: int = 0, threads: Optional[int] = None,
                     n_se: float = 4.0) -> MartingaleCheckReport:
    """Empirical mean of ``h(X_t, lambda_t, t)`` on unstopped physical paths."""
    check_admissible(params, r)
    times = tuple(sorted(float(t) for t in times))
    cfg = SimConfig(Physical(), horizon=times[-1], seed=seed, stop_at_ruin=False,
                    snapshot_times=times)
    batch = simulate_paths(params, cfg, n, threads)
    h = martingale_values(params, r, batch.snap_x, batch.snap_lam, times)
    means, ses = zip(*(_mean_se(h[:, k]) for k in range(len(times))))
    passed = all(abs(m - 1.0) <= n_se * s or m == 1.0 for m, s in zip(means, ses))
    return MartingaleCheckReport(r=r, times=times, means=means, stderrs=ses, passed=passed)


@dataclass(frozen=True)
class BoundRow:
    u: float
    estimate: Estimate
    bound: float
    ok: bool


def bound_scan(params: ModelParams, adj: AdjustmentCoefficient, u_grid: Sequence[float],
               n: int, seed: int = 0, threads: Optional[int] = None) -> List[BoundRow]:
    rows = []
    for j, u in enumerate(u_grid):
        p = params.with_(u=float(u))
        est = is_ruin_probability(p, adj, n, seed + j, threads)
        b = lundberg_bound(p, adj)
        rows.append(BoundRow(u=float(u), estimate=est, bound=b,
                             ok=est.point - 2 * est.stderr <= b))
    return rows


def is_monotone(rows: Sequence[BoundRow], n_se: float = 2.0) -> bool:
    """Estimates nonincreasing in ``u`` up to ``n_se`` combined standard errors."""
    for a, b in zip(rows, rows[1:]):
        tol = n_se * math.hypot(a.estimate.stderr, b.estimate.stderr)
        if b.estimate.point > a.estimate.point + tol:
            return False
    return True


@dataclass(frozen=True)
class VarianceReport:
    u: float
    crude: Estimate
    importance: Dict[str, Estimate]
    variance_ratio: float
    work_normalized_ratio: float


def variance_report(params: ModelParams, adj: AdjustmentCoefficient, u: float, n: int,
                    horizon: float = 400.0, seed: int = 0,
                    tilt_factors: Sequence[float] = (0.8, 1.0, 1.1),
                    threads: Optional[int] = None) -> VarianceReport:
    """Crude against importance sampling at equal replicate count.

    ``variance_ratio`` is crude variance over IS variance at ``r = R``;
    ``work_normalized_ratio`` multiplies each variance by its simulated
    event count.  Off-``R`` tilts use ``horizon`` and therefore estimate the
    finite-horizon probability, like the crude estimator.
    """
    p = params.with_(u=float(u))
    crude = crude_ruin_probability(p, horizon, n, seed, threads)
    importance = {}
    for k, f in enumerate(tilt_factors):
        if f == 1.0:
            importance["R"] = is_ruin_probability(p, adj, n, seed + 1, threads)
        else:
            r = f * adj.R
            try:
                importance[f"{f:g}R"] = is_ruin_probability_at(p, r, n, seed + 2 + k, horizon, threads)
            except (MGFDomainError, MaxEventsExceeded):
                continue
    ref = importance["R"]
    v_crude = crude.stderr ** 2
    v_is = ref.stderr ** 2
    ratio = v_crude / v_is if v_is > 0 else math.inf
    wratio = (v_crude * crude.work) / (v_is * ref.work) if v_is > 0 else math.inf
    return VarianceReport(u=float(u), crude=crude, importance=importance,
                          variance_ratio=ratio, work_normalized_ratio=wratio)
