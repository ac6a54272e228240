"""Recurrence diagnostics for the intensity process and the asymptotic scan.

With exponential shocks of rate ``beta`` arriving at rate ``n * delta`` for an
integer ``n``, the shot-noise level started from ``lambda0`` is

    lambda_t = lambda0 * exp(-delta t) + sum_{i <= B} Y_i,   B ~ Binomial(n, 1 - exp(-delta t))

i.e. a point mass at ``lambda0 * exp(-delta t)`` plus an Erlang mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, stats

from .distributions import DistributionSpec, Exponential
from .dynamics import Physical, SimConfig, Tilted, simulate_paths, tilted_params
from .estimators import is_log_weights
from .exponent import AdjustmentCoefficient, ModelParams, solve_R


@dataclass(frozen=True)
class ErlangMixtureDensity:
    """Law of the intensity at time ``t`` for the integer-rate exponential case.

    ``offset`` is the deterministic remnant ``lambda0 * exp(-delta t)`` of the
    starting level; 0 reproduces the process started from an empty level.
    """

    n: int
    rate: float
    delta: float
    t: float
    offset: float = 0.0

    def weights(self) -> np.ndarray:
        """Binomial weights of ``j = 0..n`` shocks surviving to ``t``."""
        q = -math.expm1(-self.delta * self.t)
        return stats.binom.pmf(np.arange(self.n + 1), self.n, q)

    @property
    def atom_weight(self) -> float:
        return math.exp(-self.delta * self.t * self.n)

    def pdf(self, z):
        z = np.asarray(z, dtype=float) - self.offset
        w = self.weights()
        out = np.zeros_like(z)
        pos = z > 0
        for j in range(1, self.n + 1):
            out[pos] += w[j] * stats.gamma.pdf(z[pos], j, scale=1.0 / self.rate)
        return out

    def cdf(self, z):
        z = np.asarray(z, dtype=float) - self.offset
        w = self.weights()
        out = np.where(z >= 0, w[0], 0.0)
        for j in range(1, self.n + 1):
            out = out + w[j] * stats.gamma.cdf(np.maximum(z, 0.0), j, scale=1.0 / self.rate)
        return out


def erlang_mixture_pdf(z, dens: ErlangMixtureDensity):
    """Continuous part of the intensity density (the atom is ``dens.atom_weight``)."""
    return dens.pdf(z)


def atom_weight(dens: ErlangMixtureDensity) -> float:
    return dens.atom_weight


def intensity_law(params: ModelParams, t: float) -> ErlangMixtureDensity:
    """Closed-form law of ``lambda_t`` for exponential shocks with ``rho / delta`` integral."""
    if not isinstance(params.shock_dist, Exponential):
        raise ValueError("closed-form intensity law needs exponential shocks")
    ratio = params.rho / params.delta
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-8 * max(1.0, ratio):
        raise ValueError(f"rho/delta = {ratio} is not a positive integer")
    return ErlangMixtureDensity(n=n, rate=params.shock_dist.rate, delta=params.delta, t=t,
                                offset=params.lambda0 * math.exp(-params.delta * t))


def integer_rate_params(n: int, c: float, delta: float, mu: float, kappa: float,
                    lambda0: float = 1.0, u: float = 0.0, xtol: float = 1e-10) -> ModelParams:
    """Exp(kappa)/Exp(mu) model whose tilted shock rate at ``R`` equals ``n * delta``.

    ``rho`` is found by bisection; ``R`` depends on ``rho`` so every trial
    value solves for its own adjustment coefficient.
    """
    def make(rho):
        return ModelParams(c=c, rho=rho, delta=delta, lambda0=lambda0, u=u,
                           claim_dist=Exponential(kappa), shock_dist=Exponential(mu))

    def gap(rho):
        p = make(rho)
        adj = solve_R(p)
        return rho * p.shock_dist.mgf(-adj.alpha_R) - n * delta

    rho_max = c * delta * kappa * mu
    lo, hi = rho_max * 1e-9, rho_max * (1.0 - 1e-9)
    if gap(lo) * gap(hi) > 0:
        raise ValueError(f"no rho gives tilted shock rate {n * delta} for these parameters")
    rho = optimize.bisect(gap, lo, hi, xtol=xtol, maxiter=200)
    return make(rho)


class Intensity(NamedTuple):
    value: float
    stderr: float


def upcrossing_intensity(level: float, t: float,
                         law: Union[ErlangMixtureDensity, np.ndarray],
                         shock_dist: DistributionSpec, rate: float) -> Intensity:
    """Rate of upcrossings of ``level`` at time ``t``.

    ``rate * int_0^level P[Y > level - z] F(dz, t)``, integrated by adaptive
    quadrature for a closed-form law, or averaged over an array of simulated
    intensity values (with a standard error).
    """
    if isinstance(law, ErlangMixtureDensity):
        if law.offset > level:
            return Intensity(0.0, 0.0)
        atom = law.atom_weight * float(shock_dist.sf(level - law.offset))
        if level - law.offset <= 0:
            return Intensity(rate * atom, 0.0)
        cont, _ = integrate.quad(
            lambda z: float(shock_dist.sf(level - z)) * float(law.pdf(np.array([z]))[0]),
            law.offset, level, epsabs=1e-12, epsrel=1e-12, limit=200,
        )
        return Intensity(rate * (atom + cont), 0.0)
    lam = np.asarray(law, dtype=float)
    vals = np.where(lam <= level, shock_dist.sf(level - lam), 0.0)
    se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
    return Intensity(rate * float(vals.mean()), rate * se)


def upcrossing_intensity_closed_form(level: float, dens: ErlangMixtureDensity, rate: float) -> float:
    """``rate * sum_j w_j Poisson(j; beta L)`` with ``L = level - offset``.

    Term ``j`` is the chance that ``j`` surviving shocks leave the level below
    ``level`` and the next shock carries it above.
    """
    gap = level - dens.offset
    if gap < 0:
        return 0.0
    w = dens.weights()
    return rate * float(np.dot(w, stats.poisson.pmf(np.arange(dens.n + 1), dens.rate * gap)))


@dataclass(frozen=True)
class Assumption3Report:
    times: np.ndarray
    integrand: np.ndarray
    cumulative: np.ndarray
    tail_level: float
    growth_ratio: float
    passed: bool


def assumption3_check(tilted: ModelParams, lambda0: float, t_max: float, grid: int = 2001,
                      n_paths: int = 20_000, seed: int = 0) -> Assumption3Report:
    """Cumulative upcrossing integral of ``lambda0`` under the tilted dynamics.

    The integrand is the upcrossing intensity divided by the tilted shock
    rate.  It uses the closed-form law when the tilted model is
    exponential with integral ``rho / delta``; otherwise intensity values
    are simulated on the grid.  ``tail_level`` is the minimum of the
    integrand over the second half of the grid and ``growth_ratio`` is the
    cumulative value at ``t_max`` over that at ``t_max / 2``.
    """
    times = np.linspace(0.0, t_max, grid)
    p = tilted.with_(lambda0=lambda0)
    try:
        intensity_law(p, 0.0)
        closed = True
    except ValueError:
        closed = False
    if closed:
        g = np.array([upcrossing_intensity_closed_form(lambda0, intensity_law(p, t), 1.0)
                      for t in times])
    else:
        snaps = tuple(times[1:])
        cfg = SimConfig(Physical(), horizon=t_max, seed=seed, stop_at_ruin=False,
                        snapshot_times=snaps)
        batch = simulate_paths(p, cfg, n_paths)
        g = np.empty_like(times)
        g[0] = float(p.shock_dist.sf(0.0))
        for k in range(len(snaps)):
            g[k + 1] = upcrossing_intensity(lambda0, snaps[k], batch.snap_lam[:, k],
                                            p.shock_dist, 1.0).value
    if t_max > 0:
        cum = integrate.cumulative_trapezoid(g, times, initial=0.0)
    else:
        cum = np.zeros_like(times)
    half = len(times) // 2
    tail = float(g[half:].min()) if t_max > 0 else 0.0
    ratio = float(cum[-1] / cum[half]) if t_max > 0 and cum[half] > 0 else math.nan
    return Assumption3Report(times=times, integrand=g, cumulative=cum, tail_level=tail,
                             growth_ratio=ratio, passed=tail > 0)


@dataclass(frozen=True)
class AsymptoticScan:
    u_grid: Tuple[float, ...]
    psi_hat: Tuple[float, ...]
    psi_stderr: Tuple[float, ...]
    values: Tuple[float, ...]
    stderrs: Tuple[float, ...]
    bounds: Tuple[float, ...]
    ceiling: float
    stabilized: bool


def is_stabilized(values: Sequence[float], stderrs: Sequence[float], band: float = 0.15,
                  last: int = 3) -> bool:
    """Last ``last`` values agree within ``band`` (relative) plus two combined standard errors."""
    v = list(values)[-last:]
    s = list(stderrs)[-last:]
    if len(v) < last:
        return False
    ref = sum(v) / len(v)
    return all(
        abs(v[i] - v[j]) <= band * ref + 2.0 * math.hypot(s[i], s[j])
        for i in range(len(v)) for j in range(i + 1, len(v))
    )


def asymptotic_scan(params: ModelParams, adj: AdjustmentCoefficient, u_grid: Sequence[float],
                    n_per_u: int, seed: int = 0, band: float = 0.15,
                    threads: Optional[int] = None) -> AsymptoticScan:
    """``psi(u) exp(R u)`` over ``u_grid`` from importance sampling under ``Q^(R)``.

    The scaled value is the mean of ``exp(-alpha(R) lam0 + R x_tau + alpha(R) lam_tau)``,
    so no large exponentials cancel.  ``u = 0`` is reported but left out of
    the stabilization test.
    """
    u_grid = tuple(float(u) for u in u_grid)
    if any(b <= a for a, b in zip(u_grid, u_grid[1:])):
        raise ValueError("u_grid must be increasing")
    ceiling = math.exp(-adj.alpha_R * params.lambda0)
    vals, ses, psis, psi_ses, bounds = [], [], [], [], []
    for j, u in enumerate(u_grid):
        p = params.with_(u=u)
        log_w, _, _ = is_log_weights(p, adj.R, n_per_u, seed + j, None, threads)
        w = ceiling * np.exp(log_w)
        mean = math.fsum(w) / len(w)
        se = float(np.std(w, ddof=1)) / math.sqrt(len(w))
        vals.append(mean)
        ses.append(se)
        scale = math.exp(-adj.R * u)
        psis.append(mean * scale)
        psi_ses.append(se * scale)
        bounds.append(ceiling * scale)
    positive = [k for k, u in enumerate(u_grid) if u > 0]
    stable = is_stabilized([vals[k] for k in positive], [ses[k] for k in positive], band)
    return AsymptoticScan(u_grid=u_grid, psi_hat=tuple(psis), psi_stderr=tuple(psi_ses),
                          values=tuple(vals), stderrs=tuple(ses), bounds=tuple(bounds),
                          ceiling=ceiling, stabilized=stable)


def ks_distance(samples: np.ndarray, cdf, atoms: Sequence[Tuple[float, float]] = (),
                atom_rtol: float = 1e-9) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``.

    ``atoms`` lists ``(location, mass)`` point masses of ``cdf``.  Samples
    within ``atom_rtol`` of an atom are treated as sitting on it, so
    rounding in simulated values does not split an atom.  Both one-sided
    limits are compared at every jump, which keeps the statistic exact when
    ``cdf`` has jumps.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    for loc, _ in atoms:
        near = np.abs(x - loc) <= atom_rtol * max(abs(loc), 1e-300) + 1e-300
        x[near] = loc
    x = np.sort(x)
    n = len(x)
    uniq, first = np.unique(x, return_index=True)
    counts = np.diff(np.append(first, n))
    f_right = np.asarray(cdf(uniq), dtype=float)
    jump = np.zeros_like(f_right)
    for loc, mass in atoms:
        jump[uniq == loc] += mass
    f_left = f_right - jump
    e_right = (first + counts) / n
    e_left = first / n
    return float(max(np.max(np.abs(e_right - f_right)), np.max(np.abs(e_left - f_left))))


def ks_threshold(n: int, alpha: float = 0.01) -> float:
    """Critical one-sample KS distance at significance ``alpha``."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def simulate_intensity(params: ModelParams, adj: AdjustmentCoefficient, t: float, n: int,
                       seed: int = 0, threads: Optional[int] = None) -> np.ndarray:
    """Intensity values at ``t`` under ``Q^(R)`` on unstopped paths."""
    cfg = SimConfig(Tilted(adj.R), horizon=t, seed=seed, stop_at_ruin=False,
                    snapshot_times=(t,))
    return simulate_paths(params, cfg, n, threads).snap_lam[:, 0]
