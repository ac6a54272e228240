"""Lundberg machinery for the shot-noise Cox risk model.

For a tilt ``r`` the exponential martingale

    h(x, lam, t) = beta * exp(-theta(r) t - alpha(r) lam - r x)

is driven by

    alpha(r) = (1 - M_U(r)) / delta
    theta(r) = -c r + rho * (M_Y(-alpha(r)) - 1)

The adjustment coefficient ``R`` is the positive root of ``theta`` and gives the
bound ``psi(u, lam0) <= exp(-alpha(R) lam0 - R u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Tuple

from .distributions import DistributionSpec, Exponential, MGFDomainError


class NetProfitError(ValueError):
    """The premium rate does not exceed the long-run expected claim outflow."""


class NoRootError(ValueError):
    """theta has no positive root on its admissible interval."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the shot-noise risk model.

    ``claim_multiplier`` scales the instantaneous claim rate to
    ``claim_multiplier * lambda_t``.  It is 1 under the physical measure and
    ``M_U(r)`` for the dynamics under a tilted measure.
    """

    c: float
    rho: float
    delta: float
    lambda0: float
    u: float
    claim_dist: DistributionSpec
    shock_dist: DistributionSpec
    claim_multiplier: float = 1.0
    unsafe: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("c", "rho", "delta", "lambda0", "claim_multiplier"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not (self.u >= 0 and math.isfinite(self.u)):
            raise ValueError(f"u must be non-negative and finite, got {self.u}")
        if not self.unsafe and not self.net_profit():
            raise NetProfitError(
                f"net profit condition violated: c={self.c} <= "
                f"(rho/delta) E[U] E[Y] = {self.expected_outflow_rate()}"
            )

    def expected_outflow_rate(self) -> float:
        return (
            self.claim_multiplier * self.rho / self.delta
            * self.claim_dist.mean() * self.shock_dist.mean()
        )

    def net_profit(self) -> bool:
        return self.c > self.expected_outflow_rate()

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def canonical_params(u: float = 0.0, lambda0: float = 1.0) -> ModelParams:
    """Exponential claims and shocks with unit rates, delta=1, rho=0.5, c=1."""
    return ModelParams(
        c=1.0, rho=0.5, delta=1.0, lambda0=lambda0, u=u,
        claim_dist=Exponential(1.0), shock_dist=Exponential(1.0),
    )


@dataclass(frozen=True)
class AdjustmentCoefficient:
    R: float
    alpha_R: float
    theta_prime_R: float
    epsilon_slack: float


def alpha(params: ModelParams, r: float) -> float:
    m = params.claim_dist.mgf(r)
    if math.isinf(m):
        raise MGFDomainError(f"M_U({r}) is infinite")
    return (1.0 - m) / params.delta


def theta(params: ModelParams, r: float) -> float:
    a = alpha(params, r)
    my = params.shock_dist.mgf(-a)
    if math.isinf(my):
        raise MGFDomainError(f"M_Y({-a}) is infinite at r={r}")
    return -params.c * r + params.rho * (my - 1.0)


def theta_prime(params: ModelParams, r: float) -> float:
    a = alpha(params, r)
    return (
        -params.c
        + params.rho / params.delta
        * params.shock_dist.mgf_prime(-a) * params.claim_dist.mgf_prime(r)
    )


def _theta_or_inf(params: ModelParams, r: float) -> float:
    mu = params.claim_dist.mgf(r)
    if math.isinf(mu):
        return math.inf
    my = params.shock_dist.mgf((mu - 1.0) / params.delta)
    if math.isinf(my):
        return math.inf
    return -params.c * r + params.rho * (my - 1.0)


def admissible_sup(params: ModelParams) -> float:
    """Supremum of ``r > 0`` for which both MGFs in ``theta`` are finite."""
    hi = params.claim_dist.mgf_sup
    if math.isinf(hi):
        hi = 1.0
        while math.isfinite(_theta_or_inf(params, hi)):
            hi *= 2.0
            if hi > 1e300:
                return math.inf
    lo = 0.0
    if math.isfinite(_theta_or_inf(params, hi)):
        return hi
    # admissibility is monotone in r
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if math.isfinite(_theta_or_inf(params, mid)):
            lo = mid
        else:
            hi = mid
    return hi


def _sign_profile(params: ModelParams, r_max: float, k: int = 8) -> List[Tuple[float, float]]:
    top = r_max if math.isfinite(r_max) else 1e6
    return [(top * i / k, _theta_or_inf(params, top * i / k)) for i in range(1, k)]


def solve_R(params: ModelParams) -> AdjustmentCoefficient:
    """Positive root of ``theta`` with the derived quantities at the root.

    Brackets the root between a point where ``theta < 0`` and a point
    approaching the MGF-domain exit where ``theta > 0`` (or diverges),
    bisects to 1e-12 and finishes with a single Newton step.
    """
    if not params.net_profit():
        raise NetProfitError("net profit condition violated; theta'(0) >= 0 so no positive root")
    r_max = admissible_sup(params)
    top = r_max if math.isfinite(r_max) else 1e6

    # theta'(0) < 0 guarantees theta < 0 just right of 0
    r_lo = None
    for k in range(1, 200):
        r = top * 2.0 ** -k
        th = _theta_or_inf(params, r)
        if th < 0:
            r_lo = r
            break
    if r_lo is None:
        raise NoRootError(f"theta never negative near 0; profile {_sign_profile(params, r_max)}")

    r_hi = None
    if not math.isfinite(r_max):
        r = r_lo
        while r < 1e300:
            r *= 2.0
            if _theta_or_inf(params, r) > 0:
                r_hi = r
                break
    else:
        for k in range(1, 1100):
            r = r_max - (r_max - r_lo) * 2.0 ** -k
            if r <= r_lo or r >= r_max:
                break
            if _theta_or_inf(params, r) > 0:
                r_hi = r
                break
            r_lo = r
    if r_hi is None:
        raise NoRootError(
            f"theta < 0 on the whole admissible interval (0, {r_max}); "
            f"profile {_sign_profile(params, r_max)}"
        )

    while r_hi - r_lo > 1e-12 * max(1.0, r_hi):
        mid = 0.5 * (r_lo + r_hi)
        if mid <= r_lo or mid >= r_hi:
            break
        th = _theta_or_inf(params, mid)
        if th == 0.0:
            r_lo = r_hi = mid
            break
        if th < 0:
            r_lo = mid
        else:
            r_hi = mid
    R = 0.5 * (r_lo + r_hi)
    th = theta(params, R)
    tp = theta_prime(params, R)
    if tp > 0:
        cand = R - th / tp
        if r_lo - 1e-12 <= cand <= r_hi + 1e-12:
            th_c = _theta_or_inf(params, cand)
            if abs(th_c) <= abs(th):
                R, th = cand, th_c
                tp = theta_prime(params, R)

    a_R = alpha(params, R)
    return AdjustmentCoefficient(
        R=R, alpha_R=a_R, theta_prime_R=tp,
        epsilon_slack=epsilon_slack(params, R, a_R),
    )


def epsilon_slack(params: ModelParams, R: float, alpha_R: float) -> float:
    """A certified ``eps`` with ``M_U(R + eps)`` and ``M_Y(eps - alpha_R)`` finite.

    Not claimed to be maximal.
    """
    gaps = [params.claim_dist.mgf_sup - R, params.shock_dist.mgf_sup + alpha_R]
    eps = min(0.1 * R, 0.5 * min(gaps))
    for _ in range(60):
        if (
            eps > 0
            and math.isfinite(params.claim_dist.mgf(R + eps))
            and math.isfinite(params.shock_dist.mgf(eps - alpha_R))
        ):
            return eps
        eps *= 0.5
    raise NoRootError("no epsilon certifying the MGF slack at R after 60 halvings")


def closed_form_R_expexp(c: float, rho: float, delta: float, mu: float, kappa: float) -> float:
    """Adjustment coefficient for Exp(kappa) claims and Exp(mu) shocks."""
    if not c > rho / (delta * kappa * mu):
        raise NetProfitError(f"net profit condition c > rho/(delta kappa mu) fails: c={c}, "
                             f"rho/(delta kappa mu)={rho / (delta * kappa * mu)}")
    return (mu * delta * kappa * c - rho) / ((1.0 + mu * delta) * c)


def lundberg_bound(params: ModelParams, adj: AdjustmentCoefficient) -> float:
    return math.exp(-adj.alpha_R * params.lambda0 - adj.R * params.u)


def mean_intensity(params: ModelParams, t: float) -> float:
    d = params.delta
    e = math.exp(-d * t)
    return params.lambda0 * e + params.rho / d * params.shock_dist.mean() * (1.0 - e)


def mean_surplus(params: ModelParams, t: float) -> float:
    d = params.delta
    ey = params.shock_dist.mean()
    eu = params.claim_multiplier * params.claim_dist.mean()
    return (
        params.u + params.c * t
        - eu * params.rho / d * ey * t
        - eu * (params.lambda0 / d - params.rho / d**2 * ey) * (-math.expm1(-d * t))
    )
