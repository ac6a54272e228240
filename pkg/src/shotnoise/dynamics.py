"""Exact event-driven simulation of the surplus/intensity PDMP.

Between events the surplus grows linearly at rate ``c`` and the intensity
decays as ``lam * exp(-delta w)``.  Shocks arrive at a constant rate; claims
arrive with hazard ``m * lam_t``.  Claim times inside an inter-shock interval
are found by inverting the integrated hazard against a unit-exponential
threshold, which is redrawn after every event.  Redrawing is exact because the
unused part of an exponential threshold is again unit exponential.

Every replicate draws from its own Philox stream keyed by ``(seed, replicate)``,
so batches are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit

from . import _philox
from .distributions import Exponential, MGFDomainError
from .exponent import ModelParams, alpha, solve_R


class MaxEventsExceeded(RuntimeError):
    """A path hit the event cap; the configuration is likely runaway."""


class HorizonRequired(ValueError):
    """An infinite horizon was requested where ruin is not almost sure."""


@dataclass(frozen=True)
class Physical:
    pass


@dataclass(frozen=True)
class Tilted:
    r: float


Measure = Union[Physical, Tilted]


@dataclass(frozen=True)
class SimConfig:
    measure: Measure = Physical()
    horizon: Optional[float] = None
    seed: int = 0
    record_events: bool = False
    max_events: int = 10_000_000
    stop_at_ruin: bool = True
    snapshot_times: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PathState:
    t: float
    x: float
    lam: float
    n_claims: int
    n_shocks: int


@dataclass(frozen=True)
class PathResult:
    ruined: bool
    tau: Optional[float]
    x_tau: Optional[float]
    lambda_tau: Optional[float]
    final_state: PathState
    shock_sum: float
    hazard: float
    event_log: Optional[List[Tuple[float, str, float]]] = None


@dataclass
class PathBatch:
    """Per-replicate outcomes of a batch, indexed by replicate number.

    ``x``/``lam``/``t`` are the terminal state.  When ``stop_at_ruin`` is set
    the terminal state of a ruined path is the state at ruin.  ``hazard`` is
    the accumulated integral of the intensity (without claim multiplier).
    """

    ruined: np.ndarray
    tau: np.ndarray
    x_tau: np.ndarray
    lambda_tau: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    t: np.ndarray
    n_claims: np.ndarray
    n_shocks: np.ndarray
    shock_sum: np.ndarray
    hazard: np.ndarray
    snap_x: np.ndarray
    snap_lam: np.ndarray
    status: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ruined)

    @property
    def work(self) -> int:
        return int(self.n_claims.sum() + self.n_shocks.sum())


_OK = 0
_MAX_EVENTS = 1
_LOG_FULL = 2


def tilted_params(params: ModelParams, r: float, adj_alpha: Optional[float] = None) -> ModelParams:
    """Dynamics of the model under the exponentially tilted measure ``Q^(r)``.

    Shock rate becomes ``rho * M_Y(-alpha(r))`` with shocks tilted by
    ``-alpha(r)``; the claim rate is multiplied by ``M_U(r)`` and claims are
    tilted by ``r``.  Premium and decay are unchanged.
    """
    a = alpha(params, r) if adj_alpha is None else adj_alpha
    my = params.shock_dist.mgf(-a)
    mu = params.claim_dist.mgf(r)
    if math.isinf(my) or math.isinf(mu):
        raise MGFDomainError(f"tilt r={r} outside the admissible domain")
    return params.with_(
        rho=params.rho * my,
        shock_dist=params.shock_dist.tilt(-a),
        claim_dist=params.claim_dist.tilt(r),
        claim_multiplier=params.claim_multiplier * mu,
        unsafe=True,
    )


def integrated_compensator(lambda0: float, shock_sum: float, lambda_t: float, delta: float) -> float:
    """``int_0^t lambda_s ds`` from the path's start, total shocks and current level."""
    value = (lambda0 + shock_sum - lambda_t) / delta
    if value < -1e-9 * max(1.0, lambda0 + shock_sum) / delta:
        raise ValueError(f"negative integrated compensator {value}: inconsistent path")
    return max(value, 0.0)


@njit(cache=True)
def _claim_offset(lam, delta, m, e):
    z = delta * e / (m * lam)
    if z >= 1.0:
        return -1.0
    return -math.log1p(-z) / delta


def next_claim_candidate(lambda_s: float, delta: float, m: float, e: float) -> Optional[float]:
    """Waiting time to the next claim if no shock intervenes, or None.

    Solves ``m lam (1 - exp(-delta w)) / delta = e``; None when the total
    remaining hazard ``m lam / delta`` is less than ``e``.
    """
    w = _claim_offset(lambda_s, delta, m, e)
    return None if w < 0 else w


@njit(cache=True)
def _flow(t, x, lam, hz, w, c, delta, snaps, k, snap_x, snap_lam, row):
    # records snapshots in (t, t + w] then advances the deterministic flow
    t_new = t + w
    while k < snaps.shape[0] and snaps[k] <= t_new:
        dt = snaps[k] - t
        snap_x[row, k] = x + c * dt
        snap_lam[row, k] = lam * math.exp(-delta * dt)
        k += 1
    decay = math.exp(-delta * w)
    hz += lam * (-math.expm1(-delta * w)) / delta
    return t_new, x + c * w, lam * decay, hz, k


@njit(cache=True, nogil=True)
def _simulate_range(
    start, stop, seed, c, rho, delta, lam0, u, m, claim_rate, shock_rate,
    horizon, stop_at_ruin, max_events, snaps,
    ruined, tau, x_tau, lambda_tau, x_out, lam_out, t_out, nc_out, ns_out,
    ss_out, hz_out, snap_x, snap_lam, status, log_t, log_kind, log_size,
):
    state = np.zeros(_philox.STATE_SIZE, dtype=np.uint64)
    n_log = log_t.shape[0]
    for i in range(start, stop):
        _philox.seed_state(state, seed, np.uint64(i))
        t = 0.0
        x = u
        lam = lam0
        hz = 0.0
        ss = 0.0
        nc = 0
        ns = 0
        k = 0
        st = _OK
        is_ruined = False
        done = False
        while not done:
            if rho > 0.0:
                t_shock = t + _philox.next_exponential(state) / rho
            else:
                t_shock = np.inf
            t_end = min(t_shock, horizon)
            while True:
                e = _philox.next_exponential(state)
                w = _claim_offset(lam, delta, m, e)
                if w < 0.0 or t + w >= t_end:
                    break
                t, x, lam, hz, k = _flow(t, x, lam, hz, w, c, delta, snaps, k, snap_x, snap_lam, i)
                size = _philox.next_exponential(state) / claim_rate
                x -= size
                if nc + ns < n_log:
                    log_t[nc + ns] = t
                    log_kind[nc + ns] = 0
                    log_size[nc + ns] = size
                nc += 1
                if x < 0.0 and not is_ruined:
                    is_ruined = True
                    tau[i] = t
                    x_tau[i] = x
                    lambda_tau[i] = lam
                    if stop_at_ruin:
                        done = True
                        break
                if nc + ns >= max_events:
                    st = _MAX_EVENTS
                    done = True
                    break
            if done:
                break
            t, x, lam, hz, k = _flow(t, x, lam, hz, t_end - t, c, delta, snaps, k, snap_x, snap_lam, i)
            if t_shock >= horizon:
                break
            y = _philox.next_exponential(state) / shock_rate
            lam += y
            ss += y
            if nc + ns < n_log:
                log_t[nc + ns] = t
                log_kind[nc + ns] = 1
                log_size[nc + ns] = y
            ns += 1
            if nc + ns >= max_events:
                st = _MAX_EVENTS
                break
        if st == _OK and n_log > 0 and nc + ns > n_log:
            st = _LOG_FULL
        ruined[i] = is_ruined
        x_out[i] = x
        lam_out[i] = lam
        t_out[i] = t
        nc_out[i] = nc
        ns_out[i] = ns
        ss_out[i] = ss
        hz_out[i] = hz
        status[i] = st


def _effective(params: ModelParams, cfg: SimConfig) -> ModelParams:
    if isinstance(cfg.measure, Tilted):
        r = cfg.measure.r
        if cfg.horizon is None:
            adj = solve_R(params)
            if abs(r - adj.R) > 1e-9 * max(1.0, adj.R):
                raise HorizonRequired(
                    f"infinite horizon only allowed under Q^(R) (R={adj.R}), got r={r}"
                )
            if not cfg.stop_at_ruin:
                raise HorizonRequired("an unstopped path needs a finite horizon")
        return tilted_params(params, r) if r != 0 else params
    if cfg.horizon is None:
        raise HorizonRequired("a finite horizon is required under the physical measure")
    return params


def _rates(eff: ModelParams) -> Tuple[float, float]:
    if not isinstance(eff.claim_dist, Exponential) or not isinstance(eff.shock_dist, Exponential):
        raise NotImplementedError("path simulation currently supports exponential claims and shocks")
    return eff.claim_dist.rate, eff.shock_dist.rate


def default_threads() -> int:
    env = os.environ.get("SHOTNOISE_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _alloc_batch(n: int, n_snaps: int) -> PathBatch:
    nan = lambda: np.full(n, np.nan)
    return PathBatch(
        ruined=np.zeros(n, dtype=np.bool_), tau=nan(), x_tau=nan(), lambda_tau=nan(),
        x=np.empty(n), lam=np.empty(n), t=np.empty(n),
        n_claims=np.zeros(n, dtype=np.int64), n_shocks=np.zeros(n, dtype=np.int64),
        shock_sum=np.empty(n), hazard=np.empty(n),
        snap_x=np.full((n, n_snaps), np.nan), snap_lam=np.full((n, n_snaps), np.nan),
        status=np.zeros(n, dtype=np.int64),
    )


def _run(params: ModelParams, cfg: SimConfig, start: int, stop: int, batch: PathBatch,
         log=None, threads: int = 1) -> None:
    eff = _effective(params, cfg)
    claim_rate, shock_rate = _rates(eff)
    horizon = np.inf if cfg.horizon is None else float(cfg.horizon)
    snaps = np.asarray(sorted(cfg.snapshot_times), dtype=np.float64)
    if snaps.size and snaps[-1] > horizon:
        raise ValueError("snapshot times must not exceed the horizon")
    if log is None:
        log = (np.empty(0), np.empty(0, dtype=np.int64), np.empty(0))
    seed = np.uint64(int(cfg.seed) % 2**64)

    def work(lo, hi):
        _simulate_range(
            lo, hi, seed, eff.c, eff.rho, eff.delta, eff.lambda0, eff.u,
            eff.claim_multiplier, claim_rate, shock_rate, horizon, cfg.stop_at_ruin,
            cfg.max_events, snaps,
            batch.ruined, batch.tau, batch.x_tau, batch.lambda_tau, batch.x, batch.lam,
            batch.t, batch.n_claims, batch.n_shocks, batch.shock_sum, batch.hazard,
            batch.snap_x, batch.snap_lam, batch.status, *log,
        )

    threads = max(1, int(threads))
    if threads == 1 or stop - start < 2:
        work(start, stop)
        return
    edges = np.linspace(start, stop, threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        for f in futures:
            f.result()


def simulate_paths(params: ModelParams, cfg: SimConfig, n: int,
                   threads: Optional[int] = None, check: bool = True) -> PathBatch:
    """Simulate replicates ``0 .. n-1`` of ``cfg`` and return their outcomes.

    Raises :class:`MaxEventsExceeded` if any path hits the event cap, unless
    ``check`` is false, in which case ``status`` carries the per-path flag.
    """
    batch = _alloc_batch(n, len(cfg.snapshot_times))
    _run(params, cfg, 0, n, batch, threads=threads or default_threads())
    if check and np.any(batch.status == _MAX_EVENTS):
        bad = int(np.sum(batch.status == _MAX_EVENTS))
        raise MaxEventsExceeded(f"{bad} of {n} paths hit max_events={cfg.max_events}")
    return batch


def simulate_path(params: ModelParams, cfg: SimConfig, replicate: int = 0) -> PathResult:
    """Simulate one replicate; identical to row ``replicate`` of :func:`simulate_paths`."""
    cap = 1024 if cfg.record_events else 0
    while True:
        batch = _alloc_batch(replicate + 1, len(cfg.snapshot_times))
        log = (np.empty(cap), np.empty(cap, dtype=np.int64), np.empty(cap))
        _run(params, cfg, replicate, replicate + 1, batch, log=log)
        st = batch.status[replicate]
        if st != _LOG_FULL:
            break
        cap *= 4
    if st == _MAX_EVENTS:
        raise MaxEventsExceeded(f"path hit max_events={cfg.max_events}")
    i = replicate
    events = None
    if cfg.record_events:
        total = int(batch.n_claims[i] + batch.n_shocks[i])
        kinds = ("claim", "shock")
        events = [(float(log[0][j]), kinds[log[1][j]], float(log[2][j])) for j in range(total)]
    ruined = bool(batch.ruined[i])
    return PathResult(
        ruined=ruined,
        tau=float(batch.tau[i]) if ruined else None,
        x_tau=float(batch.x_tau[i]) if ruined else None,
        lambda_tau=float(batch.lambda_tau[i]) if ruined else None,
        final_state=PathState(
            t=float(batch.t[i]), x=float(batch.x[i]), lam=float(batch.lam[i]),
            n_claims=int(batch.n_claims[i]), n_shocks=int(batch.n_shocks[i]),
        ),
        shock_sum=float(batch.shock_sum[i]),
        hazard=float(batch.hazard[i]),
        event_log=events,
    )


def write_paths_csv(batch: PathBatch, fh) -> None:
    """Write ``replicate, ruined, tau, x_tau, lambda_tau, n_claims, n_shocks`` rows."""
    fh.write("replicate,ruined,tau,x_tau,lambda_tau,n_claims,n_shocks\n")
    for i in range(batch.n):
        if batch.ruined[i]:
            tail = f"1,{batch.tau[i]:.17g},{batch.x_tau[i]:.17g},{batch.lambda_tau[i]:.17g}"
        else:
            tail = "0,,,"
        fh.write(f"{i},{tail},{batch.n_claims[i]},{batch.n_shocks[i]}\n")
