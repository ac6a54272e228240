import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from shotnoise.distributions import Exponential
from shotnoise.dynamics import (
    HorizonRequired,
    MaxEventsExceeded,
    Physical,
    SimConfig,
    Tilted,
    integrated_compensator,
    next_claim_candidate,
    simulate_path,
    simulate_paths,
    tilted_params,
    write_paths_csv,
)
from shotnoise.exponent import ModelParams, mean_intensity, mean_surplus


def test_tilted_params_zero_is_identity(canonical):
    q = tilted_params(canonical, 0.0)
    assert q.rho == canonical.rho and q.claim_multiplier == 1.0
    assert q.claim_dist == canonical.claim_dist and q.shock_dist == canonical.shock_dist


def test_tilted_params_at_R(canonical, canonical_adj):
    q = tilted_params(canonical, canonical_adj.R)
    assert q.rho == pytest.approx(0.75, rel=1e-12)
    assert q.shock_dist.rate == pytest.approx(2 / 3, rel=1e-12)
    assert q.claim_multiplier == pytest.approx(4 / 3, rel=1e-12)
    assert q.claim_dist.rate == pytest.approx(0.75, rel=1e-12)
    assert (q.c, q.delta) == (canonical.c, canonical.delta)


def test_tilted_shock_rate_closed_form():
    from shotnoise.exponent import solve_R

    c, rho, delta, mu, kappa = 2.0, 0.7, 1.3, 1.1, 0.9
    p = ModelParams(c=c, rho=rho, delta=delta, lambda0=1.0, u=0.0,
                    claim_dist=Exponential(kappa), shock_dist=Exponential(mu))
    adj = solve_R(p)
    q = tilted_params(p, adj.R)
    expected = (mu * delta * kappa * c + mu * delta * rho) / (mu * delta + 1)
    assert q.rho == pytest.approx(expected, rel=1e-10)


def test_integrated_compensator_examples():
    assert integrated_compensator(1.0, 0.0, 1.0, 1.0) == 0.0
    assert integrated_compensator(1.0, 2.0, 0.5, 1.0) == 2.5
    # no shocks, lambda_t -> 0
    assert integrated_compensator(3.0, 0.0, 0.0, 2.0) == 1.5


def test_integrated_compensator_quadrature():
    # lambda0=1, delta=1, one shock Y=2 at s; lambda_t = 0.5 fixes t
    lam0, delta, y, s = 1.0, 1.0, 2.0, 0.3
    t = math.log((lam0 + y * math.exp(delta * s)) / 0.5) / delta
    path = lambda v: lam0 * math.exp(-delta * v) + (y * math.exp(-delta * (v - s)) if v >= s else 0.0)
    quad = integrate.quad(path, 0, s)[0] + integrate.quad(path, s, t)[0]
    assert path(t) == pytest.approx(0.5, rel=1e-12)
    assert integrated_compensator(lam0, y, 0.5, delta) == pytest.approx(quad, rel=1e-10)
    with pytest.raises(ValueError):
        integrated_compensator(1.0, 0.0, 5.0, 1.0)


def test_next_claim_candidate():
    assert next_claim_candidate(1.0, 1.0, 1.0, 2.0) is None
    assert next_claim_candidate(2.0, 1.0, 1.0, 1.0) == pytest.approx(math.log(2.0), rel=1e-14)
    w = next_claim_candidate(1.0, 1.0, 1.0, 1e-12)
    assert 0 < w < 2e-12
    # inversion: hazard consumed equals the threshold
    lam, d, m, e = 1.7, 0.6, 1.3, 0.9
    w = next_claim_candidate(lam, d, m, e)
    assert m * lam * (1 - math.exp(-d * w)) / d == pytest.approx(e, rel=1e-13)


def test_degenerate_no_claims():
    p = ModelParams(c=1.0, rho=1e-300, delta=1.0, lambda0=1e-300, u=100.0,
                    claim_dist=Exponential(1.0), shock_dist=Exponential(1.0))
    res = simulate_path(p, SimConfig(Physical(), horizon=5.0, seed=1))
    assert not res.ruined
    assert res.final_state.n_claims == 0 and res.final_state.n_shocks == 0
    assert res.final_state.x == pytest.approx(105.0, rel=1e-15)


def test_horizon_rules(canonical, canonical_adj):
    with pytest.raises(HorizonRequired):
        simulate_paths(canonical, SimConfig(Physical(), horizon=None), 1)
    with pytest.raises(HorizonRequired):
        simulate_paths(canonical, SimConfig(Tilted(0.5 * canonical_adj.R), horizon=None), 1)
    simulate_paths(canonical, SimConfig(Tilted(0.5 * canonical_adj.R), horizon=10.0), 5)


def test_max_events_is_an_error(canonical):
    with pytest.raises(MaxEventsExceeded):
        simulate_paths(canonical.with_(u=1e6), SimConfig(Physical(), horizon=1e4, max_events=50), 3)


def test_event_log_replay_reconstructs_path(canonical, canonical_adj):
    # the log is replayed against the closed-form definitions of X_t and lambda_t
    p = canonical.with_(u=3.0)
    for measure, horizon in ((Physical(), 50.0), (Tilted(canonical_adj.R), None)):
        eff = p if isinstance(measure, Physical) else tilted_params(p, canonical_adj.R)
        for rep in range(20):
            res = simulate_path(p, SimConfig(measure, horizon=horizon, seed=9, record_events=True), rep)
            t = res.final_state.t
            claims = [s for (_, k, s) in res.event_log if k == "claim"]
            shocks = [(tt, s) for (tt, k, s) in res.event_log if k == "shock"]
            x = p.u + p.c * t - sum(claims)
            lam = p.lambda0 * math.exp(-p.delta * t) + sum(y * math.exp(-p.delta * (t - s)) for s, y in shocks)
            assert res.final_state.x == pytest.approx(x, rel=1e-9, abs=1e-9)
            assert res.final_state.lam == pytest.approx(lam, rel=1e-9)
            times = [e[0] for e in res.event_log]
            assert times == sorted(times)
            assert all(s > 0 for (_, _, s) in res.event_log)
            if res.ruined:
                assert res.x_tau < 0 and res.tau == t and res.event_log[-1][1] == "claim"
                # surplus never negative before the last claim
                xs = p.u
                last = 0.0
                for tt, k, s in res.event_log[:-1]:
                    xs += p.c * (tt - last) - (s if k == "claim" else 0.0)
                    last = tt
                    assert xs >= 0
            else:
                assert t == horizon


def test_single_path_matches_batch_row(canonical, canonical_adj):
    cfg = SimConfig(Tilted(canonical_adj.R), horizon=None, seed=17)
    batch = simulate_paths(canonical.with_(u=5.0), cfg, 10)
    for i in (0, 3, 9):
        res = simulate_path(canonical.with_(u=5.0), cfg, i)
        assert res.tau == batch.tau[i] and res.x_tau == batch.x_tau[i]
        assert res.final_state.n_claims == batch.n_claims[i]


def test_determinism_and_thread_invariance(canonical):
    cfg = SimConfig(Physical(), horizon=100.0, seed=123)
    outs = []
    for threads in (1, 3, 8):
        buf = io.StringIO()
        write_paths_csv(simulate_paths(canonical, cfg, 500, threads=threads), buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1] == outs[2]
    other = io.StringIO()
    write_paths_csv(simulate_paths(canonical, SimConfig(Physical(), horizon=100.0, seed=124), 500), other)
    assert other.getvalue() != outs[0]


def test_ruin_only_strictly_below_zero(canonical):
    b = simulate_paths(canonical, SimConfig(Physical(), horizon=50.0, seed=4), 2000)
    assert np.all(b.x_tau[b.ruined] < 0)
    assert np.all(b.lam > 0)


def test_compensator_consistency(canonical, canonical_adj):
    for measure in (Physical(), Tilted(canonical_adj.R)):
        cfg = SimConfig(measure, horizon=30.0, seed=2, stop_at_ruin=False)
        b = simulate_paths(canonical, cfg, 2000)
        for i in range(0, 2000, 97):
            comp = integrated_compensator(canonical.lambda0, b.shock_sum[i], b.lam[i], canonical.delta)
            assert comp == pytest.approx(b.hazard[i], rel=1e-9)


@pytest.mark.slow
def test_claim_counts_poisson_given_intensity(canonical, canonical_adj):
    # randomized PIT of N_t against Poisson(m * Lambda_t), then chi-square on 10 bins
    for measure, m in ((Physical(), 1.0), (Tilted(canonical_adj.R), 4 / 3)):
        cfg = SimConfig(measure, horizon=8.0, seed=31, stop_at_ruin=False)
        b = simulate_paths(canonical, cfg, 10_000)
        mean = m * b.hazard
        rng = np.random.default_rng(0)
        lo = stats.poisson.cdf(b.n_claims - 1, mean)
        hi = stats.poisson.cdf(b.n_claims, mean)
        pit = lo + rng.uniform(size=len(lo)) * (hi - lo)
        counts = np.histogram(pit, bins=10, range=(0, 1))[0]
        assert stats.chisquare(counts).pvalue > 0.01


@pytest.mark.slow
def test_mean_path_laws(canonical):
    times = (1.0, 5.0, 20.0)
    p = canonical.with_(u=10.0)
    b = simulate_paths(p, SimConfig(Physical(), horizon=20.0, seed=8, stop_at_ruin=False,
                                    snapshot_times=times), 50_000)
    for k, t in enumerate(times):
        for col, exact in ((b.snap_lam[:, k], mean_intensity(p, t)), (b.snap_x[:, k], mean_surplus(p, t))):
            se = col.std(ddof=1) / math.sqrt(len(col))
            assert abs(col.mean() - exact) <= 4 * se


@pytest.mark.slow
def test_tilted_paths_all_ruined(canonical, canonical_adj):
    b = simulate_paths(canonical.with_(u=10.0), SimConfig(Tilted(canonical_adj.R), seed=5), 10_000)
    assert b.ruined.all()
