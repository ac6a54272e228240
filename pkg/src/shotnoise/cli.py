"""Command-line interface: ``shotnoise {solve,bound,simulate,estimate,scan,validate}``.

Exit codes: 0 success, 1 validation failure (bad config, net profit
violated, no adjustment coefficient, failed invariant), 2 runtime failure
(event cap hit, unruined importance-sampling path).
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from typing import List, Optional, Sequence

from . import config as cfgmod
from .distributions import MGFDomainError
from .dynamics import (
    HorizonRequired,
    MaxEventsExceeded,
    Physical,
    SimConfig,
    Tilted,
    default_threads,
    simulate_paths,
    write_paths_csv,
)
from .estimators import (
    PathNotRuined,
    bound_scan,
    crude_ruin_probability,
    is_monotone,
    is_ruin_probability,
    martingale_check,
)
from .exponent import (
    ModelParams,
    NetProfitError,
    NoRootError,
    canonical_params,
    lundberg_bound,
    mean_intensity,
    mean_surplus,
    solve_R,
)
from .renewal import asymptotic_scan


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="model JSON file")
    src.add_argument("--canonical", action="store_true",
                     help="built-in model: unit-rate exponential laws, delta=1, rho=0.5, c=1, lambda0=1")
    common.add_argument("--unsafe", action="store_true", help="skip the net profit check")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SHOTNOISE_THREADS or 1); results do not depend on it")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="shotnoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common], help="adjustment coefficient and Lundberg bound")

    b = sub.add_parser("bound", parents=[common], help="Lundberg bound at given u / lambda0")
    b.add_argument("--u", type=float, default=None)
    b.add_argument("--lambda0", type=float, default=None)

    s = sub.add_parser("simulate", parents=[common], help="per-path CSV of simulated trajectories")
    s.add_argument("--paths", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--measure", choices=["p", "q"], default="p",
                   help="p: physical measure; q: tilted at the adjustment coefficient")
    s.add_argument("--horizon", type=float, default=None)
    s.add_argument("--max-events", type=int, default=10_000_000)

    e = sub.add_parser("estimate", parents=[common], help="ruin probability estimate")
    e.add_argument("--method", choices=["crude", "is", "both"], default="is")
    e.add_argument("--u", type=float, default=None)
    e.add_argument("--lambda0", type=float, default=None)
    e.add_argument("--paths", type=int, default=10_000)
    e.add_argument("--horizon", type=float, default=400.0, help="crude MC horizon")
    e.add_argument("--seed", type=int, default=0)

    sc = sub.add_parser("scan", parents=[common], help="psi(u) exp(R u) over a grid of u")
    sc.add_argument("--u-grid", default="5,10,20,40,80")
    sc.add_argument("--paths-per-point", type=int, default=10_000)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--band", type=float, default=0.15)

    v = sub.add_parser("validate", parents=[common], help="run the invariant checks")
    v.add_argument("--paths", type=int, default=20_000)
    v.add_argument("--seed", type=int, default=0)
    return p


def _load(args) -> ModelParams:
    if args.canonical:
        return canonical_params().with_(unsafe=args.unsafe)
    return cfgmod.load_params(args.config, unsafe=args.unsafe)


def _override(params: ModelParams, args) -> ModelParams:
    changes = {}
    if getattr(args, "u", None) is not None:
        changes["u"] = args.u
    if getattr(args, "lambda0", None) is not None:
        changes["lambda0"] = args.lambda0
    return params.with_(**changes) if changes else params


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(params, args, threads):
    adj = solve_R(params)
    return cfgmod.dumps({
        "R": adj.R, "alpha_R": adj.alpha_R, "theta_prime_R": adj.theta_prime_R,
        "epsilon_slack": adj.epsilon_slack, "u": params.u, "lambda0": params.lambda0,
        "bound": lundberg_bound(params, adj),
    }) + "\n"


def cmd_bound(params, args, threads):
    params = _override(params, args)
    adj = solve_R(params)
    return cfgmod.dumps({
        "u": params.u, "lambda0": params.lambda0, "R": adj.R, "alpha_R": adj.alpha_R,
        "bound": lundberg_bound(params, adj),
    }) + "\n"


def cmd_simulate(params, args, threads):
    if args.measure == "q":
        measure = Tilted(solve_R(params).R)
    else:
        measure = Physical()
    cfg = SimConfig(measure=measure, horizon=args.horizon, seed=args.seed,
                    max_events=args.max_events)
    batch = simulate_paths(params, cfg, args.paths, threads)
    buf = io.StringIO()
    write_paths_csv(batch, buf)
    return buf.getvalue()


def cmd_estimate(params, args, threads):
    params = _override(params, args)
    adj = solve_R(params)
    bound = lundberg_bound(params, adj)
    results = []
    if args.method in ("crude", "both"):
        results.append(crude_ruin_probability(params, args.horizon, args.paths, args.seed, threads))
    if args.method in ("is", "both"):
        results.append(is_ruin_probability(params, adj, args.paths, args.seed, threads))
    rows = []
    for est in results:
        row = est.as_dict()
        row["bound"] = bound
        row["u"] = params.u
        row["lambda0"] = params.lambda0
        if est.method == "crude":
            row["horizon"] = args.horizon
        rows.append(row)
    return cfgmod.dumps(rows[0] if len(rows) == 1 else rows) + "\n"


def _grid(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise cfgmod.ConfigError(f"bad --u-grid {text!r}") from None


def cmd_scan(params, args, threads):
    adj = solve_R(params)
    scan = asymptotic_scan(params, adj, _grid(args.u_grid), args.paths_per_point,
                           args.seed, args.band, threads)
    f = cfgmod.fmt
    lines = ["u,psi_hat,stderr,psi_eru,stderr_eru,bound"]
    for k, u in enumerate(scan.u_grid):
        lines.append(",".join([f(u), f(scan.psi_hat[k]), f(scan.psi_stderr[k]),
                               f(scan.values[k]), f(scan.stderrs[k]), f(scan.bounds[k])]))
    sys.stderr.write(f"stabilized: {scan.stabilized}\n")
    return "\n".join(lines) + "\n"


def validation_table(params: ModelParams, n: int, seed: int = 0, threads=None):
    """Rows ``(check, detail, passed)`` for the invariant suite."""
    rows = []
    adj = solve_R(params)
    for k, r in enumerate((0.0, adj.R / 2, adj.R)):
        rep = martingale_check(params, r, (1.0, 5.0, 10.0), n, seed + 10 + k, threads)
        detail = " ".join(f"t={t:g}:{m:.4f}+-{s:.4f}" for t, m, s in zip(rep.times, rep.means, rep.stderrs))
        rows.append((f"martingale r={r:.6g}", detail, rep.passed))

    times = (1.0, 5.0, 20.0)
    cfg = SimConfig(Physical(), horizon=times[-1], seed=seed + 20, stop_at_ruin=False,
                    snapshot_times=times)
    batch = simulate_paths(params, cfg, n, threads)
    for k, t in enumerate(times):
        for name, col, exact in (("E[lambda_t]", batch.snap_lam[:, k], mean_intensity(params, t)),
                                 ("E[X_t]", batch.snap_x[:, k], mean_surplus(params, t))):
            m = float(col.mean())
            se = float(col.std(ddof=1)) / math.sqrt(n)
            rows.append((f"{name} t={t:g}", f"{m:.5f} vs {exact:.5f} (se {se:.5f})",
                         abs(m - exact) <= 4 * se))

    scan = bound_scan(params, adj, (0.0, 5.0, 10.0, 20.0, 40.0), n, seed + 30, threads)
    for row in scan:
        ok = row.ok and row.estimate.max_weight <= row.bound
        rows.append((f"bound u={row.u:g}", f"{row.estimate.point:.6g} <= {row.bound:.6g}", ok))
    rows.append(("bound scan monotone", "2 se tolerance", is_monotone(scan)))
    return rows


def cmd_validate(params, args, threads):
    rows = validation_table(params, args.paths, args.seed, threads)
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}" for name, detail, ok in rows]
    text = "\n".join(lines) + "\n"
    return text, all(ok for _, _, ok in rows)


COMMANDS = {
    "solve": cmd_solve, "bound": cmd_bound, "simulate": cmd_simulate,
    "estimate": cmd_estimate, "scan": cmd_scan, "validate": cmd_validate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    threads = args.threads if args.threads is not None else default_threads()
    try:
        params = _load(args)
        result = COMMANDS[args.command](params, args, threads)
    except (cfgmod.ConfigError, NetProfitError, NoRootError, MGFDomainError,
            HorizonRequired, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (MaxEventsExceeded, PathNotRuined) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2
    ok = True
    if isinstance(result, tuple):
        result, ok = result
    _emit(result, args.out)
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())
