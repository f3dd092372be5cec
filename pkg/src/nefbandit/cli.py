"""Command line interface: nef-bandit <verify|tails|fit|bandit|coverage|bound>.

Exit status contract: 0 means every inequality check passed and every
run completed; 1 means a violated check or an aborted run; 2 means the
invocation or configuration was invalid.  The output directory can be
forced with the NEF_BANDIT_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bandit import RunResult, run_ofu_glb, theoretical_regret_bound
from .config import ExperimentConfig, build_instance, load_config, parse_config
from .distributions import NefFamily, parse_distribution
from .errors import NefBanditError, ParseError
from .glm import Dataset, fit_mle
from .selfconcordance import StretchCertificate, build_certificate, verify_dominance
from .tailbounds import run_tail_suite

ROUNDS_HEADER = "t,arm,index,reward,inst_regret,cum_regret,exact_cover,relaxed_cover"
_OUT_ENV = "NEF_BANDIT_OUT"


def _load_dist(arg: str) -> dict:
    """Accept a path to a JSON file or an inline JSON object."""
    text = arg
    p = Path(arg)
    if p.exists():
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"distribution argument is neither a file nor valid JSON: {exc}",
                         pointer="/distribution")


def _resolve_out(explicit: str | None, cfg_out=None) -> Path | None:
    env = os.environ.get(_OUT_ENV)
    chosen = env or explicit or cfg_out
    if chosen is None:
        return None
    out = Path(chosen)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload: dict, path: Path | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def rounds_to_csv(rounds) -> str:
    lines = [ROUNDS_HEADER]
    for r in rounds:
        lines.append(f"{r.t},{r.arm},{r.index!r},{r.reward!r},{r.inst_regret!r},"
                     f"{r.cum_regret!r},{int(r.exact_cover)},{int(r.relaxed_cover)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verify / tails
# ---------------------------------------------------------------------------

def dominance_report(base, family: NefFamily, cert: StretchCertificate,
                     grid_n: int) -> dict:
    report = verify_dominance(cert, family, grid_n=grid_n)
    return {
        "schema": 1,
        "distribution": base.kind,
        "grid": {"lo": family.param_lo, "hi": family.param_hi, "n": grid_n},
        "certificate": cert.constants_dict(),
        "points": list(report.points),
        "violations": report.violations,
        "ok": report.all_ok,
    }


def _default_interval(cert: StretchCertificate) -> tuple[float, float]:
    return (-0.8 * cert.tail.c2, 0.8 * cert.tail.c1)


def cmd_verify(ns) -> int:
    base = parse_distribution(_load_dist(ns.dist))
    cert = build_certificate(base, c1=ns.c1, c2=ns.c2)
    lo, hi = _default_interval(cert)
    lo = ns.grid_lo if ns.grid_lo is not None else lo
    hi = ns.grid_hi if ns.grid_hi is not None else hi
    payload = dominance_report(base, NefFamily(base, lo, hi), cert, ns.grid_n)
    _emit(payload, Path(ns.report) if ns.report else None)
    if not payload["ok"]:
        first = next(p for p in payload["points"] if not p["ok"])
        print(f"violation at u={first['u']}: ratio {first['ratio']} > bound {first['bound']}",
              file=sys.stderr)
    return 0 if payload["ok"] else 1


def cmd_tails(ns) -> int:
    base = parse_distribution(_load_dist(ns.dist))
    interval = None
    if ns.grid_lo is not None and ns.grid_hi is not None:
        interval = (ns.grid_lo, ns.grid_hi)
    certs = run_tail_suite(base, c1=ns.c1, c2=ns.c2, interval=interval, grid_n=ns.grid_n)
    payload = {
        "schema": 1,
        "distribution": base.kind,
        "certificates": [c.as_dict() for c in certs],
        "ok": all(c.ok for c in certs),
    }
    _emit(payload, Path(ns.report) if ns.report else None)
    return 0 if payload["ok"] else 1


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(ns) -> int:
    base = parse_distribution(_load_dist(ns.dist))
    rows = np.loadtxt(ns.data, delimiter=",", ndmin=2)
    if rows.shape[1] < 2:
        raise ParseError("fit data needs columns x1,...,xd,y", pointer="/data")
    X, y = rows[:, :-1], rows[:, -1]
    lo, hi = base.mgf_domain
    plo = ns.param_lo if ns.param_lo is not None else (0.9 * lo if math.isfinite(lo) else -1e9)
    phi = ns.param_hi if ns.param_hi is not None else (0.9 * hi if math.isfinite(hi) else 1e9)
    family = NefFamily(base, plo, phi)
    result = fit_mle(family, Dataset(X, y), ns.lam)
    _emit({
        "theta_hat": result.theta_hat.tolist(),
        "gradient_norm": result.gradient_norm,
        "newton_iters": result.newton_iters,
        "converged": result.converged,
        "inner_range": [result.inner_lo, result.inner_hi],
        "outside_admissible": result.outside_admissible,
    }, None)
    return 0 if result.converged else 1


# ---------------------------------------------------------------------------
# bandit run / bound / coverage
# ---------------------------------------------------------------------------

def _run_one(payload: tuple) -> RunResult:
    raw, T, delta, seed, k, lam = payload
    inst = build_instance(parse_config(raw))
    return run_ofu_glb(inst, T, delta, seed=seed, replicate=k, lam_override=lam)


def _run_replicates(cfg: ExperimentConfig, seed: int, workers: int) -> list[RunResult]:
    jobs = [(cfg.to_dict(), cfg.horizon, cfg.delta, seed, k, cfg.lam)
            for k in range(cfg.replicates)]
    if workers <= 1 or cfg.replicates == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def _summary(cfg: ExperimentConfig, results: list[RunResult], seed: int) -> dict:
    finals = [r.cum_regret for r in results if not r.aborted]
    covered = sum(1 for r in results if not r.aborted and r.all_rounds_covered)
    aborted = sum(1 for r in results if r.aborted)
    qs = {}
    if finals:
        arr = np.asarray(finals)
        qs = {"min": float(arr.min()),
              "q25": float(np.quantile(arr, 0.25)),
              "median": float(np.quantile(arr, 0.5)),
              "q75": float(np.quantile(arr, 0.75)),
              "max": float(arr.max()),
              "mean": float(arr.mean())}
    inst = build_instance(cfg)
    bound = theoretical_regret_bound(inst, cfg.horizon, cfg.delta, lam=cfg.lam)
    return {
        "schema": 1,
        "horizon": cfg.horizon,
        "delta": cfg.delta,
        "seed": seed,
        "replicates": cfg.replicates,
        "aborted": aborted,
        "coverage_rate": covered / max(len(results) - aborted, 1),
        "final_regret": qs,
        "bound": bound.as_dict(),
    }


def cmd_bandit_run(ns) -> int:
    cfg = load_config(ns.config)
    seed = ns.seed if ns.seed is not None else cfg.seed
    workers = ns.workers if ns.workers is not None else cfg.workers
    out = _resolve_out(ns.out, cfg.out)
    if out is None:
        raise ParseError("bandit run needs an output directory (--out, config field, "
                         f"or ${_OUT_ENV})", pointer="/out")
    results = _run_replicates(cfg, seed, workers)
    if cfg.replicates == 1:
        (out / "rounds.csv").write_text(rounds_to_csv(results[0].rounds))
    else:
        for k, res in enumerate(results):
            (out / f"rounds_rep{k:03d}.csv").write_text(rounds_to_csv(res.rounds))
    _emit(_summary(cfg, results, seed), out / "summary.json")
    aborted = [r.abort_reason for r in results if r.aborted]
    if aborted:
        print(f"{len(aborted)} replicate(s) aborted; first: {aborted[0]}", file=sys.stderr)
    return 1 if aborted else 0


def cmd_bound(ns) -> int:
    cfg = load_config(ns.config)
    inst = build_instance(cfg)
    bound = theoretical_regret_bound(inst, cfg.horizon, cfg.delta, lam=cfg.lam)
    _emit(bound.as_dict(), Path(ns.report) if getattr(ns, "report", None) else None)
    return 0


def cmd_coverage(ns) -> int:
    cfg = load_config(ns.config)
    if ns.replicates is not None:
        cfg = parse_config({**cfg.to_dict(), "replicates": ns.replicates})
    seed = ns.seed if ns.seed is not None else cfg.seed
    workers = ns.workers if ns.workers is not None else cfg.workers
    results = _run_replicates(cfg, seed, workers)
    aborted = sum(1 for r in results if r.aborted)
    done = [r for r in results if not r.aborted]
    covered = sum(1 for r in done if r.all_rounds_covered)
    payload = {
        "schema": 1,
        "replicates": cfg.replicates,
        "aborted": aborted,
        "covered": covered,
        "coverage_rate": covered / max(len(done), 1),
        "delta": cfg.delta,
        "horizon": cfg.horizon,
        "seed": seed,
    }
    out = _resolve_out(ns.out, cfg.out)
    _emit(payload, (out / "coverage.json") if out else None)
    return 1 if aborted else 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_grid_flags(p):
    p.add_argument("--grid-lo", type=float, default=None)
    p.add_argument("--grid-hi", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=200)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--report", default=None, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nef-bandit",
                                     description="exponential-family bandit toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="stretch-bound dominance grid for one distribution")
    p.add_argument("--dist", required=True, help="distribution config (file or inline JSON)")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tails", help="tail/MGF inequality certificates")
    p.add_argument("--dist", required=True)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("fit", help="fit the regularized estimator on csv rows x1,...,xd,y")
    p.add_argument("--data", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--param-lo", type=float, default=None)
    p.add_argument("--param-hi", type=float, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bandit", help="simulation commands")
    bsub = p.add_subparsers(dest="bandit_command", required=True)
    pr = bsub.add_parser("run", help="simulate replicates and write rounds.csv + summary.json")
    pr.add_argument("--config", required=True)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--out", default=None)
    pr.add_argument("--workers", type=int, default=None)
    pr.set_defaults(func=cmd_bandit_run)
    pb = bsub.add_parser("bound", help="print the three regret bound terms")
    pb.add_argument("--config", required=True)
    pb.add_argument("--report", default=None)
    pb.set_defaults(func=cmd_bound)

    p = sub.add_parser("bound", help="print the three regret bound terms")
    p.add_argument("--config", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("coverage", help="Monte-Carlo coverage of the exact confidence set")
    p.add_argument("--config", required=True)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_coverage)
    return parser


def run_suite(cfg: ExperimentConfig, out_dir) -> int:
    """Dispatch every applicable check for one config; 0 iff all pass.

    Writes verify/tails reports for the distribution, and when the
    config carries an instance also the bandit rounds, the coverage
    summary, and the bound terms.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = parse_distribution(cfg.distribution)
    cert = build_certificate(base)
    lo, hi = _default_interval(cert)
    if cfg.grid:
        lo = cfg.grid.get("lo", lo)
        hi = cfg.grid.get("hi", hi)
    n = int(cfg.grid.get("n", 200)) if cfg.grid else 200
    status = 0
    payload = dominance_report(base, NefFamily(base, lo, hi), cert, n)
    _emit(payload, out / "verify.json")
    status = max(status, 0 if payload["ok"] else 1)
    certs = run_tail_suite(base, interval=(lo, hi))
    _emit({"schema": 1, "certificates": [c.as_dict() for c in certs],
           "ok": all(c.ok for c in certs)}, out / "tails.json")
    status = max(status, 0 if all(c.ok for c in certs) else 1)
    if cfg.has_instance:
        results = _run_replicates(cfg, cfg.seed, cfg.workers)
        if cfg.replicates == 1:
            (out / "rounds.csv").write_text(rounds_to_csv(results[0].rounds))
        else:
            for k, res in enumerate(results):
                (out / f"rounds_rep{k:03d}.csv").write_text(rounds_to_csv(res.rounds))
        _emit(_summary(cfg, results, cfg.seed), out / "summary.json")
        status = max(status, 1 if any(r.aborted for r in results) else 0)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NefBanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
