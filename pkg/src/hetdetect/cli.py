"""Command line front end. Every subcommand reads one JSON config.

Floats are written with ``repr`` so reruns with the same seed produce
byte-identical output for any ``--workers``.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import concentration as conc
from . import harness, priors, rates
from . import quantiles as qt
from .model import class_from_dict, profile_from_dict, sample, signal_from_dict
from .procedures import procedure_from_dict


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def _ab(cfg):
    return float(cfg.get("alpha", 0.05)), float(cfg.get("beta", 0.05))


def _json(obj):
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


# -- subcommands --------------------------------------------------------------


def cmd_quantile(cfg, args):
    q = cfg["quantile"]
    alpha = float(q.get("alpha", cfg.get("alpha", 0.05)))
    stat = q.get("statistic", "weighted-chisq")
    if "method" in q:
        method = qt.method_from_dict(q["method"])
    else:
        method = qt.EXACT if stat == "max-chisq" else qt.MONTE_CARLO
    if stat == "weighted-chisq":
        profile = profile_from_dict(cfg["profile"])
        value = qt.weighted_chisq_quantile(profile, int(q["D"]), alpha, method, args.workers)
    elif stat == "max-chisq":
        value = qt.max_chisq_quantile(int(q["n"]), alpha, method, args.workers)
    elif stat == "gaussian-abs":
        method = qt.EXACT
        value = qt.gaussian_abs_quantile(float(q.get("sigma", 1.0)), alpha)
    else:
        raise ValueError(f"unknown statistic {stat!r}")
    out = {"value": value, "method": method.kind, "reps": None, "seed": None}
    if method.kind == "monte-carlo":
        out.update(reps=method.reps, seed=method.seed)
    return _json(out)


def cmd_test(cfg, args):
    profile = profile_from_dict(cfg["profile"])
    proc = procedure_from_dict(cfg["test"])
    if args.data:
        Y = np.atleast_1d(np.loadtxt(args.data, dtype=np.float64, ndmin=1))
    else:
        Y = sample(profile, signal_from_dict(cfg.get("signal")), cfg.get("seed", 0)).values
    return _json(proc.run(Y, profile, args.workers).to_dict())


def _rate_rows(cfg):
    alpha, beta = _ab(cfg)
    r = cfg.get("rates", {})
    profile = profile_from_dict(cfg["profile"]) if "profile" in cfg else None
    rows = [rates.RateResult("c_alpha_beta", rates.c_alpha_beta(alpha, beta), "factor", "sqrt(2 ln(1+4(1-a-b)^2))")]
    for D in r.get("D", []):
        rows.append(rates.RateResult("rho_D_sq", rates.rho_D_sq(profile, D, alpha, beta), "lower", "c(a,b) (sum_{j<=D} sigma_j^4)^(1/2)", {"D": D}))
    for k, n in r.get("kn", []):
        blk, l, tail = rates.rho_kn_terms(profile, k, n)
        rows.append(rates.RateResult("rho_kn_sq", max(blk, tail), "lower", "max_l Sigma^2_{l,k} ln(1+x v sqrt x) v tail", {"k": k, "n": n, "l": l}))
        ub = rates.sparse_upper_sq(profile, k, n, alpha, beta)
        rows.append(rates.RateResult("sparse_upper_sq", ub.value, "upper", "min(C1 (sum sigma^4)^(1/2), C2 Sigma^2_{n-k,k} ln n)", {"k": k, "n": n}))
        rows.append(rates.RateResult("sparse_upper_unscaled", ub.unscaled, "upper", "min(chisq channel, max channel) without constants", {"k": k, "n": n}))
    for n in r.get("n_inf", []):
        rows.append(rates.RateResult("rho_n_inf", rates.rho_n_inf(profile, n), "lower", "max_l sigma_(l+1) sqrt(ln(1+n-l))", {"n": n}))
    cls = class_from_dict(cfg["class"]) if "class" in cfg else None
    if cls is not None and cls.kind == "ellipsoid":
        eb = rates.ellipsoid_rate_bounds(cls.a, cls.R, profile, alpha, beta, r.get("constant"))
        rows.append(rates.RateResult("ellipsoid_lower", eb.lower, "lower", "sup_D min(rho_D^2, R^2 a_D^-2)", {"D": eb.lower_D}))
        rows.append(rates.RateResult("ellipsoid_upper", eb.upper, "upper", "inf_D C rho_D^2 + R^2 a_D^-2", {"D": eb.upper_D}))
    if cls is not None and cls.kind == "lp-body":
        for D in r.get("lp_D", []):
            r1, r2 = rates.lp_lower_bound(cls.a, cls.p, cls.R, profile, D)
            rows.append(rates.RateResult("lp_rho_1", r1, "lower", "max_l min(bias ratio, block log)", {"D": D}))
            rows.append(rates.RateResult("lp_rho_2", r2, "lower", "min(bias, tail fourth moment)", {"D": D}))
        val, D = rates.lp_rate_combined(cls.a, cls.p, cls.R, profile)
        rows.append(rates.RateResult("lp_rate_combined", val, "lower", "sup_D min(rho^2_{k,D}, bias_D)", {"D": D}))
        dd = rates.d_dagger(cls.a, cls.p, cls.R, profile)
        rows.append(rates.RateResult("d_dagger", float(dd), "factor", "first D with bias_D <= rho^2_{k,D}", {"D": dd}))
        regime = r.get("regime")
        if regime:
            N = profile.horizon
            rows.append(rates.RateResult("lp_lambda", rates.lp_lambda(regime, N, dd, cls.p), "factor", f"{regime} ill-posed multiplier", {"n": N, "D": dd}))
    for case in r.get("rate_table", []):
        case = dict(case)
        name = case.pop("case")
        sigma = case.pop("sigma")
        rows.append(rates.RateResult("minimax_rate", rates.minimax_rate(name, sigma, **case), "lower", name, {}))
    return rows


def cmd_rates(cfg, args):
    out = []
    for r in _rate_rows(cfg):
        a = r.args
        out.append([r.name, r.side, float(r.value), a.get("D"), a.get("k"), a.get("n"), a.get("l")])
    return _csv(["name", "side", "value", "D", "k", "n", "l"], out)


def _prior(cfg, profile):
    p = dict(cfg["prior"])
    alpha, beta = _ab(cfg)
    kind = p["kind"]
    if p.get("rho", "certified") == "certified":
        rho = priors.certified_radius(kind, profile, alpha, beta, D=p.get("D"), k=p.get("k"), n=p.get("n"), l=p.get("l", 0))
    elif p["rho"] == "rho_D":
        rho = math.sqrt(rates.rho_D_sq(profile, p["D"], alpha, beta))
    else:
        rho = float(p["rho"]) * float(p.get("rho_scale", 1.0))
    return priors.PriorSpec(kind, profile, rho, D=p.get("D"), k=p.get("k"), n=p.get("n"), l=p.get("l", 0))


def cmd_lower_bound(cfg, args):
    alpha, beta = _ab(cfg)
    profile = profile_from_dict(cfg["profile"])
    spec = _prior(cfg, profile)
    kind = cfg["prior"].get("report", "exact")
    ok, margin, rep = priors.divergence_check(spec, alpha, beta, kind)
    out = {"prior": spec.to_dict(), **rep.to_dict(), "passes": ok}
    reps = cfg["prior"].get("reps")
    if reps:
        m1, m2 = priors.null_moments(spec, int(reps), cfg.get("seed", 0), args.workers)
        good = m1.within(1.0) and m2.within(rep.exact)
        out["monte_carlo"] = {"E0_L": m1.mean, "E0_L_se": m1.se, "E0_L2": m2.mean, "E0_L2_se": m2.se, "identities_hold": good}
        if not good:
            return _json(out), False
    return _json(out), True


def cmd_concentration(cfg, args):
    c = cfg["concentration"]
    profile = profile_from_dict(cfg["profile"])
    signal = signal_from_dict(cfg.get("signal"))
    rows = conc.verify_tail(profile, signal, int(c["D"]), c.get("x", [0.25, 0.5, 1, 2, 3]), int(c.get("reps", 10**5)), cfg.get("seed", 0), args.workers)
    body = _csv(
        ["x", "threshold_up", "threshold_down", "emp_up", "emp_down", "bound"],
        [[r.x, r.threshold_up, r.threshold_down, r.emp_up, r.emp_down, r.bound] for r in rows],
    )
    return body, all(r.ok for r in rows)


def _level_ok(proc, est):
    if proc.kind in ("combined", "sparse-dagger"):
        return est.at_most(proc.alpha)
    return est.within(proc.alpha)


def cmd_verify_level(cfg, args):
    profile = profile_from_dict(cfg["profile"])
    procs = cfg["tests"] if "tests" in cfg else [cfg["test"]]
    reps = int(cfg.get("level", {}).get("reps", 10**5))
    rows, summary, good = [], [], True
    for d in procs:
        proc = procedure_from_dict(d)
        est = harness.estimate_level(harness.ExperimentConfig(profile, proc, None, reps, cfg.get("seed", 0), args.workers))
        ok = bool(_level_ok(proc, est))
        good &= ok
        lo, hi = est.interval
        rows.append([proc.kind, proc.alpha, reps, est.value, lo, hi, ok])
        summary.append({"test": proc.to_dict(), **est.to_dict(), "pass": ok})
    return _csv(["kind", "alpha", "reps", "estimate", "ci_low", "ci_high", "pass"], rows), {"checks": summary, "pass": good}, good


def cmd_verify_power(cfg, args):
    alpha, beta = _ab(cfg)
    profile = profile_from_dict(cfg["profile"])
    proc = procedure_from_dict(cfg["test"])
    pw = cfg.get("power", {})
    reps = int(pw.get("reps", 20000))
    alt = _prior(cfg, profile) if "prior" in cfg else signal_from_dict(cfg.get("signal"))
    hc = harness.ExperimentConfig(profile, proc, alt, reps, cfg.get("seed", 0), args.workers)
    est = harness.estimate_power(hc, level_reps=int(pw.get("level_reps", 10**5)))
    ok = bool(est.value >= 1 - beta - 3 * est.se_at(1 - beta))
    lo, hi = est.interval
    body = _csv(["kind", "alpha", "beta", "reps", "power", "ci_low", "ci_high", "pass"], [[proc.kind, alpha, beta, reps, est.value, lo, hi, ok]])
    return body, {"test": proc.to_dict(), **est.to_dict(), "target": 1 - beta, "pass": ok}, ok


def _settings(d):
    d = d or {}
    return harness.BisectionSettings(
        lo=float(d.get("lo", 0.0)),
        hi=None if d.get("hi") is None else float(d["hi"]),
        rel_tol=float(d.get("rel_tol", 0.02)),
        max_iter=int(d.get("max_iter", 20)),
        reps=int(d.get("reps", 20000)),
    )


def cmd_separation(cfg, args):
    alpha, beta = _ab(cfg)
    profile = profile_from_dict(cfg["profile"])
    proc = procedure_from_dict(cfg["test"])
    s = cfg.get("separation", {})
    pl = s.get("placement", {"kind": "worst-case-top-variances", "k": 1, "n": proc.width or profile.horizon})
    place = harness.Placement(pl["kind"], k=int(pl.get("k", 1)), n=pl.get("n"), support=tuple(pl.get("support", ())))
    res = harness.empirical_separation(profile, proc, beta, place, _settings(s.get("bisection")), cfg.get("seed", 0), args.workers)
    body = _csv(["rho", "power", "half_width"], [[p.rho, p.power, p.half_width] for p in res.curve])
    return body, res.to_dict(), True


def cmd_scaling(cfg, args):
    alpha, beta = _ab(cfg)
    s = cfg["scaling"]
    q = qt.method_from_dict(s["quantile"]) if "quantile" in s else None
    res = harness.scaling_experiment(
        float(s.get("s", 2)), float(s.get("t", 1)), s.get("sigmas", [0.2, 0.1, 0.05, 0.025, 0.0125]),
        R=float(s.get("R", 1.0)), alpha=alpha, beta=beta, settings=_settings(s.get("bisection")),
        seed=cfg.get("seed", 0), workers=args.workers, quantile=q,
    )
    tol = float(s.get("tolerance", 0.15))
    ok = bool(res.relative_error <= tol)
    body = _csv(["sigma", "D", "window_sq", "bias_sq", "rho_sq"], [[p.sigma, p.D, p.window_sq, p.bias_sq, p.rho_sq] for p in res.points])
    return body, {**res.to_dict(), "tolerance": tol, "pass": ok}, ok


COMMANDS = {
    "quantile": (cmd_quantile, "null quantile of a test statistic (JSON)"),
    "test": (cmd_test, "run a test on data (JSON outcome)"),
    "rates": (cmd_rates, "separation-rate table (CSV)"),
    "lower-bound": (cmd_lower_bound, "prior chi-square divergence report (JSON)"),
    "concentration": (cmd_concentration, "empirical tails against deviation bounds (CSV)"),
    "verify-level": (cmd_verify_level, "Monte Carlo level check (CSV + JSON summary)"),
    "verify-power": (cmd_verify_power, "Monte Carlo power check (CSV + JSON summary)"),
    "separation": (cmd_separation, "bisection for the empirical separation radius"),
    "scaling": (cmd_scaling, "log-log slope of separation radii over a noise grid"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="hetdetect", description="Detection tests for heteroscedastic Gaussian sequences.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("-o", "--output", help="write the main output here instead of stdout")
        if name in ("verify-level", "verify-power", "separation", "scaling"):
            p.add_argument("--summary", help="write the JSON summary here (default: after the CSV on stderr)")
        if name == "test":
            p.add_argument("--data", help="observations, one value per line")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = _load(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    func = COMMANDS[args.command][0]
    try:
        result = func(cfg, args)
    except (ValueError, KeyError, harness.LevelNotCertified) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok, summary = True, None
    if isinstance(result, tuple):
        if len(result) == 3:
            body, summary, ok = result
        else:
            body, ok = result
    else:
        body = result
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    if summary is not None:
        if args.summary:
            with open(args.summary, "w") as fh:
                fh.write(_json(summary))
        else:
            sys.stderr.write(_json(summary))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
