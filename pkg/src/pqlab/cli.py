"""Command-line entry points.

Subcommands: derive, solve, verify-bound, trace-degiorgi, check-caccioppoli,
check-energy, check-varsol, lemma, sweep.  Exit codes: 0 pass, 1
verification fail, 2 solver failure, 3 config/parameter error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import degiorgi, harness, lemmas
from .errors import ConfigError, DivergenceError, ParameterError, StepFailure
from .exponents import StructureParams, check_gap, derive
from .grid import (
    Cylinder,
    Domain,
    constant_field,
    field_from_function,
    save_field_csv,
    save_field_dump,
)
from .solver import comparison_maps, energy_report, solve, variational_gap_curve

_VAR_TOL = 1e-6
_CACCIOPPOLI_CAP = 1e3


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _energy_dict(e) -> dict:
    return {
        "sup_l2": e.sup_l2,
        "grad_term": e.grad_term,
        "eps_term": e.eps_term,
        "dual_term": e.dual_term,
        "wnorm_term": e.wnorm_term,
        "dg_gamma_term": e.dg_gamma_term,
        "dg_mu_term": e.dg_mu_term,
        "g_sup_l2": e.g_sup_l2,
        "eps_dg_term": e.eps_dg_term,
        "lhs_total": e.lhs_total,
        "m_g": e.m_g,
        "c_emp": e.empirical_constant,
    }


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    updates = {}
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "calibration", None) is not None:
        updates["c_cal"] = args.calibration
    return dataclasses.replace(cfg, **updates) if updates else cfg


def cmd_derive(args) -> int:
    params = StructureParams(
        n=args.n, p=args.p, q=args.q, alpha=args.alpha, beta=args.beta,
        mu=args.mu, eps=args.eps,
    )
    gap = check_gap(params)
    record = {
        "params": {
            "n": params.n, "p": params.p, "q": params.q,
            "alpha": params.alpha, "beta": params.beta, "mu": params.mu,
            "eps": params.eps,
        },
        "gap": {
            "ok": gap.ok,
            "margin": gap.margin,
            "rhs": gap.rhs,
            "coefficient_product": gap.coefficient_product,
            "coefficient_floor": gap.coefficient_floor,
            "implied_restriction_ok": gap.implied_restriction_ok,
        },
    }
    if not gap.ok:
        _print_json(record)
        return 3
    d = derive(params)
    record["exponents"] = {
        k: getattr(d, k)
        for k in (
            "p_alpha", "q_beta", "beta_conj", "gamma", "m", "kappa",
            "theta1", "theta2", "theta3", "p_conj", "p_alpha_conj",
            "q_beta_conj", "q_equals_p",
        )
    }
    record["chain"] = {
        "gamma": d.gamma,
        "gamma_over_beta_conj": d.gamma / d.beta_conj,
        "p_alpha_ratio": d.p_alpha / (d.p_alpha + 1.0 - d.q),
        "p_ratio": d.p / (d.p + 1.0 - d.q),
        "q": d.q,
        "lower": 2.0,
    }
    _print_json(record)
    return 0


def _lemma_mollify() -> list:
    dom = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=9, nt=256)
    h = 0.5
    ones = constant_field(dom, 1.0)
    m = lemmas.mollify_time(ones, h)
    exact = 1.0 - np.exp(-(dom.T - dom.times) / h)
    err = float(np.abs(m.values - exact[:, None]).max())
    verdicts = [{"case": "mollify-constant", "max_error": err, "pass": err < 1e-10}]

    smooth = lambda x, t: np.sin(np.pi * x) * np.cos(2.0 * t)
    res = []
    for nt in (128, 256):
        dom_j = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=9, nt=nt)
        res.append(lemmas.mollifier_derivative_residual(field_from_function(dom_j, smooth), h))
    order = math.log2(res[0] / res[1])
    verdicts.append({"case": "mollify-derivative-order", "order": order, "pass": order >= 1.8})
    return verdicts


def _lemma_interp() -> list:
    dom = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=129, nt=64)
    v = field_from_function(dom, lambda x, t: np.sin(np.pi * x))
    cyl = Cylinder((0.5, 1.0), rho=0.5 + 1e-9, sigma=0.75)
    p_alpha = 1.9
    r1 = lemmas.interpolation_ratio(v, cyl, p_alpha)
    v2 = field_from_function(dom, lambda x, t: 2.0 * np.sin(np.pi * x))
    r2 = lemmas.interpolation_ratio(v2, cyl, p_alpha)
    rel = abs(r2 / r1 - 1.0)
    return [
        {"case": "interp-finite", "ratio": r1, "pass": 0.0 < r1 < math.inf},
        {"case": "interp-scaling-invariance", "rel_change": rel, "pass": rel < 1e-10},
    ]


def _lemma_geom() -> list:
    g = lemmas.GeometricIteration(C=1.0, lam=2.0, kappa=1.0, X0=0.5)
    res = lemmas.geometric_iterate(g, max_iter=60)
    expect = 2.0 ** -(np.arange(len(res.values)) + 1.0)
    expect[0] = 0.5
    err = float(np.abs(res.values - expect).max())
    verdicts = [
        {"case": "geom-exact-trajectory", "max_error": err,
         "pass": err < 1e-14 and res.converged}
    ]
    rng = np.random.default_rng(7)
    ok = True
    for _ in range(20):
        c = float(rng.uniform(0.1, 10.0))
        lam = float(rng.uniform(1.2, 4.0))
        kap = float(rng.uniform(0.3, 2.5))
        g = lemmas.GeometricIteration(C=c, lam=lam, kappa=kap, X0=0.0)
        g = dataclasses.replace(g, X0=float(rng.uniform(0.05, 0.95)) * g.threshold)
        ok &= lemmas.geometric_iterate(g, max_iter=200).converged
    diverged = lemmas.geometric_iterate(
        lemmas.GeometricIteration(C=1.0, lam=2.0, kappa=1.0, X0=1.0), max_iter=200
    ).diverged
    verdicts.append({"case": "geom-dichotomy", "pass": bool(ok and diverged)})
    return verdicts


def _lemma_absorb() -> list:
    cases = [
        (lemmas.AbsorptionParams(0.5, 0, 0, 0, 5.0, 2, 1, 0, 0.0, 1.0), 5.0),
        (lemmas.AbsorptionParams(0.5, 1, 2, 3, 4, 3, 2, 1, 0.0, 1.0), 10.0),
        (lemmas.AbsorptionParams(0.5, 1, 0, 0, 0, 2, 1, 0, 0.5, 1.0), 4.0),
    ]
    verdicts = []
    for i, (params, expect) in enumerate(cases):
        got = lemmas.absorption_bound(params)
        verdicts.append(
            {"case": f"absorb-{i}", "value": got, "pass": abs(got - expect) < 1e-12}
        )
    return verdicts


def cmd_lemma(args) -> int:
    runners = {
        "mollify": _lemma_mollify,
        "interp": _lemma_interp,
        "geom": _lemma_geom,
        "absorb": _lemma_absorb,
    }
    verdicts = runners[args.case]()
    _print_json(verdicts)
    return 0 if all(v["pass"] for v in verdicts) else 1


def cmd_solve(args) -> int:
    cfg = _load(args)
    scfg = cfg.solve_config()
    u, stats = solve(scfg)
    prefix = args.out or "solution"
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_field_dump(u, prefix + ".pqf")
    save_field_csv(u, prefix + ".csv")
    manifest = {
        "eps": scfg.spec.eps,
        "iterations": stats.iterations,
        "max_residual": float(max(stats.residuals)),
        "total_iterations": stats.total_iterations,
        "nx": cfg.domain.nx,
        "nt": cfg.domain.nt,
    }
    with open(prefix + "_manifest.json", "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(prefix + "_energy.json", "w", encoding="ascii") as fh:
        json.dump(_energy_dict(energy_report(u, scfg)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"solved: {prefix}.pqf ({stats.total_iterations} nonlinear iterations)")
    return 0


def _solve_with_targets(cfg):
    scfg = cfg.solve_config()
    u, _ = solve(scfg)
    return u, scfg


def cmd_verify_bound(args) -> int:
    cfg = _load(args)
    u, scfg = _solve_with_targets(cfg)
    reports = [
        degiorgi.verify_sup_bound(u, center, rho, sigma, scfg.spec, cfg.c_cal)
        for center, rho, sigma in cfg.target_cylinders()
    ]
    rows = [harness._bound_row(0, b, cfg.domain.n) for b in reports]
    out = args.out or os.path.join(cfg.out_dir, "bounds.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    harness._write_csv(out, harness.bound_csv_header(cfg.domain.n), rows)
    print(f"{sum(b.passed for b in reports)}/{len(reports)} targets pass; report: {out}")
    return 0 if all(b.passed for b in reports) else 1


def cmd_trace(args) -> int:
    cfg = _load(args)
    u, scfg = _solve_with_targets(cfg)
    rows = []
    summaries = []
    monotone = True
    for ti, (center, rho, sigma) in enumerate(cfg.target_cylinders()):
        rep = degiorgi.verify_sup_bound(u, center, rho, sigma, scfg.spec, cfg.c_cal)
        k = max(rep.k_choice, 1e-12)
        tr = degiorgi.trace(u, Cylinder(center, 2 * rho, 2 * sigma), k, scfg.spec.d)
        for i in range(len(tr.x_i)):
            rows.append([
                ti, i, tr.rho_i[i], tr.sigma_i[i], tr.k_i[i], tr.x_i[i],
                tr.c_i[i] if i < len(tr.c_i) else math.nan,
            ])
        monotone &= bool(np.all(np.diff(tr.x_i) <= 1e-12 * max(tr.x_i[0], 1.0)))
        summaries.append({
            "target": ti,
            "level": k,
            "lambda_fit": tr.lambda_fit,
            "c_fit": tr.c_fit,
            "threshold": tr.threshold,
            "threshold_ok": tr.threshold_ok,
            "truncated": tr.truncated,
        })
    out = args.out or os.path.join(cfg.out_dir, "trace.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    harness._write_csv(out, ["target", "i", "rho_i", "sigma_i", "k_i", "X_i", "C_i"], rows)
    _print_json(summaries)
    return 0 if monotone else 1


def cmd_check_caccioppoli(args) -> int:
    cfg = _load(args)
    u, scfg = _solve_with_targets(cfg)
    from .grid import coefficient_norms

    a = scfg.spec.coeffs.a.sample(cfg.domain)
    b = scfg.spec.coeffs.b.sample(cfg.domain)
    rows = []
    worst = 0.0
    for ti, (center, rho, sigma) in enumerate(cfg.target_cylinders()):
        inner = Cylinder(center, rho, sigma)
        outer = Cylinder(center, 2 * rho, 2 * sigma)
        norms = coefficient_norms(a, b, cfg.params.alpha, cfg.params.beta, outer)
        rep = degiorgi.verify_sup_bound(u, center, rho, sigma, scfg.spec, cfg.c_cal)
        for k in (0.0, 0.5 * rep.k_choice):
            sides = degiorgi.caccioppoli_sides(
                u, k, inner, outer, norms, scfg.spec.d,
                mu=cfg.params.mu, eps=scfg.spec.eps,
            )
            worst = max(worst, sides.c_min)
            rows.append([ti, k, sides.lhs, *sides.rhs_terms, sides.c_min])
    out = args.out or os.path.join(cfg.out_dir, "caccioppoli.csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    harness._write_csv(
        out,
        ["target", "level", "lhs", "rhs_mu", "rhs_hoelder", "rhs_eps", "rhs_time", "c_min"],
        rows,
    )
    print(f"worst empirical constant: {worst:.6g} (cap {_CACCIOPPOLI_CAP:g})")
    return 0 if worst <= _CACCIOPPOLI_CAP else 1


def cmd_check_energy(args) -> int:
    cfg = _load(args)
    scfg = cfg.solve_config()
    u, _ = solve(scfg)
    e = energy_report(u, scfg)
    record = _energy_dict(e)
    record["pass"] = bool(math.isfinite(e.empirical_constant))
    if not cfg.g.time_dependent:
        record["pass"] = record["pass"] and e.dual_term == 0.0
    _print_json(record)
    return 0 if record["pass"] else 1


def cmd_check_varsol(args) -> int:
    # a single solve is checked against the integrand it actually minimized
    # (its own eps); the unregularized inequality is the sweep's business
    cfg = _load(args)
    scfg = cfg.solve_config()
    u, _ = solve(scfg)
    records = []
    ok = True
    for v in comparison_maps(scfg):
        gaps, scales = variational_gap_curve(u, v, scfg, eps=scfg.spec.eps)
        normalized = gaps / np.maximum(scales, 1e-300)
        passed = bool(np.min(normalized) >= -_VAR_TOL)
        ok &= passed
        records.append({
            "map": v.name,
            "min_gap": float(np.min(gaps)),
            "min_normalized_gap": float(np.min(normalized)),
            "pass": passed,
        })
    _print_json(records)
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    cfg = _load(args)
    report = harness.run_sweep(cfg, workers=args.workers)
    harness.emit_reports(report, cfg.out_dir)
    if report.failure is not None:
        print(
            f"sweep aborted after {len(report.levels)} levels: {report.failure}; "
            f"partial reports in {cfg.out_dir}",
            file=sys.stderr,
        )
        return 2
    ok = report.all_bounds_pass and report.min_normalized_gap >= -_VAR_TOL
    print(
        f"sweep: {len(report.levels)} levels, i_o = {report.i_o}, "
        f"bounds {'pass' if report.all_bounds_pass else 'FAIL'}, "
        f"min normalized gap {report.min_normalized_gap:.3e}; reports in {cfg.out_dir}"
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqlab",
        description="Numerical laboratory for degenerate parabolic p,q-growth problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="print derived exponents as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--alpha", type=float, default=math.inf)
    p.add_argument("--beta", type=float, default=math.inf)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=0.0)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("lemma", help="run built-in lemma verdict cases")
    p.add_argument("case", choices=["mollify", "interp", "geom", "absorb"])
    p.set_defaults(func=cmd_lemma)

    for name, fn, needs_out in (
        ("solve", cmd_solve, True),
        ("verify-bound", cmd_verify_bound, True),
        ("trace-degiorgi", cmd_trace, True),
        ("check-caccioppoli", cmd_check_caccioppoli, True),
        ("check-energy", cmd_check_energy, False),
        ("check-varsol", cmd_check_varsol, False),
        ("sweep", cmd_sweep, True),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        if needs_out:
            p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--calibration", type=float, default=None)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 3
    except (StepFailure, DivergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
