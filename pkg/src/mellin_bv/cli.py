"""``mellin-bv``: kernel checks, variation estimates and experiment drivers.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 on configuration errors.
"""

from __future__ import annotations

import functools
import math
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import RunConfig, output_dir
from .errors import ConfigError, MellinBVError, SuspectedDivergence
from .phi import parse_phi
from .reports import write_csv, write_json, write_plot_data

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _phi_table(text):
    try:
        phi = parse_phi(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {"kind": phi.kind} if phi.kind == "classical" else {"kind": phi.kind, "p": phi.p}


def _ladder(text):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --w-ladder {text!r}") from exc


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help="TOML run configuration."),
        click.option("--N", "N", type=int, help="Dimension (1..3)."),
        click.option("--kernel", help="Kernel family name."),
        click.option("--function", help="Builtin test function name."),
        click.option("--phi", "phi", help='"power:<p>" or "classical".'),
        click.option("--alpha", type=float, help="Rate / singularity order."),
        click.option("--lambda", "lam", type=float, help="Scaling constant."),
        click.option("--w-ladder", "w_ladder", help="Comma-separated increasing w values."),
        click.option("--out", help="Output directory."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _resolve(command, config_path, N, kernel, function, phi, alpha, lam, w_ladder, out,
             extra=None) -> RunConfig:
    overrides = {"command": command, "N": N, "kernel": kernel, "function": function,
                 "alpha": alpha, "lambda": lam, "out": out}
    if phi is not None:
        overrides["phi"] = _phi_table(phi)
    if w_ladder is not None:
        overrides["op"] = {"w_ladder": _ladder(w_ladder)}
    overrides.update(extra or {})
    return RunConfig.load(config_path, overrides)


def handled(fn):
    """Map configuration errors to exit code 2 and return the command's exit code."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            code = fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            code = EXIT_CONFIG
        except MellinBVError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            code = EXIT_FAIL
        sys.exit(code or EXIT_OK)
    return wrapper


def _emit(cfg: RunConfig, name: str, report, rows=None, plot=None):
    out = output_dir(cfg)
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    write_json(out / f"{name}.json", payload, cfg.to_dict(), __version__)
    if rows is not None:
        write_csv(out / f"{name}.csv", rows)
    if plot is not None:
        x, y, header, labels = plot
        write_plot_data(out / f"{name}.dat", x, y, header, labels)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


@click.group()
@click.version_option(__version__, prog_name="mellin-bv")
def main():
    """Mellin convolution operators and multidimensional phi-variation."""


@main.command("kernel-check")
@common_options
@handled
def kernel_check(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out):
    """Approximate-identity axioms, moments and alpha-singularity of a kernel."""
    from .experiments import default_w_ladder
    from .kernels import (absolute_moment, check_alpha_singularity, check_axioms,
                          check_near_moment_condition)

    cfg = _resolve("kernel-check", config_path, N, kernel, function or "", phi, alpha, lam,
                   w_ladder, out)
    fam = cfg.kernel
    ws = cfg.w_ladder or default_w_ladder(1)
    nodes = int(cfg["quad"]["nodes_per_axis"])
    a = float(cfg["alpha"])
    axioms = check_axioms(fam, ws, nodes_per_axis=nodes)
    click.echo(f"K_w.1 normalization  {_status(axioms.k1_pass)}  "
               f"max defect {max(axioms.normalization_defects.values()):.3e}")
    click.echo(f"K_w.2 far mass       {_status(axioms.k2_pass)}  A = {axioms.bound_A:.6g}")
    report = {"axioms": axioms.to_dict()}
    ok = axioms.k1_pass and axioms.k2_pass
    if fam.log_profile_fn is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SuspectedDivergence)
            m = absolute_moment(fam, a)
        diverges = any(issubclass(w.category, SuspectedDivergence) for w in caught)
        click.echo(f"m(K, {a:g})            {_status(not diverges)}  {m:.10g}")
        report["moment"] = {"alpha": a, "value": m, "suspected_divergence": diverges}
        ok &= not diverges
    sing = check_alpha_singularity(fam, a, ws, nodes_per_axis=nodes)
    near = check_near_moment_condition(fam, a, ws, nodes_per_axis=nodes)
    for d, r in sing.items():
        click.echo(f"singularity d={d:<5g}  {_status(r.passed)}  slope {r.slope:.4g}")
    click.echo(f"near condition       {_status(near.passed)}  slope {near.slope:.4g}")
    ok &= all(r.passed for r in sing.values()) and near.passed
    report["singularity"] = {repr(d): r.to_dict() for d, r in sing.items()}
    report["near"] = near.to_dict()
    report["pass"] = ok
    _emit(cfg, "kernel_check", report)
    return EXIT_OK if ok else EXIT_FAIL


@main.command()
@common_options
@click.option("--box", "box_m", type=float, default=None,
              help="Report V on [e^-M, e^M]^N instead of the global ladder.")
@handled
def variation(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out, box_m):
    """Global (or box) phi-variation of lambda * f."""
    from .variation import Box, var_box, var_global

    cfg = _resolve("variation", config_path, N, kernel, function, phi, alpha, lam, w_ladder, out)
    f = cfg.function.scaled(float(cfg["lambda"]))
    opts = cfg.var_options()
    if box_m is None:
        est = var_global(f, cfg.phi, **opts)
    else:
        opts.pop("box_ladder")
        est = var_box(f, cfg.phi, Box.symmetric(cfg.N, box_m), **opts)
    click.echo(f"{est.lower_bound:.12g}")
    click.echo(f"converged={est.converged} depth={est.refinement_depth} "
               f"history={[float(h) for h in est.history]}", err=True)
    if est.breakdown is not None:
        click.echo(f"section functionals={list(est.breakdown)}", err=True)
    _emit(cfg, "variation", {"value": est.lower_bound, "converged": est.converged,
                             "history": list(est.history), "breakdown": est.breakdown})
    return EXIT_OK


@main.command()
@common_options
@handled
def modulus(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out):
    """phi-modulus of smoothness omega(lambda f, delta) on the configured deltas."""
    from .variation import modulus as omega

    cfg = _resolve("modulus", config_path, N, kernel, function, phi, alpha, lam, w_ladder, out)
    f = cfg.function.scaled(float(cfg["lambda"]))
    opts = cfg.var_options()
    deltas = [float(d) for d in cfg["delta"]]
    values = [omega(f, cfg.phi, d, **opts) for d in deltas]
    for d, v in zip(deltas, values):
        click.echo(f"{d:<8g} {v:.12g}")
    _emit(cfg, "modulus", {"delta": deltas, "omega": values},
          plot=(deltas, values, f"omega(lambda f, delta) for {f.name}", ("delta", "omega")))
    return EXIT_OK


@main.command()
@common_options
@click.option("--w", "w", type=float, default=8.0, show_default=True, help="Operator index.")
@click.option("--s", "s_points", multiple=True, help="Evaluation point, comma-separated.")
@handled
def apply(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out, w, s_points):
    """Evaluate T_w f at points (default: the log-uniform grid, N = 1)."""
    from .mellin_op import OperatorEvaluation, apply_many, default_s_grid, default_quadrature

    cfg = _resolve("apply", config_path, N, kernel, function, phi, alpha, lam, w_ladder, out)
    quad = default_quadrature(cfg.kernel, w, int(cfg["op"]["nodes_per_axis"]))
    op = OperatorEvaluation(w, cfg.kernel, cfg.function, quad)
    if s_points:
        S = np.array([[float(v) for v in p.split(",")] for p in s_points])
        if S.shape[1] != cfg.N:
            raise ConfigError(f"points must have {cfg.N} coordinates")
    elif cfg.N == 1:
        g = cfg["op"]["s_grid"]
        S = default_s_grid(1, int(g["n"]), float(g["span"]))[0][:, None]
    else:
        S = np.ones((1, cfg.N))
    vals = apply_many(op, S)
    for p, v in zip(S, vals):
        click.echo(f"{','.join(repr(float(c)) for c in p)} {float(v)!r}")
    plot = None
    if cfg.N == 1:
        plot = (S[:, 0], vals, f"T_w f, w = {w:g}, kernel {cfg.kernel.name}, f {cfg.function.name}",
                ("s", "T_w_f"))
    _emit(cfg, "apply", {"w": w, "points": S, "values": vals}, plot=plot)
    return EXIT_OK


@main.command()
@common_options
@handled
def convergence(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out):
    """Search for mu with V[mu (T_w f - f)] decaying along the w ladder."""
    from .experiments import ConvergenceRun, run_convergence

    cfg = _resolve("convergence", config_path, N, kernel, function, phi, alpha, lam, w_ladder, out)
    th = cfg["thresholds"]
    run = ConvergenceRun(cfg.function, cfg.kernel, cfg.phi, cfg.w_ladder, cfg.lambda_grid,
                         cfg.var_options(), float(th["ratio"]), float(th["floor"]))
    rep = run_convergence(run)
    mu = rep.summary["witness_mu"]
    click.echo(f"mode: {run.mode}")
    click.echo(f"verdict: {rep.verdict}  witness mu = {mu}")
    plot = None
    if mu is not None:
        plot = (run.w_ladder, rep.summary["E_witness"],
                f"E(mu, w), mu = {mu!r}, {cfg.function.name} / {cfg.kernel.name}", ("w", "E"))
    _emit(cfg, "convergence", rep, rows=rep.rows, plot=plot)
    if run.mode == "counterexample mode":  # persistence is the expected outcome
        return EXIT_OK if not rep.passed else EXIT_FAIL
    return EXIT_OK if rep.passed else EXIT_FAIL


@main.command()
@common_options
@handled
def rate(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out):
    """Certify the kernel for alpha, then fit the decay slope of the error."""
    from .experiments import certify_kernel, default_w_ladder, error_table, run_rate

    cfg = _resolve("rate", config_path, N, kernel, function, phi, alpha, lam, w_ladder, out)
    a = float(cfg["alpha"])
    ws = cfg.w_ladder or default_w_ladder(cfg.N)
    cert = certify_kernel(cfg.kernel, a, ws)
    click.echo(f"kernel certification: {_status(cert.passed)}")
    rep = run_rate(cfg.function, cfg.kernel, cfg.phi, a, cert, ws, cfg.lambda_grid,
                   cfg.var_options())
    click.echo(f"slope {rep.slope:.6g}  r^2 {rep.r_squared:.6g}  lambda {rep.lam!r}  "
               f"target <= {-a + 0.25:g}  {_status(rep.passed)}")
    rows = [{"lambda": rep.lam, "w": w, "error": e, "lower_or_upper_flag": "lower"}
            for w, e in zip(rep.w, rep.values)]
    _emit(cfg, "rate", {"rate": rep.to_dict(), "certificate": cert.to_dict()}, rows=rows,
          plot=(rep.w, rep.values, f"E(lambda, w), lambda = {rep.lam!r}", ("w", "E")))
    return EXIT_OK if rep.passed else EXIT_FAIL


@main.command("rate-generalized")
@common_options
@click.option("--tau-power", type=float, default=None, help="tau(t) = |log t|^p.")
@click.option("--xi-power", type=float, default=None, help="xi(w) = w^-q (0: xi = 1).")
@handled
def rate_generalized(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out,
                     tau_power, xi_power):
    """E(lambda, w) = O(xi(w)) under a (tau, xi) singularity certificate."""
    from .experiments import (GeneralizedRateSpec, certify_generalized, default_w_ladder,
                              log_power_tau, run_rate_generalized)

    extra = {"generalized": {k: v for k, v in (("tau_power", tau_power), ("xi_power", xi_power))
                             if v is not None}}
    cfg = _resolve("rate-generalized", config_path, N, kernel, function, phi, alpha, lam,
                   w_ladder, out, extra)
    tp, xp = float(cfg["generalized"]["tau_power"]), float(cfg["generalized"]["xi_power"])
    if not tp > 0 or xp < 0:
        raise ConfigError("tau_power must be positive and xi_power nonnegative")
    spec = GeneralizedRateSpec(log_power_tau(tp), lambda w: float(w) ** -xp,
                               f"tau=|log t|^{tp:g}, xi=w^-{xp:g}")
    ws = cfg.w_ladder or default_w_ladder(cfg.N)
    cert = certify_generalized(cfg.kernel, spec, ws)
    click.echo(f"(tau, xi) certification: {_status(cert.passed)}")
    rep = run_rate_generalized(cfg.function, cfg.kernel, spec, cfg.phi, cert, ws,
                               cfg.lambda_grid, cfg.var_options())
    click.echo(f"{rep.note}  {_status(rep.passed)}")
    rows = [{"lambda": rep.lam, "w": w, "error": e, "lower_or_upper_flag": "lower"}
            for w, e in zip(rep.w, rep.values)]
    _emit(cfg, "rate_generalized", {"rate": rep.to_dict(), "certificate": cert.to_dict()},
          rows=rows)
    return EXIT_OK if rep.passed else EXIT_FAIL


@main.command()
@common_options
@handled
def counterexample(config_path, N, kernel, function, phi, alpha, lam, w_ladder, out):
    """Unit step under Gauss-Weierstrass: the phi-variation error does not vanish."""
    from .experiments import run_counterexample

    cfg = _resolve("counterexample", config_path, N, kernel, function or "", phi, alpha, lam,
                   w_ladder, out)
    if cfg.N != 1:
        raise ConfigError("the counterexample is one-dimensional")
    rep = run_counterexample([float(m) for m in cfg["mu"]], cfg.phi, cfg.w_ladder,
                             cfg.var_options(), float(cfg["thresholds"]["factor"]))
    click.echo(f"{'mu':>6} {'phi(mu/2)':>12} {'min lower bound':>16} {'(0,1) estimate':>16}")
    for mu, c in rep.summary["checks"].items():
        click.echo(f"{float(mu):>6g} {c['phi(mu/2)']:>12.6g} {c['min_lower_bound']:>16.10g} "
                   f"{c['unit_interval_estimate']:>16.10g}")
    click.echo(f"verdict: {rep.verdict}")
    mus = [float(m) for m in rep.summary["checks"]]
    lims = [c["unit_interval_estimate"] for c in rep.summary["checks"].values()]
    _emit(cfg, "counterexample", rep, rows=rep.rows,
          plot=(mus, lims, "V on (0,1) of mu (T_w f - f) at the largest w", ("mu", "V")))
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    main()
