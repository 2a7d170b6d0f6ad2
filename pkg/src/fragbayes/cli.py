"""Command-line front end.

Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines whose
keys are the long option names with ``_`` for ``-``); explicit flags override
it. The resolved settings are written beside the outputs. On failure an
``ERROR`` marker is written where the outputs would have gone and the exit
code is nonzero.
"""

import argparse
import os
import sys
import warnings

import numpy as np

from . import io
from .im_distribution import LogNormalIM, fit_kde, fit_lognormal
from .jeffreys import (AsymptoticConstants, DEFAULT_QUAD, PriorGrid,
                       build_prior_grid, log_jeffreys_array)
from .mcmc import McmcConfig, band_from_chain, curve_band, run_adaptive_mh
from .metrics import MetricConfig, credibility_width, quadratic_error
from .mle import bootstrap_arrays, fit_mle
from .priors import (ImproperPosteriorWarning, flat_prior, jeffreys_prior,
                     log_posterior_unnorm, sk_prior_from_im)
from .probit import FragilityParams
from .reference import mc_fragility
from .replication import METHODS, replication_study
from .synthdata import DEFAULT_IM, DEFAULT_THETA, GeneratorSpec, generate
from .io import fmt


class CliError(RuntimeError):
    pass


def read_config(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise CliError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _optional_float(text):
    return None if str(text).lower() in ("none", "inf", "") else float(text)


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _methods(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _a_grid(a_max, n):
    return np.linspace(0.0, a_max, n + 1)


def _outputs_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# --- subcommands -----------------------------------------------------------

def cmd_prior_grid(args):
    if args.im:
        values = io.read_im(args.im)
        law = fit_kde(values) if args.density == "kde" else fit_lognormal(values)
    else:
        law = LogNormalIM(args.im_mu, args.im_sigma)
    grid = build_prior_grid(law, (args.alpha_min, args.alpha_max),
                            (args.beta_min, args.beta_max), args.n_alpha,
                            args.n_beta, threads=args.threads)
    grid.save(args.out)
    return args.out + ".config"


def _load_prior(args, data):
    if args.prior == "jeffreys":
        if not args.grid:
            raise CliError("the Jeffreys prior needs --grid")
        return jeffreys_prior(PriorGrid.load(args.grid))
    if args.prior == "sk":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ImproperPosteriorWarning)
            spec = sk_prior_from_im(data.im, _optional_float(args.sk_beta_max))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return spec
    return flat_prior()


def cmd_fit(args):
    data = io.read_dataset(args.data)
    prior = _load_prior(args, data)
    cfg = McmcConfig(n_samples=args.n_samples, burn_in=args.burn_in,
                     adaptation_start=args.adaptation_start, seed=args.seed)
    res = fit_mle(data)
    if res.degenerate:
        init = FragilityParams(float(np.median(data.im)), 0.5)
    else:
        init = res.theta_hat
    if prior.beta_max is not None and init.beta >= prior.beta_max:
        init = FragilityParams(init.alpha, 0.5 * prior.beta_max)
    chain = run_adaptive_mh(lambda t: log_posterior_unnorm(prior, data, t),
                            init, cfg)
    out = _outputs_dir(args.out)
    io.write_chain(os.path.join(out, "chain.csv"), chain)
    band = band_from_chain(chain, _a_grid(args.a_max, args.n_sub),
                           1 - args.credibility)
    io.write_band(os.path.join(out, "band.csv"), band)
    with open(os.path.join(out, "diagnostics.txt"), "w") as fh:
        fh.write(f"acceptance_rate = {fmt(chain.acceptance_rate)}\n")
        fh.write(f"adapted_acceptance_rate = "
                 f"{fmt(chain.adapted_acceptance_rate)}\n")
        fh.write(f"alpha_mean = {fmt(chain.alpha.mean())}\n")
        fh.write(f"beta_mean = {fmt(chain.beta.mean())}\n")
        fh.write(f"init_alpha = {fmt(init.alpha)}\ninit_beta = {fmt(init.beta)}\n")
    return os.path.join(out, "config.txt")


def cmd_mle(args):
    data = io.read_dataset(args.data)
    res = fit_mle(data)
    out = _outputs_dir(args.out)
    with open(os.path.join(out, "mle.txt"), "w") as fh:
        fh.write(f"degenerate = {res.degenerate}\n")
        fh.write(f"degeneracy_kind = {res.degeneracy_kind}\n")
        fh.write(f"alpha = {fmt(res.alpha_hat)}\nbeta = {fmt(res.beta_hat)}\n")
        fh.write(f"log_lik = {fmt(res.log_lik_at_opt)}\n")
    if args.L > 0:
        boot = bootstrap_arrays(data, args.L, np.random.default_rng(args.seed))
        io.write_bootstrap(os.path.join(out, "bootstrap.csv"), boot)
        keep = boot.usable()
        if keep.sum() >= 1:
            band = curve_band(boot.alpha[keep], boot.beta[keep],
                              _a_grid(args.a_max, args.n_sub),
                              1 - args.credibility)
            io.write_band(os.path.join(out, "band.csv"), band)
    return os.path.join(out, "config.txt")


def cmd_reference(args):
    curve = mc_fragility(io.read_dataset(args.data), args.n_clusters)
    io.write_mc_curve(args.out, curve)
    if curve.n_merged:
        print(f"note: {curve.n_merged} empty cluster(s) merged", file=sys.stderr)
    return args.out + ".config"


def cmd_metrics(args):
    if args.reference_alpha is not None and args.reference_beta is not None:
        ref = FragilityParams(args.reference_alpha, args.reference_beta)
    elif args.data:
        res = fit_mle(io.read_dataset(args.data))
        if res.degenerate:
            raise CliError("reference MLE is degenerate")
        ref = res.theta_hat
    else:
        raise CliError("need --reference-alpha/--reference-beta or --data")
    cfg = MetricConfig(args.a_max, args.n_sub, args.credibility, ref)
    alpha, beta = io.read_chain(args.chain)
    e = quadratic_error((alpha, beta), cfg)
    s = credibility_width((alpha, beta), cfg)
    io.write_csv(args.out, ["metric", "value"],
                 [["quadratic_error", "credibility_width"], [e, s]])
    print(f"quadratic_error {fmt(e)}\ncredibility_width {fmt(s)}")
    return args.out + ".config"


def cmd_simulate(args):
    spec = GeneratorSpec(LogNormalIM(args.im_mu, args.im_sigma),
                         FragilityParams(args.alpha, args.beta), args.n,
                         args.seed)
    io.write_dataset(args.out, generate(spec), spec.provenance())
    return args.out + ".config"


def cmd_replicate(args):
    data = io.read_dataset(args.data)
    methods = _methods(args.methods)
    grid = PriorGrid.load(args.grid) if args.grid else None
    cfg = MetricConfig(args.a_max, args.n_sub, args.credibility)
    mcmc_cfg = McmcConfig(n_samples=args.L, burn_in=args.burn_in,
                          adaptation_start=args.adaptation_start)
    summary = replication_study(data, _int_list(args.k), args.m, args.L,
                                methods, cfg, args.seed, grid, mcmc_cfg,
                                _optional_float(args.sk_beta_max), args.threads)
    out = _outputs_dir(args.out)
    io.write_summary(os.path.join(out, "summary.csv"), summary)
    return os.path.join(out, "config.txt")


def asymptotics_tables(law, quad=DEFAULT_QUAD):
    """Rows ``(table, alpha, beta, ratio)`` of the three asymptotic checks."""
    c = AsymptoticConstants(law.mu, law.sigma)
    rows = []
    for a in (1.1, 3.0):
        lj = log_jeffreys_array(np.array([a, a]), np.array([1e-3, 5e-4]), law,
                                quad)
        ratio = np.exp(lj[1] - lj[0]) * 5e-4 / 1e-3
        rows.append(("beta_J_small_beta", a, 5e-4, ratio))
    for a in (1.1, 3.0):
        for b in (50.0, 100.0):
            lj = log_jeffreys_array(np.array([a]), np.array([b]), law, quad)[0]
            rows.append(("alpha_beta3_J_over_Eprime", a, b,
                         float(np.exp(lj) * a * b ** 3 / c.e_prime)))
    rows.append(("E_prime", np.nan, np.nan, c.e_prime))
    for sign in (-1, 1):
        la = law.mu + sign * 8.0
        a = float(np.exp(la))
        for b in (0.3, 0.5):
            lj = log_jeffreys_array(np.array([a]), np.array([b]), law, quad)[0]
            tail = (np.log(abs(la)) - la
                    - (la - law.mu) ** 2 / (2 * b * b + 2 * law.sigma ** 2))
            rows.append(("alpha_tail_ratio", a, b,
                         float(np.exp(lj - tail - np.log(c.g_doubleprime(b))))))
    return rows


def cmd_asymptotics_check(args):
    if args.grid:
        law = PriorGrid.load(args.grid).im_lognormal
    else:
        law = LogNormalIM(args.im_mu, args.im_sigma)
    rows = asymptotics_tables(law)
    lines = ["table,alpha,beta,ratio"]
    lines += [f"{t},{fmt(a)},{fmt(b)},{fmt(r)}" for t, a, b, r in rows]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        return args.out + ".config"
    return None


# --- parser ----------------------------------------------------------------

def _common(p, out_required=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(out_required=out_required)


def _curve_opts(p):
    p.add_argument("--a-max", type=float, default=12.0)
    p.add_argument("--n-sub", type=int, default=200)
    p.add_argument("--credibility", type=float, default=0.95)


def _im_opts(p):
    p.add_argument("--im-mu", type=float, default=DEFAULT_IM.mu)
    p.add_argument("--im-sigma", type=float, default=DEFAULT_IM.sigma)


def build_parser():
    parser = argparse.ArgumentParser(prog="fragbayes")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("prior-grid", help="tabulate the Jeffreys prior")
    _common(p)
    _im_opts(p)
    p.add_argument("--im", help="CSV with an 'im' column")
    p.add_argument("--density", choices=["kde", "lognormal"], default="kde")
    p.add_argument("--alpha-min", type=float, default=1e-5)
    p.add_argument("--alpha-max", type=float, default=10.0)
    p.add_argument("--beta-min", type=float, default=1e-3)
    p.add_argument("--beta-max", type=float, default=2.0)
    p.add_argument("--n-alpha", type=int, default=500)
    p.add_argument("--n-beta", type=int, default=500)
    p.set_defaults(func=cmd_prior_grid)

    p = sub.add_parser("fit", help="posterior sampling by adaptive MH")
    _common(p)
    _curve_opts(p)
    p.add_argument("--data", required=True)
    p.add_argument("--prior", choices=["jeffreys", "sk", "flat"],
                   default="jeffreys")
    p.add_argument("--grid")
    p.add_argument("--sk-beta-max", default="2.0",
                   help="SK truncation; 'none' for the improper variant")
    p.add_argument("--n-samples", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--adaptation-start", type=int, default=500)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mle", help="MLE and bootstrap")
    _common(p)
    _curve_opts(p)
    p.add_argument("--data", required=True)
    p.add_argument("--L", type=int, default=5000)
    p.set_defaults(func=cmd_mle)

    p = sub.add_parser("reference", help="K-means Monte-Carlo curve")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--n-clusters", type=int, default=30)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("metrics", help="score a chain or bootstrap CSV")
    _common(p)
    _curve_opts(p)
    p.add_argument("--chain", required=True, help="CSV with alpha,beta columns")
    p.add_argument("--data", help="full dataset; its MLE is the reference")
    p.add_argument("--reference-alpha", type=float)
    p.add_argument("--reference-beta", type=float)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="synthetic dataset")
    _common(p)
    _im_opts(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--alpha", type=float, default=DEFAULT_THETA.alpha)
    p.add_argument("--beta", type=float, default=DEFAULT_THETA.beta)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replicate", help="replication study")
    _common(p)
    _curve_opts(p)
    p.add_argument("--data", required=True)
    p.add_argument("--grid")
    p.add_argument("--k", default="20,50")
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--L", type=int, default=2000)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--sk-beta-max", default="2.0")
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--adaptation-start", type=int, default=500)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("asymptotics-check", help="asymptotic-law ratio tables")
    _common(p, out_required=False)
    _im_opts(p)
    p.add_argument("--grid")
    p.set_defaults(func=cmd_asymptotics_check)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        sub = parser.subcommands[args.command]
        unknown = set(values) - set(vars(args))
        if unknown:
            raise CliError(f"unknown config key(s): {sorted(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    if args.out_required and not args.out:
        parser.subcommands[args.command].error("--out is required")
    return args


def _write_resolved(path, args):
    skip = {"func", "config", "out_required"}
    with open(path, "w") as fh:
        fh.write(f"command = {args.command}\n")
        for key in sorted(vars(args)):
            if key in skip or key == "command":
                continue
            fh.write(f"{key} = {getattr(args, key)}\n")


def _error_marker(args):
    out = getattr(args, "out", None)
    if not out:
        return None
    if os.path.isdir(out) or args.command in ("fit", "mle", "replicate"):
        os.makedirs(out, exist_ok=True)
        return os.path.join(out, "ERROR")
    return out + ".ERROR"


def main(argv=None):
    try:
        args = _parse(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    marker = _error_marker(args)
    try:
        config_path = args.func(args)
        if config_path:
            _write_resolved(config_path, args)
    except Exception as exc:  # surfaced with a marker and nonzero exit
        msg = f"{type(exc).__name__}: {exc}"
        print(f"error: {msg}", file=sys.stderr)
        if marker:
            with open(marker, "w") as fh:
                fh.write(msg + "\n")
        return 1
    if marker and os.path.exists(marker):
        os.remove(marker)
    return 0


if __name__ == "__main__":
    sys.exit(main())
