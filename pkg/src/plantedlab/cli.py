"""Configuration-driven experiment runner.

Subcommands: ldlr-sweep, pseudocal-check, duality-lab, robust-check,
moments-check, sample.  Every run is a pure function of (config,
master_seed): per-cell RNG streams are derived from the master seed, outputs
are written atomically, and each CSV row carries the config hash.

Config files are flat ``key = value`` lines (# comments allowed); values are
parsed as JSON when possible, so lists use JSON syntax.  CLI ``--set
key=value`` flags override file keys.  Exit codes: 0 success, 1 malformed
config, 2 guard violation, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import duality as du
from . import ldlr, moments, pseudocal, robust
from .errors import ConvergenceError, GuardExceeded, IntractableModel
from .models import (PlantedModel, instance_to_text, sample_planted,
                     sample_uniform)
from .rng import derive_stream
from .util import atomic_write_text, config_hash

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GUARD = 2
EXIT_SOLVER = 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        try:
            out[key] = json.loads(val)
        except ValueError:
            out[key] = val
    return out


def load_config(path: str | None, overrides: list[str], seed: int | None) -> dict:
    cfg: dict = {}
    if path:
        try:
            with open(path) as fh:
                cfg.update(parse_config_text(fh.read()))
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            cfg[key.strip()] = json.loads(val.strip())
        except ValueError:
            cfg[key.strip()] = val.strip()
    if seed is not None:
        cfg["master_seed"] = seed
    if "master_seed" not in cfg:
        raise ConfigError("master_seed is mandatory (no wall-clock seeding)")
    cfg["master_seed"] = int(cfg["master_seed"])
    return cfg


def _get(cfg: dict, key: str, default=None, required: bool = False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing config key {key!r}")
    return default


def build_model(cfg: dict, n: int | None = None, lam: float | None = None) -> PlantedModel:
    problem = _get(cfg, "problem", required=True)
    n = int(n if n is not None else _get(cfg, "n", required=True))
    if problem == "tpca":
        lam = float(lam if lam is not None else _get(cfg, "lam", required=True))
        return PlantedModel.tpca(n=n, k=int(_get(cfg, "k", 3)), lam=lam,
                                 eps_noise=float(_get(cfg, "eps_noise", 0.0)),
                                 gaussian=bool(_get(cfg, "gaussian", False)))
    if problem == "spca":
        lam = float(lam if lam is not None else _get(cfg, "lam", required=True))
        return PlantedModel.spca(n=n, k=int(_get(cfg, "k", required=True)),
                                 lam=lam, gamma=float(_get(cfg, "gamma", 0.0)),
                                 gaussian=bool(_get(cfg, "gaussian", False)))
    if problem == "clique":
        return PlantedModel.clique(n, int(_get(cfg, "clique_size", required=True)))
    if problem == "csp":
        return PlantedModel.csp(n, k=int(_get(cfg, "k", 3)),
                                alpha=float(_get(cfg, "alpha", 4.0)),
                                delta=float(_get(cfg, "delta", 0.1)))
    if problem == "sbm":
        return PlantedModel.sbm(n, a=float(_get(cfg, "a", required=True)),
                                b=float(_get(cfg, "b", required=True)))
    if problem == "dks":
        return PlantedModel.dks(n, k=int(_get(cfg, "k", required=True)),
                                p=float(_get(cfg, "p", required=True)),
                                q=float(_get(cfg, "q", required=True)))
    raise ConfigError(f"unknown problem {problem!r}")


def _pool_map(fn, cells, threads: int):
    if threads <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, cells))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ldlr_sweep(cfg: dict, out: str, threads: int) -> int:
    chash = config_hash(cfg)
    n_grid = [int(x) for x in np.atleast_1d(_get(cfg, "n_grid", [_get(cfg, "n")]))]
    lam_grid = _get(cfg, "lam_grid")
    lam_exp = _get(cfg, "lam_exponent")
    d = int(_get(cfg, "d", 4))
    method = _get(cfg, "method", "analytic")
    t_cap = int(_get(cfg, "t_cap", 5))
    trials = _get(cfg, "trials")
    cells = []
    for n in n_grid:
        lams = [float(x) for x in lam_grid] if lam_grid is not None \
            else [float(n) ** float(lam_exp)]
        for lam in lams:
            cells.append((len(cells), n, lam))

    def run_cell(cell):
        idx, n, lam = cell
        model = build_model(cfg, n=n, lam=lam)
        rng = derive_stream(cfg["master_seed"], idx)
        rep = ldlr.ldlr_advantage(model, d, method=method,
                                  trials=int(trials) if trials else None,
                                  rng=rng if method == "mc" else None,
                                  t_cap=t_cap)
        return cell, rep

    results = _pool_map(run_cell, cells, threads)
    lines = ["problem,n,k,lambda,d,norm_sq,method,t,contribution,config_hash"]
    for (idx, n, lam), rep in results:
        k = rep.model.get("k", 0)
        for t in sorted(rep.per_t):
            lines.append(f"{rep.model['problem']},{n},{k},{lam!r},{d},"
                         f"{rep.norm_sq!r},{rep.method},{t},{rep.per_t[t]!r},{chash}")
    atomic_write_text(out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_pseudocal_check(cfg: dict, out: str, threads: int) -> int:
    chash = config_hash(cfg)
    d = int(_get(cfg, "d", 1))
    D = int(_get(cfg, "D", 4))
    samples = int(_get(cfg, "samples", 50))
    psd_tol = float(_get(cfg, "psd_tol", 1e-8))
    model = build_model(cfg)

    def run_cell(t):
        rng = derive_stream(cfg["master_seed"], t)
        inst = sample_uniform(model, rng)
        rep = pseudocal.check_report(model, inst, d, D, psd_tol)
        rep["sample"] = t
        return rep

    reports = _pool_map(run_cell, range(samples), threads)
    payload = {"config_hash": chash, "model": model.describe(), "d": d, "D": D,
               "psd_tol": psd_tol, "reports": reports}
    atomic_write_text(out, json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_duality_lab(cfg: dict, out: str, threads: int) -> int:
    chash = config_hash(cfg)
    model = build_model(cfg)
    if model.problem != "clique":
        raise ConfigError("the duality laboratory ships with the clique model")
    scheme = robust.SubsampleScheme(_get(cfg, "scheme", "vertex-bernoulli"),
                                    float(_get(cfg, "rho", 0.5)))
    theta = robust.enumerate_theta(model, scheme)
    d = int(_get(cfg, "d", 1))
    D = int(_get(cfg, "D", 2))
    draws = int(_get(cfg, "restriction_draws", 100))
    rng = derive_stream(cfg["master_seed"], 0)
    rep, fam, trace = du.run_duality_lab(model, theta, du.max_clique_witness,
                                         d, D, rng=rng)
    verdict = du.verify_duality(rep.primal_opt, rep,
                                float(_get(cfg, "ratio_floor", 0.5)))
    rho = robust.rho_survival_exact(D, theta, fam.space.N)
    slacks = []
    for t in range(draws):
        r = derive_stream(cfg["master_seed"], 1000 + t)
        R = r.standard_normal(fam.total.shape)
        R = 0.5 * (R + np.transpose(R, (0, 2, 1)))
        res = du.random_restriction_check(fam.parts, R, D, rho)
        slacks.append(res["slack"])
    payload = {"config_hash": chash, "model": model.describe(),
               "report": json.loads(rep.to_json()), "verdict": verdict,
               "restriction": {"draws": draws, "min_slack": min(slacks),
                               "rho": rho}}
    atomic_write_text(out, json.dumps(payload, indent=2))
    trace_lines = ["iteration,primal_residual,psd_residual"]
    for i, m, p in trace.rows():
        trace_lines.append(f"{i},{m!r},{p!r}")
    atomic_write_text(out + ".trace.csv", "\n".join(trace_lines) + "\n")
    return EXIT_OK


def cmd_robust_check(cfg: dict, out: str, threads: int) -> int:
    chash = config_hash(cfg)
    model = build_model(cfg)
    scheme = robust.SubsampleScheme(_get(cfg, "scheme", required=True),
                                    float(_get(cfg, "rho", required=True)))
    threshold = float(_get(cfg, "threshold", required=True))
    trials = int(_get(cfg, "trials", 1000))
    rep = robust.estimate_epsilon(model, scheme, threshold, trials,
                                  cfg["master_seed"])
    payload = rep.to_dict()
    payload["config_hash"] = chash
    atomic_write_text(out, json.dumps(payload, indent=2))
    csv_lines = ["problem,n,rho,threshold,trials,failures,eps_hat,ci_lo,ci_hi,config_hash",
                 f"{model.problem},{model.n},{scheme.rho!r},{threshold!r},"
                 f"{trials},{rep.failures},{rep.eps_hat!r},{rep.ci_lo!r},"
                 f"{rep.ci_hi!r},{chash}"]
    atomic_write_text(out + ".csv", "\n".join(csv_lines) + "\n")
    return EXIT_OK


def cmd_moments_check(cfg: dict, out: str, threads: int) -> int:
    chash = config_hash(cfg)
    kind = _get(cfg, "kind", required=True)
    d = int(_get(cfg, "d", 1))
    n_grid = [int(x) for x in _get(cfg, "n_grid", required=True)]
    k_rule = None
    k_mode = _get(cfg, "k_rule", "half")
    if kind.endswith("slice"):
        k_rule = (lambda n: n // 2) if k_mode == "half" else (lambda n: int(k_mode))
    fit = moments.spectral_richness_fit(kind, d, n_grid, k_rule)
    lines = ["kind,n,k,d,lambda_min_nonzero,kernel_dim,config_hash"]
    for n, lam, kd in zip(fit.n_grid, fit.lambda_mins, fit.kernel_dims):
        k = k_rule(n) if k_rule else 0
        lines.append(f"{kind},{n},{k},{d},{lam!r},{kd},{chash}")
    atomic_write_text(out, "\n".join(lines) + "\n")
    atomic_write_text(out + ".fit.json", json.dumps(
        {"config_hash": chash, "kind": kind, "d": d,
         "exponent": fit.exponent, "r_squared": fit.r_squared,
         "lambda_mins": list(fit.lambda_mins)}, indent=2))
    return EXIT_OK


def cmd_sample(cfg: dict, out: str, threads: int) -> int:
    model = build_model(cfg)
    count = int(_get(cfg, "count", 1))
    planted = bool(_get(cfg, "planted", False))
    blocks = []
    for t in range(count):
        rng = derive_stream(cfg["master_seed"], t)
        inst = sample_planted(model, rng)[0] if planted \
            else sample_uniform(model, rng)
        blocks.append(instance_to_text(model, inst))
    atomic_write_text(out, "".join(blocks))
    return EXIT_OK


_COMMANDS = {
    "ldlr-sweep": cmd_ldlr_sweep,
    "pseudocal-check": cmd_pseudocal_check,
    "duality-lab": cmd_duality_lab,
    "robust-check": cmd_robust_check,
    "moments-check": cmd_moments_check,
    "sample": cmd_sample,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="plantedlab", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides file)")
    parser.add_argument("--out", required=True, help="output path")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a config key")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, args.seed)
        return _COMMANDS[args.command](cfg, args.out, max(1, args.threads))
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (GuardExceeded, IntractableModel) as e:
        print(f"guard violation: {e}", file=sys.stderr)
        return EXIT_GUARD
    except ConvergenceError as e:
        print(f"solver failure: {e} {e.residuals}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
