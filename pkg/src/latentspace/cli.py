"""Command-line interface.

Every command reads an optional JSON config (``--config``); explicit flags
override its keys. Runs live in one directory each::

    <out>/manifest.json   configuration, seeds, acceptance rates, tuned scales
    <out>/chains/         one CSV of retained draws per chain
    <out>/reports/        JSON and CSV outputs of every command

``--out`` defaults to ``$LATENTSPACE_OUTPUT/<name>`` (``runs/<name>`` when
the variable is unset). Exit codes: 0 success, 1 bad configuration or
missing inputs, 2 optimiser stalled at a stationary point, 3 sampler failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import storage
from .clustering import ClusteringError, spectral_cluster
from .diagnostics import posterior_diagnostics
from .evaluation import (
    centrality,
    link_prediction,
    model_comparison,
    posterior_mean_state,
    posterior_predictive_check,
)
from .geometry import GeometrySpec
from .mle import OptimizerConfig, fit_ml
from .network import Network, NetworkError, florentine, load_network
from .rosenbrock import PAIRINGS, run_rosenbrock
from .samplers import SamplerConfig, sample_posterior

log = logging.getLogger("latentspace")

ENV_OUTPUT = "LATENTSPACE_OUTPUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    network: str = "florentine"
    network_format: str = "auto"
    geometry: str = "euclidean"
    dim: int = 2
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    folds: int = 5
    out: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def geometry_spec(self) -> GeometrySpec:
        try:
            return GeometrySpec(self.geometry, int(self.dim))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sampler_config(self) -> SamplerConfig:
        try:
            return SamplerConfig(**{"seed": self.seed, **self.sampler})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sampler settings: {exc}") from exc

    def optimizer_config(self) -> OptimizerConfig:
        try:
            return OptimizerConfig(**{"seed": self.seed, **self.optimizer})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"optimizer settings: {exc}") from exc

    def hyperparameters(self, geometry):
        try:
            return storage.hp_from_dict(self.hyper, geometry)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"hyperparameters: {exc}") from exc

    def load_network(self) -> Network:
        if self.network == "florentine":
            return florentine()
        if not os.path.exists(self.network):
            raise FileNotFoundError(f"network file {self.network!r} not found")
        try:
            return load_network(self.network, fmt=self.network_format)
        except NetworkError as exc:
            raise ConfigError(f"{self.network}: {exc}") from exc


# flag name -> (section, key, type)
_SAMPLER_FLAGS = {"algorithm": str, "iters": int, "burn_in": int, "thin": int, "chains": int,
                  "epsilon": float, "L": int, "tau_z": float, "tau_theta": float, "init": str}
_OPT_FLAGS = {"restarts": int, "max_iters": int, "grad_tolerance": float}
_HYPER_FLAGS = {"sigma_z": float, "mu_alpha": float, "sigma_alpha": float, "mu_beta": float,
                "sigma_beta": float, "rho": float}


def _add_model_flags(p):
    p.add_argument("--network", help="edge list / dense matrix file, or 'florentine'")
    p.add_argument("--format", dest="network_format", choices=["auto", "edgelist", "dense"])
    p.add_argument("--model", help="shorthand such as R2 or S1")
    p.add_argument("--geometry", choices=["euclidean", "spherical"])
    p.add_argument("--dim", type=int, help="latent dimension (ambient dimension for spherical)")
    for k, t in {**_SAMPLER_FLAGS, **_OPT_FLAGS, **_HYPER_FLAGS}.items():
        p.add_argument("--" + k.replace("_", "-"), dest=k, type=t)
    p.add_argument("--folds", type=int)


def _add_common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latentspace", description="Latent space models for binary networks.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "maximum likelihood by Armijo gradient ascent",
        "sample": "posterior sampling (MH, HMC or geodesic HMC)",
        "evaluate": "WAIC, point-estimate log-likelihoods and latent centrality",
        "ppc": "posterior predictive checks",
        "predict": "cross-validated link prediction",
        "cluster": "spectral clustering of the posterior mean positions",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_model_flags(p)
    p = sub.add_parser("rosenbrock", help="sample exp(-R) on the plane or the circle")
    _add_common(p)
    p.add_argument("--space", choices=["plane", "circle"], default="plane")
    p.add_argument("--algorithm", default="MH")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=50000)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--L", type=int, default=10)
    p.add_argument("-a", type=float, default=1.0)
    p.add_argument("-b", type=float, default=5.0)
    return ap


def resolve_config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file {args.config!r} not found")
        try:
            base = storage.load_json(args.config)
        except ValueError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config must be a JSON object")
    cfg = RunConfig.from_dict(base)
    if getattr(args, "model", None):
        try:
            g = GeometrySpec.parse(args.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.geometry, cfg.dim = g.kind, g.dim
    for k in ("network", "network_format", "geometry", "dim", "seed", "folds", "out"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    for section, flags in (("sampler", _SAMPLER_FLAGS), ("optimizer", _OPT_FLAGS), ("hyper", _HYPER_FLAGS)):
        d = dict(getattr(cfg, section))
        for k in flags:
            v = getattr(args, k, None)
            if v is not None:
                d[k] = v
        setattr(cfg, section, d)
    if "algorithm" in cfg.sampler:
        cfg.sampler["algorithm"] = cfg.sampler["algorithm"].upper()
    if cfg.sampler.get("algorithm") == "GHMC" and not cfg.geometry_spec().spherical:
        raise ConfigError("GHMC needs a spherical latent space")
    cfg.geometry_spec()
    return cfg


def output_dir(cfg: RunConfig, default_name: str) -> str:
    if cfg.out:
        return cfg.out
    return os.path.join(os.environ.get(ENV_OUTPUT, "runs"), default_name)


def _manifest(command, cfg: RunConfig, extra=None) -> dict:
    cfg_d = cfg.to_dict()
    cfg_d.pop("out")
    out = {"command": command, "config": cfg_d}
    out.update(extra or {})
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg: RunConfig) -> int:
    g = cfg.geometry_spec()
    net = cfg.load_network()
    ml = fit_ml(net, g, cfg.optimizer_config(), hp=cfg.hyperparameters(g))
    p = storage.ensure_run_dir(output_dir(cfg, g.name))
    storage.dump_json(storage.ml_to_dict(ml), os.path.join(p["reports"], "ml_state.json"))
    storage.write_trace(ml.trace, os.path.join(p["reports"], "ml_trace.csv"))
    storage.dump_json(_manifest("fit", cfg, {"ml_loglik": ml.loglik}), p["manifest"])
    print(f"{g.name}: ML log-likelihood {ml.loglik:.4f} "
          f"({'converged' if ml.converged else 'iteration limit'}{', stalled' if ml.stalled else ''})")
    return 2 if ml.stalled else 0


def cmd_sample(cfg: RunConfig) -> int:
    g = cfg.geometry_spec()
    net = cfg.load_network()
    scfg = cfg.sampler_config()
    hp = cfg.hyperparameters(g)
    ocfg = cfg.optimizer_config()
    try:
        ml = fit_ml(net, g, ocfg, hp=hp)
        ps = sample_posterior(net, g, hp, scfg, ml=ml)
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        log.error("sampler failed: %s", exc)
        return 3
    p = storage.ensure_run_dir(output_dir(cfg, g.name))
    chains = []
    for k, c in enumerate(ps.chains):
        rel = os.path.join("chains", f"chain_{k}.csv")
        storage.write_chain(c, scfg, os.path.join(p["root"], rel))
        chains.append({"file": rel, "seed": c.seed, "acceptance": c.acceptance, "tuned": c.tuned})
    cfg.sampler = {f.name: getattr(scfg, f.name) for f in fields(SamplerConfig)}
    report = posterior_diagnostics(ps)
    report.write_json(os.path.join(p["reports"], "diagnostics.json"))
    report.write_csv(os.path.join(p["reports"], "diagnostics.csv"))
    storage.dump_json(storage.ml_to_dict(ml), os.path.join(p["reports"], "ml_state.json"))
    storage.dump_json(_manifest("sample", cfg, {"chains": chains}), p["manifest"])
    print(f"max R-hat: {report.max_rhat:.4f}")
    print(f"min relative ESS: {report.min_rel_ess:.4f}")
    return 0


def _load_run(cfg: RunConfig):
    root = output_dir(cfg, cfg.geometry_spec().name)
    man_path = storage.run_paths(root)["manifest"]
    if not os.path.exists(man_path):
        raise FileNotFoundError(f"no sampled run in {root}")
    man = storage.load_json(man_path)
    if man.get("command") != "sample":
        raise FileNotFoundError(f"{root} holds no chains (run 'sample' first)")
    run_cfg = RunConfig.from_dict({**man["config"], "out": root})
    net = run_cfg.load_network()
    return run_cfg, net, storage.load_samples(root, net), storage.run_paths(root)


def cmd_evaluate(cfg: RunConfig) -> int:
    run_cfg, net, ps, p = _load_run(cfg)
    row = model_comparison(ps, net)
    cen = centrality(ps, net)
    storage.dump_json(row, os.path.join(p["reports"], "evaluation.json"))
    storage.dump_json(cen.to_dict(), os.path.join(p["reports"], "centrality.json"))
    cen.write_csv(os.path.join(p["reports"], "centrality.csv"))
    print("model\tWAIC\tmean\tML\tMAP\tCM")
    print(f"{row['geometry']}\t{row['waic']:.3f}\t{row['mean_loglik']:.3f}\t{row['ml_loglik']:.3f}"
          f"\t{row['map_loglik']:.3f}\t{row['cm_loglik']:.3f}")
    return 0


def cmd_ppc(cfg: RunConfig) -> int:
    run_cfg, net, ps, p = _load_run(cfg)
    res = posterior_predictive_check(ps, net, seed=run_cfg.seed)
    hist_dir = os.path.join(p["reports"], "ppc")
    os.makedirs(hist_dir, exist_ok=True)
    for name, r in res.items():
        counts, edges = r.histogram() if r.simulated.size else (np.zeros(0, int), np.zeros(1))
        with open(os.path.join(hist_dir, f"{name}.csv"), "w") as fh:
            fh.write("bin_left,bin_right,count\n")
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                fh.write(f"{lo!r},{hi!r},{int(c)}\n")
    summary = {k: r.summary() for k, r in res.items()}
    storage.dump_json(summary, os.path.join(p["reports"], "ppc.json"))
    for k, s in summary.items():
        print(f"{k}\tobserved {s['observed']:.4g}\tppp {s['ppp']:.3f}")
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    run_cfg, net, ps, p = _load_run(cfg)
    g = run_cfg.geometry_spec()
    # flags given on this command line override the sampler settings of the run
    scfg = SamplerConfig(**{**run_cfg.sampler, **cfg.sampler, "seed": run_cfg.seed})
    folds = cfg.folds if cfg.folds != RunConfig.folds else run_cfg.folds
    res = link_prediction(net, g, run_cfg.hyperparameters(g), scfg, k=folds, seed=run_cfg.seed,
                          ml_cfg=OptimizerConfig(**{**run_cfg.optimizer, "seed": run_cfg.seed}))
    storage.dump_json(res.to_dict(), os.path.join(p["reports"], "prediction.json"))
    res.write_roc(os.path.join(p["reports"], "roc.csv"))
    print(f"{g.name}: AUC {res.auc:.4f}  accuracy {res.accuracy:.4f}  F1 {res.f1:.4f}")
    return 0


def cmd_cluster(cfg: RunConfig) -> int:
    run_cfg, net, ps, p = _load_run(cfg)
    g = run_cfg.geometry_spec()
    try:
        res = spectral_cluster(posterior_mean_state(ps).Z, g.spherical, net, seed=run_cfg.seed)
    except ClusteringError as exc:
        raise ConfigError(str(exc)) from exc
    res.write_csv(os.path.join(p["reports"], "clusters.csv"))
    res.write_json(os.path.join(p["reports"], "clusters.json"))
    print(f"{g.name}: K={res.K}  modularity {res.modularity:.4f}  silhouette {res.silhouette:.4f}")
    return 0


def cmd_rosenbrock(args) -> int:
    alg = args.algorithm.upper()
    if (args.space, alg) not in PAIRINGS:
        raise ConfigError(f"{alg} cannot run on the {args.space}")
    seed = args.seed if args.seed is not None else 0
    try:
        res = run_rosenbrock(args.space, alg, args.samples, args.burn_in, args.thin, args.chains, args.step,
                             args.L, seed, args.a, args.b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    root = args.out or os.path.join(os.environ.get(ENV_OUTPUT, "runs"), f"rosenbrock-{args.space}-{alg}")
    p = storage.ensure_run_dir(root)
    files = []
    for c in range(res.samples.shape[0]):
        rel = os.path.join("chains", f"chain_{c}.csv")
        with open(os.path.join(root, rel), "w") as fh:
            fh.write("iteration,x1,x2\n")
            for s, (x1, x2) in enumerate(res.samples[c]):
                fh.write(f"{args.burn_in + (s + 1) * args.thin},{float(x1)!r},{float(x2)!r}\n")
        files.append(rel)
    res.report.write_json(os.path.join(p["reports"], "diagnostics.json"))
    res.report.write_csv(os.path.join(p["reports"], "diagnostics.csv"))
    summary = res.summary()
    storage.dump_json(summary, os.path.join(p["reports"], "rosenbrock.json"))
    settings = {k: getattr(args, k) for k in ("space", "samples", "burn_in", "thin", "chains", "step", "L", "a", "b")}
    storage.dump_json({"command": "rosenbrock", "config": {**settings, "algorithm": alg, "seed": seed},
                       "chains": files}, p["manifest"])
    print(f"{args.space}/{alg}: mean R {summary['mean_R']:.4f}  acceptance {summary['accept_rate']:.3f}  "
          f"max R-hat {summary['max_rhat']:.4f}  min relative ESS {summary['min_rel_ess']:.4f}")
    return 0


COMMANDS = {"fit": cmd_fit, "sample": cmd_sample, "evaluate": cmd_evaluate, "ppc": cmd_ppc,
            "predict": cmd_predict, "cluster": cmd_cluster}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rosenbrock":
            return cmd_rosenbrock(args)
        return COMMANDS[args.command](resolve_config(args))
    except (ConfigError, FileNotFoundError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
