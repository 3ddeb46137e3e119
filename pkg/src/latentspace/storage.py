"""Run directories: manifest.json, chains/ (one CSV per chain) and reports/.

Floats are written with ``repr`` so that a stored run reloads bit for bit
and repeated runs with the same seed produce identical files.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict

import numpy as np

from .geometry import GeometrySpec
from .mle import MLFit
from .model import HyperParameters, LatentSpaceModel, ParameterState
from .network import Network
from .samplers import ChainOutput, PosteriorSamples, SamplerConfig


def run_paths(root) -> dict:
    return {"root": root, "manifest": os.path.join(root, "manifest.json"),
            "chains": os.path.join(root, "chains"), "reports": os.path.join(root, "reports")}


def ensure_run_dir(root) -> dict:
    p = run_paths(root)
    os.makedirs(p["chains"], exist_ok=True)
    os.makedirs(p["reports"], exist_ok=True)
    return p


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _fmt(v) -> str:
    return repr(float(v))


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "step_size", "loglik"])
        for it, r, f in trace:
            w.writerow([int(it), _fmt(r), _fmt(f)])


def ml_to_dict(ml: MLFit) -> dict:
    return {"state": ml.state.to_dict(), "loglik": ml.loglik, "converged": bool(ml.converged),
            "stalled": bool(ml.stalled), "restart_logliks": [float(v) for v in ml.restart_logliks],
            "iterations": len(ml.trace) - 1}


def ml_from_dict(d: dict) -> MLFit:
    return MLFit(ParameterState.from_dict(d["state"]), d["loglik"], [], d["converged"], d["stalled"],
                 d["restart_logliks"])


def chain_header(geometry: GeometrySpec, n: int) -> list:
    cols = ["iteration", "alpha"] + (["beta"] if geometry.spherical else [])
    cols += [f"z{i}_{k}" for i in range(n) for k in range(geometry.dim)]
    return cols + ["loglik", "logpost"]


def write_chain(chain: ChainOutput, cfg: SamplerConfig, path):
    S, n, d = chain.Z.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(chain_header(chain.geometry, n))
        for s in range(S):
            row = [cfg.burn_in + (s + 1) * cfg.thin, _fmt(chain.alpha[s])]
            if chain.beta is not None:
                row.append(_fmt(chain.beta[s]))
            row += [_fmt(v) for v in chain.Z[s].ravel()]
            row += [_fmt(chain.loglik[s]), _fmt(chain.logpost[s])]
            w.writerow(row)


def read_chain(path, geometry: GeometrySpec, n: int) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != chain_header(geometry, n):
        raise ValueError(f"{path}: unexpected columns for {geometry.name} with n={n}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    k = 3 if geometry.spherical else 2
    return {"iteration": data[:, 0].astype(int), "alpha": data[:, 1],
            "beta": data[:, 2] if geometry.spherical else None,
            "Z": data[:, k:k + n * geometry.dim].reshape(-1, n, geometry.dim),
            "loglik": data[:, -2], "logpost": data[:, -1]}


def hp_from_dict(d: dict | None, geometry: GeometrySpec) -> HyperParameters:
    base = asdict(HyperParameters.default(geometry))
    base.update(d or {})
    return HyperParameters(**base)


def load_samples(root, net: Network) -> PosteriorSamples:
    """Rebuild posterior samples (with pointwise log-likelihoods) from a run directory."""
    p = run_paths(root)
    if not os.path.exists(p["manifest"]):
        raise FileNotFoundError(f"no manifest in {root}")
    man = load_json(p["manifest"])
    cfg_d = man["config"]
    geometry = GeometrySpec(cfg_d["geometry"], cfg_d["dim"])
    hp = hp_from_dict(cfg_d.get("hyper"), geometry)
    scfg = SamplerConfig(**cfg_d["sampler"])
    ml = ml_from_dict(load_json(os.path.join(p["reports"], "ml_state.json")))
    model = LatentSpaceModel(net, geometry, hp)
    chains = []
    for k, info in enumerate(man["chains"]):
        path = os.path.join(root, info["file"])
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        c = read_chain(path, geometry, net.n)
        S = c["alpha"].size
        pointwise = np.empty((S, net.n * (net.n - 1) // 2))
        for s in range(S):
            st = ParameterState(geometry, c["alpha"][s], c["Z"][s], None if c["beta"] is None else c["beta"][s])
            pointwise[s] = model.pointwise_loglik(st)
        chains.append(ChainOutput(geometry, c["alpha"], c["beta"], c["Z"], c["loglik"], c["logpost"], pointwise,
                                  info.get("acceptance", {}), info.get("tuned", {}), info.get("seed", [])))
    return PosteriorSamples(chains, ml, scfg, geometry, hp)
