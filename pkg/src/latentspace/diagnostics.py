"""Effective sample size, split R-hat and run summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("draws must be 1-D (one chain) or 2-D (chains x draws)")
    return x


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one series at all lags, via FFT."""
    n = x.size
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    ac = np.fft.irfft(f * np.conj(f), m)[:n]
    return ac / n


def ess_with_flag(draws) -> tuple[float, bool]:
    """ESS and whether the draws were degenerate (zero variance)."""
    x = _as_chains(draws)
    m, n = x.shape
    if m == 1 and n < 100:
        raise ValueError("a single chain needs at least 100 draws")
    if n < 4:
        raise ValueError("each chain needs at least 4 draws")
    total = m * n
    if np.all(np.ptp(x, axis=1) == 0) and np.ptp(x) == 0:
        return float(total), True
    acov = np.stack([_autocov(c) for c in x])
    chain_var = acov[:, 0] * n / (n - 1.0)
    W = chain_var.mean()
    var_plus = W * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(total), True
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer: positive pair sums, then forced to be non-increasing
    pairs = []
    for t in range(0, n - 1, 2):
        p = rho[t] + rho[t + 1]
        if p < 0:
            break
        if pairs and p > pairs[-1]:
            p = pairs[-1]
        pairs.append(p)
    tau = -1.0 + 2.0 * sum(pairs) if pairs else 1.0
    tau = max(tau, 1.0 / math.log10(max(total, 10)))
    return total / tau, False


def effective_sample_size(draws) -> float:
    """Autocorrelation ESS with Geyer's initial monotone sequence.

    ``draws`` is one chain or an array of shape (chains, draws); several
    chains are combined through the pooled variance estimate. Negative
    autocorrelation can push the result above the number of draws.
    """
    return ess_with_flag(draws)[0]


def rhat_with_flag(draws) -> tuple[float, bool]:
    x = _as_chains(draws)
    m, n = x.shape
    if n < 4:
        raise ValueError("each chain needs at least 4 draws")
    h = n // 2
    halves = np.concatenate([x[:, :h], x[:, n - h:]], axis=0)
    W = halves.var(axis=1, ddof=1).mean()
    if W <= 0:
        return 1.0, True
    B = h * halves.mean(axis=1).var(ddof=1)
    var_hat = (h - 1.0) / h * W + B / h
    # below 1 only when the half means agree better than chance; report 1
    return float(max(1.0, math.sqrt(var_hat / W))), False


def split_rhat(draws) -> float:
    """Potential scale reduction after splitting every chain in half.

    Classic between/within variance ratio, floored at 1.
    """
    return rhat_with_flag(draws)[0]


@dataclass
class DiagnosticsReport:
    ess: dict
    rel_ess: dict
    rhat: dict
    acceptance: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)

    @property
    def max_rhat(self) -> float:
        return max(self.rhat.values())

    @property
    def min_rel_ess(self) -> float:
        return min(self.rel_ess.values())

    def to_dict(self) -> dict:
        return {"ess": self.ess, "rel_ess": self.rel_ess, "rhat": self.rhat,
                "max_rhat": self.max_rhat, "min_rel_ess": self.min_rel_ess,
                "acceptance": self.acceptance, "degenerate": self.degenerate}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "ess", "rel_ess", "rhat"])
            for k in self.ess:
                w.writerow([k, repr(self.ess[k]), repr(self.rel_ess[k]), repr(self.rhat[k])])


def diagnose(scalars: dict, acceptance: dict | None = None) -> DiagnosticsReport:
    """Report for named scalar traces, each shaped (chains, draws) or (draws,)."""
    ess, rel, rh, bad = {}, {}, {}, []
    for name, draws in scalars.items():
        x = _as_chains(draws)
        e, d1 = ess_with_flag(x)
        r, d2 = rhat_with_flag(x)
        ess[name], rel[name], rh[name] = e, e / x.size, r
        if d1 or d2:
            bad.append(name)
    return DiagnosticsReport(ess, rel, rh, dict(acceptance or {}), bad)


def posterior_diagnostics(samples) -> DiagnosticsReport:
    """Monitor alpha, beta (spherical), log-likelihood and log-posterior across chains."""
    chains = samples.chains
    scalars = {"alpha": np.stack([c.alpha for c in chains])}
    if chains[0].beta is not None:
        scalars["beta"] = np.stack([c.beta for c in chains])
    scalars["loglik"] = np.stack([c.loglik for c in chains])
    scalars["logpost"] = np.stack([c.logpost for c in chains])
    acc = {f"chain{k}": c.acceptance for k, c in enumerate(chains)}
    return diagnose(scalars, acc)
