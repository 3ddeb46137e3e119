"""Euclidean and spherical latent space models for undirected binary networks."""

from .clustering import ClusteringResult, spectral_cluster
from .diagnostics import DiagnosticsReport, effective_sample_size, posterior_diagnostics, split_rhat
from .evaluation import (
    centrality,
    link_prediction,
    model_comparison,
    posterior_predictive_check,
    waic,
)
from .geometry import GeometrySpec, frechet_mean, procrustes_align, sample_vmf
from .mle import MLFit, OptimizerConfig, fit_ml
from .model import HyperParameters, LatentSpaceModel, ParameterState
from .network import Network, florentine, load_network
from .samplers import ChainOutput, PosteriorSamples, SamplerConfig, sample_posterior

__version__ = "0.1.0"

__all__ = [
    "ChainOutput", "ClusteringResult", "DiagnosticsReport", "GeometrySpec", "HyperParameters",
    "LatentSpaceModel", "MLFit", "Network", "OptimizerConfig", "ParameterState", "PosteriorSamples",
    "SamplerConfig", "centrality", "effective_sample_size", "fit_ml", "florentine", "frechet_mean",
    "link_prediction", "load_network", "model_comparison", "posterior_diagnostics",
    "posterior_predictive_check", "procrustes_align", "sample_posterior", "sample_vmf",
    "spectral_cluster", "split_rhat", "waic",
]
