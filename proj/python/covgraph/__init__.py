"""Graph structure estimation from compressed, noisy measurements.

Arrays are 2-D with samples as rows. Errors from the library raise CovgraphError.
"""

import json as _json

from ._covgraph import (
    CovgraphError,
    __version__,
    band_precision,
    covariance_from_precision,
    deconv_cdf,
    diagnose,
    estimate_nonparam,
    estimate_param,
    glasso,
    latent_samples,
    reconstruct,
    run_experiment as _run_experiment,
    run_sample_experiment as _run_sample_experiment,
    sense,
    sensing_matrix,
)


def run_experiment(config, include_runtime=False):
    """Run an experiment from a config dict or JSON string; returns the result dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _run_experiment(text, include_runtime)


def run_sample_experiment(config, x, include_runtime=False):
    """Score compressed-measurement graphs against the graph learned from samples x (rows)."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _run_sample_experiment(text, x, include_runtime)


__all__ = [
    "CovgraphError",
    "__version__",
    "band_precision",
    "covariance_from_precision",
    "deconv_cdf",
    "diagnose",
    "estimate_nonparam",
    "estimate_param",
    "glasso",
    "latent_samples",
    "reconstruct",
    "run_experiment",
    "run_sample_experiment",
    "sense",
    "sensing_matrix",
]
