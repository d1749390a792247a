"""Regression manifolds for block maxima.

Conditional quantiles of a response maximum given covariate maxima, from
parametric bivariate extreme-value models or from a Bayesian Bernstein
polynomial estimate of the angular density.
"""

from .bernstein import (
    BernsteinAngularDensity,
    PseudoAngleSample,
    conditional_cdf_approx,
    conditional_cdf_p1,
    decompose,
    weights_from_logits,
)
from .diagnostics import ResidualReport, quantile_residuals
from .manifold import (
    RegressionManifold,
    conditional_quantile,
    logistic_linear_asymptote,
    logistic_quantile_closed_form,
    manifold_grid,
)
from .mcmc import McmcChain, McmcConfig, effective_sample_size, posterior_manifold, run_chain
from .models import ColesTawn, HuslerReiss, Logistic, conditional_cdf, joint_cdf, sample

__version__ = "0.1.0"

__all__ = [
    "BernsteinAngularDensity", "PseudoAngleSample", "conditional_cdf_approx", "conditional_cdf_p1",
    "decompose", "weights_from_logits", "ResidualReport", "quantile_residuals", "RegressionManifold",
    "conditional_quantile", "logistic_linear_asymptote", "logistic_quantile_closed_form", "manifold_grid",
    "McmcChain", "McmcConfig", "effective_sample_size", "posterior_manifold", "run_chain",
    "ColesTawn", "HuslerReiss", "Logistic", "conditional_cdf", "joint_cdf", "sample",
]
