"""Python bindings for the nllvm-lab library."""

from ._core import (
    EmptyDataError,
    Error,
    Grid,
    GridDensity,
    IoError,
    ParameterError,
    ParseError,
    check_hellinger_bound,
    chi2_limit_experiment,
    convolve_gaussian,
    divergence,
    estimate,
    fbeta,
    fbeta_closed_form_check,
    l1_support_search,
    load_csv,
    mixture_density,
    mixture_identity_check,
    normal_density,
    quantile_of,
    run_cli,
    vi_normal_normal,
)

__all__ = [
    "EmptyDataError",
    "Error",
    "Grid",
    "GridDensity",
    "IoError",
    "ParameterError",
    "ParseError",
    "check_hellinger_bound",
    "chi2_limit_experiment",
    "convolve_gaussian",
    "divergence",
    "estimate",
    "fbeta",
    "fbeta_closed_form_check",
    "l1_support_search",
    "load_csv",
    "mixture_density",
    "mixture_identity_check",
    "normal_density",
    "quantile_of",
    "run_cli",
    "vi_normal_normal",
]
