"""Python bindings for the den library."""

from ._den import (
    ConfigError,
    DataError,
    NumericalError,
    accuracy,
    adjusted_rand_index,
    cluster,
    config_keys,
    config_text,
    embed,
    explain,
    f_cdf_exact,
    f_cdf_grad,
    f_cdf_laplace,
    kernel_shap,
    make_blobs,
    nmi,
    pair_graph,
    predict,
    run_pipeline,
    scatter_svg,
    set_num_threads,
    standardize,
)

__version__ = "0.1.0"
