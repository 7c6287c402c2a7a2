"""Conditional Kendall's tau regression.

Two-step estimation of z -> tau(z): kernel estimates of the conditional
Kendall's tau at a set of design points, then an l1-penalized regression
of the (transformed) estimates on a function dictionary.  Includes a
Wald-type test of the simplifying assumption (constant tau), finite
sample theory bounds, copula samplers for the built-in simulation
settings, and a benchmark harness reproducing the reference tables.

The command line entry point is `ckreg` (see ckreg.cli).
"""

from .bench import (
    BenchConfig,
    comparison_table,
    integrated_metrics,
    make_grid,
    test_power_table,
)
from .concordance import ckt_at, ckt_batch, gn_moment, variant
from .dictionary import (
    Dictionary,
    build_family_1d,
    build_family_2d,
    constant_dictionary,
    design_matrix,
    with_input_box,
)
from .errors import (
    ArgumentError,
    CkregError,
    DataError,
    DegenerateInputError,
    EstimationImpossibleError,
    NumericalError,
)
from .inference import bootstrap_pvalue, theorem1_bound, wald_test
from .kernels import KernelSpec, Sample, rule_of_thumb_bandwidth
from .lasso import LassoProblem, lambda_max
from .lasso import fit as lasso_fit
from .pipeline import (
    FitConfig,
    FitResult,
    cross_validate_lambda,
    from_json_dict,
    marginal_effect,
    predict,
    to_json_dict,
    two_step_fit,
)
from .simulation import SETTINGS, get_setting, sample_setting, true_tau
from .transforms import TransformSpec

__version__ = "1.0.0"

__all__ = [
    "ArgumentError",
    "BenchConfig",
    "CkregError",
    "DataError",
    "DegenerateInputError",
    "Dictionary",
    "EstimationImpossibleError",
    "FitConfig",
    "FitResult",
    "KernelSpec",
    "LassoProblem",
    "NumericalError",
    "SETTINGS",
    "Sample",
    "TransformSpec",
    "bootstrap_pvalue",
    "build_family_1d",
    "build_family_2d",
    "ckt_at",
    "ckt_batch",
    "comparison_table",
    "constant_dictionary",
    "cross_validate_lambda",
    "design_matrix",
    "from_json_dict",
    "get_setting",
    "gn_moment",
    "integrated_metrics",
    "lambda_max",
    "lasso_fit",
    "make_grid",
    "marginal_effect",
    "predict",
    "rule_of_thumb_bandwidth",
    "sample_setting",
    "test_power_table",
    "theorem1_bound",
    "to_json_dict",
    "true_tau",
    "two_step_fit",
    "variant",
    "wald_test",
    "with_input_box",
    "__version__",
]
