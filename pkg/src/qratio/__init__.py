"""Distribution-free point and interval estimation of quantile ratios."""
from .distributions import (
    ChiSquare,
    Exponential,
    Gamma,
    Lognormal,
    ParetoII,
    ZeroSpikeMixture,
    fit_gamma_mom,
    parse_distribution,
    sample,
    true_quantile,
    true_quantile_density,
    true_ratio,
)
from .errors import InferenceError, InputError, QuantileRatioError
from .income_ingest import (
    BinnedIncomeTable,
    ReconstructionPolicy,
    load_shipped_table,
    parse_table,
    reconstruct,
)
from .quantile_core import Sample, empirical_cdf, hf8_quantile, sort_sample
from .quantile_density import BandwidthSpec, quantile_density
from .ratio_inference import (
    QuantilePair,
    RatioInference,
    estimate_ratio,
    infer_ratio,
    standard_error,
    studentized_interval,
    vst_interval,
)
from .robustness import (
    AnalyticDistribution,
    asv_ratio,
    breakdown_point,
    influence_ratio,
    influence_surface,
)
from .sim_harness import CoverageConfig, CoverageResult, run_coverage, run_two_sample_coverage
from .two_sample import TwoSampleInference, compare_ratios

__version__ = "0.1.0"
