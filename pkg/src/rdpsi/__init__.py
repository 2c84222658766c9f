"""Rate-distortion trade-offs with side information under an
output-realism constraint: exact finite-alphabet region computation, a
jointly Gaussian closed form, and finite-blocklength simulation of the
layered random-coding scheme."""

from .errors import CapacityError, InfeasibleError, NumericError
from .prob_core import (
    Channel,
    Coupling,
    FinitePmf,
    apply_channel,
    compose,
    condition,
    coupling_to_channel,
    marginalize,
    maximal_coupling,
    product_power,
    rename_axes,
    total_variation,
)
from .info_measures import (
    InfoReport,
    chain_rule_report,
    conditional_mutual_information,
    entropy,
    gaussian_cond_entropy,
    mutual_information,
)
from .gaussian_model import (
    GaussianParams,
    McStats,
    cond_mean_coeffs,
    covariance_zxv,
    make_params,
    mc_validate,
    sample_construction,
    ui_bound,
)
from .gaussian_model import min_rate as gaussian_min_rate
from .region_solver import (
    FeasiblePoint,
    OptimizerOptions,
    RegionPoint,
    SourceSpec,
    assemble,
    augment_source,
    brute_force_min_rate,
    ed_min_rate,
    evaluate,
    markov_check,
    min_rate,
    region_curve,
)
from .coding_sim import (
    Codebook,
    DecodeResult,
    RatePlan,
    SimReport,
    decode_mprime,
    decode_output,
    default_delta_typ,
    encode,
    encoder_posterior,
    exact_output_marginal,
    gen_codebook,
    log_likelihood_table,
    perfect_realism_correct,
    plan_rates,
    simulate,
    soft_cover_sweep,
)
from .seeds import derive_seed, derived_rng

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "Channel",
    "Codebook",
    "Coupling",
    "DecodeResult",
    "FeasiblePoint",
    "FinitePmf",
    "GaussianParams",
    "InfeasibleError",
    "InfoReport",
    "McStats",
    "NumericError",
    "OptimizerOptions",
    "RatePlan",
    "RegionPoint",
    "SimReport",
    "SourceSpec",
    "apply_channel",
    "assemble",
    "augment_source",
    "brute_force_min_rate",
    "chain_rule_report",
    "compose",
    "cond_mean_coeffs",
    "condition",
    "conditional_mutual_information",
    "coupling_to_channel",
    "covariance_zxv",
    "decode_mprime",
    "decode_output",
    "default_delta_typ",
    "derive_seed",
    "derived_rng",
    "ed_min_rate",
    "encode",
    "encoder_posterior",
    "entropy",
    "evaluate",
    "exact_output_marginal",
    "gaussian_cond_entropy",
    "gaussian_min_rate",
    "gen_codebook",
    "log_likelihood_table",
    "make_params",
    "marginalize",
    "markov_check",
    "maximal_coupling",
    "mc_validate",
    "min_rate",
    "mutual_information",
    "perfect_realism_correct",
    "plan_rates",
    "product_power",
    "region_curve",
    "rename_axes",
    "sample_construction",
    "simulate",
    "soft_cover_sweep",
    "total_variation",
    "ui_bound",
]
