"""Universal variable-to-fixed length coding with quantized type classes."""

from .models import (
    ExpFamilyModel,
    ModelError,
    MLEError,
    bernoulli,
    ternary,
    quaternary,
    get_model,
    load_model,
    save_model,
)
from .qtypes import Grid, TypeCounter, CountingCapError, cell_of, type_class_size
from .dictionary import (
    Dictionary,
    DictionaryError,
    LeafCapExceeded,
    DepthCapExceeded,
    build_tc_dictionary,
    build_tunstall,
    choose_gamma,
    choose_gamma_profile,
    tc_leaf_profile,
    gamma_reference,
    load_dictionary,
    save_dictionary,
)
from .converse import FVCode, vf_to_fv, fv_length, check_event_equivalence
from .normal import gaussian_tail, gaussian_quantile
from .rates import (
    RateDistribution,
    RateEstimate,
    AsymptoticPrediction,
    exact_rate_distribution,
    profile_rate_distribution,
    mc_rate_distribution,
    eps_coding_rate,
    predicted_rate,
    normality_deviation,
    sup_residual,
)

__version__ = "0.1.0"
