"""Factor models for high-dimensional tensor time series."""
from .dgp import DgpSpec, Truth, gen_factor_series, gen_loadings, gen_noise_series, gen_series
from .diagnostics import (
    TheoryReport,
    loading_loss,
    loss_projection,
    loss_sine,
    predicted_rate,
    theory_report,
)
from .estimators import (
    FactorEstimate,
    ModelSpec,
    demean,
    estimate,
    estimate_iterative,
    reconstruct_signal,
    select_ranks,
    tipup_matrix,
    topup_matrix,
)
from .postprocess import moving_average, normalize_columns, varimax
from .ratefit import RateFitResult, emit_rate_surface, fit_rate_model
from .spectral import SvdResult, projection_from_basis, spectral_norm, top_left_singular
from .tensor import (
    TensorSeries,
    from_vec,
    kron_all,
    mode_product,
    outer_product,
    refold,
    unfold,
    vec,
)

__version__ = "0.1.0"

__all__ = [
    "DgpSpec",
    "FactorEstimate",
    "ModelSpec",
    "RateFitResult",
    "SvdResult",
    "TensorSeries",
    "TheoryReport",
    "Truth",
    "demean",
    "emit_rate_surface",
    "estimate",
    "estimate_iterative",
    "fit_rate_model",
    "from_vec",
    "gen_factor_series",
    "gen_loadings",
    "gen_noise_series",
    "gen_series",
    "kron_all",
    "loading_loss",
    "loss_projection",
    "loss_sine",
    "mode_product",
    "moving_average",
    "normalize_columns",
    "outer_product",
    "predicted_rate",
    "projection_from_basis",
    "reconstruct_signal",
    "refold",
    "select_ranks",
    "spectral_norm",
    "theory_report",
    "tipup_matrix",
    "top_left_singular",
    "topup_matrix",
    "unfold",
    "varimax",
    "vec",
]
