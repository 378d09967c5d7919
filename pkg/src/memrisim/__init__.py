"""Memristive crossbar simulation and nonideality-aware network training."""

from .rng import RngStream, as_generator
from .stats import (
    Covariance2,
    LinearFit,
    TruncatedKde,
    build_kde,
    covariance2,
    linear_fit,
    sample_kde,
    sample_lognormal,
    sample_mvnormal2,
)
from .device import (
    CONDUCTANCE_QUANTUM,
    IvCurve,
    PfParams,
    PfTrendModel,
    RegionTrend,
    builtin_siox_model,
    exclude_abrupt,
    fit_pf_curve,
    fit_trend_model,
    load_model,
    nonlinearity,
    pf_current,
    sample_device_params,
    save_model,
)
from .nonideality import (
    D2dLognormal,
    DisturbanceReport,
    IvNonlinearity,
    StuckEmpirical,
    StuckSimple,
    apply_composite,
    disturb_d2d,
    disturb_stuck_empirical,
    disturb_stuck_simple,
)
from .crossbar import (
    ConductancePair,
    CrossbarMapping,
    PowerTally,
    compute_k_g,
    energy_efficiency,
    map_double,
    map_low_power,
    map_symmetric,
    vmm_ideal,
    vmm_pf,
)
from .nn import (
    AdamState,
    CrossbarContext,
    DenseLayer,
    Network,
    backward,
    clip_nonneg,
    forward,
    l1_penalty,
    loss_softmax_xent,
    make_mlp,
    optimizer_step,
)

__version__ = "0.1.0"
