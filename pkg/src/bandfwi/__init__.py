"""Reconstruction of piecewise-constant wavespeeds from band-limited,
time-windowed single-layer boundary data by Landweber iteration."""

__version__ = "0.1.0"

from .boundary import (
    BoundaryField,
    DataOperator,
    SphereQuadrature,
    data_operator,
    dtn_map,
    sh_analyze,
    sh_synthesize,
    single_layer_apply,
    sobolev_norm,
    verify_layer_dtn_identity,
)
from .helmholtz import (
    RadialLayers,
    ResolventNormTable,
    VolumeField,
    apply_free_resolvent,
    estimate_resolvent_norm,
    free_green,
    solve_lippmann_schwinger,
    solve_radial,
)
from .inversion import (
    ConstantsEstimate,
    GridForwardMap,
    LandweberState,
    RadialForwardMap,
    estimate_constants,
    frechet_apply,
    gradient,
    landweber_run,
    remainder_probe,
)
from .model import (
    Ball,
    DomainPartition,
    VoxelGrid,
    Wavespeed,
    labeled_partition,
    model_projection,
    perturbation_size,
    radial_partition,
    wavespeed_from_model,
)
from .timedomain import (
    BandSource,
    FrequencyGrid,
    TimeWindow,
    hs_misfit_frequency,
    hs_misfit_time,
    synthesize_trace,
    unit_source,
)
from .weights import WeightProfile, build_psi, solve_u_ode, verify_weight_inequalities

__all__ = [name for name in dir() if not name.startswith("_")]
