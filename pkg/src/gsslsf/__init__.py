"""Single-mixture graph signal separation with learnable spectral filters."""

from .baseline import SmoothConfig, grid_search_gammas, gss_smooth_separate
from .bench import ExperimentConfig, SeparationReport, run_experiment, run_separate
from .graphs import (
    Graph,
    build_laplacian,
    generate_random_geometric,
    generate_random_regular,
    is_connected,
)
from .lsf import (
    AdamConfig,
    LatentInput,
    LsfModel,
    adam_fit,
    extract_components,
    fit_closed_form,
    init_model,
)
from .signals import Bandlimited, HeatKernel, NoiseSpec, mix, snr_db
from .spectral import eigendecompose, select_cutoff, truncated_basis

__version__ = "0.1.0"
