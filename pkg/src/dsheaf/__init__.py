"""Directed cellular sheaves, Hermitian sheaf Laplacians, and sheaf diffusion
networks for node classification on directed graphs."""

from .graph import (
    Dataset,
    DirectedGraph,
    DsbmParams,
    Edge,
    EdgeKind,
    adjacency,
    degree_features,
    dsbm_communities,
    dsbm_generate,
    make_splits,
    uniform_dsbm_params,
)
from .linalg import (
    BlockMatrix,
    herm_eigvals,
    inv_sqrt_psd,
    jacobi_eigvalsh,
    real_lift,
)
from .nn import (
    ModelConfig,
    ModelParams,
    SheafDiffusionModel,
    complex_relu,
    decode,
    encode,
    unwind,
)
from .sheaf import (
    DirectedCellularSheaf,
    MapClass,
    SheafConfig,
    coboundary,
    complex_incidence,
    degree_blocks,
    laplacian_blocks,
    laplacian_from_coboundary,
    magnetic_laplacian,
    normalize,
    normalized_laplacian,
    phase,
    sign_magnetic_laplacian,
    spectral_report,
    trivial_sheaf,
)
from .train import ExperimentConfig, adam_step, evaluate, run_experiment, train

__version__ = "0.1.0"
