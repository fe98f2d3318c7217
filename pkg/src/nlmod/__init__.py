"""Community detection by nonlinear modularity eigenvectors.

Modularity is maximized over bipartitions through tight continuous
relaxations built from graph total variations, solved with a generalized
RatioDCA, then thresholded.  Multi-community partitions come from
successive bipartition with optional single-vertex refinement.
"""

from .graph import (
    EdgeListError,
    IndexMap,
    WeightedGraph,
    chung_lu_sample,
    knn_graph,
    load_edge_list,
    planted_model,
    read_edge_list,
    subgraph,
    write_edge_list,
)
from .metrics import clustering_error, nmi
from .modularity import (
    ConvergenceError,
    EigenResult,
    ModularityContext,
    community_modularities,
    leading_eigenpair,
    mod_matvec,
    modularity_matrix,
    partition_modularity,
    q_mu_of,
    q_of,
    set_modularity,
)
from .nonlinear import (
    delta0_select,
    lovasz_modularity,
    phi_select,
    psi_select,
    rayleigh_r,
    rayleigh_r_centered,
    rayleigh_r_star,
    tv_graph,
    tv_null,
    tv_pair,
)
from .partition import (
    MethodSpec,
    Partition,
    Start,
    default_starts,
    diffusion_start,
    kl_refine,
    leading_module,
    optimal_threshold,
    successive_bipartition,
)
from .ratiodca import (
    DCAOptions,
    InnerProblem,
    RatioProblem,
    maximize_r_perp,
    maximize_r_star,
    ratio_dca,
    solve_inner_pdhg,
)

__version__ = "0.1.0"
