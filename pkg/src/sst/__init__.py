"""Random linear programs over combinatorial polytopes and their
temperature-controlled convex relaxations.

The package splits into: structure descriptors and enumeration oracles
(``structures``), reparameterizable noise families (``utilities``),
exact linear maximizers and categorical sampling processes (``argmax``),
regularized solvers (``relax``), Jacobian machinery (``grad``), the
statistical verification harness (``verify``), and a CLI (``cli``).
"""

from .argmax import (
    MapSolution,
    cle_max_arborescence,
    hungarian_match,
    kruskal_max_tree,
    sample_arborescence_categorical,
    sample_topk_without_replacement,
    sample_tree_categorical,
    solve_map,
    topk_select,
)
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    EnumerationLimitError,
    InfeasibleStructureError,
    InputError,
    InvalidSpecError,
    NumericalError,
    OutOfSupportError,
    SolverError,
    SstError,
    UnsupportedFamilyError,
    UnsupportedPairError,
)
from .grad import FDConfig, GradcheckReport, analytic_jacobian, fd_jacobian, fd_vjp, gradcheck
from .relax import (
    RelaxationSpec,
    RelaxedPoint,
    Regularizer,
    binary_entropy_relax,
    categorical_entropy_relax,
    directed_matrix_tree_marginals,
    euclidean_project,
    expfam_marginals,
    matrix_tree_marginals,
    relax,
    sinkhorn_relax,
    softmax_simplex,
    supported_pairs,
)
from .structures import (
    Graph,
    StructureKind,
    StructureSpec,
    default_enum_limit,
    embedding_dim,
    enumerate_vertices,
    is_vertex,
    spec_from_dict,
    spec_to_dict,
)
from .utilities import (
    UtilityDraw,
    UtilityFamily,
    UtilitySpec,
    draw,
    kl_to_standard,
    log_density,
    sample,
    utility_from_dict,
    utility_to_dict,
)
from .verify import (
    FrequencyTable,
    TestReport,
    chi_square_gof,
    gibbs_marginals_bruteforce,
    ks_report,
    mc_frequencies,
    run_suite,
    two_sample_equivalence,
)

__version__ = "0.1.0"
