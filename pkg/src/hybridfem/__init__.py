"""Hybrid finite-element / neural-network solver for the Poisson problem.

Coarse Q1 solves on the unit square are enriched with fine-mesh
corrections predicted patch-by-patch by one globally trained tanh MLP,
yielding a fine-mesh-quality solution at coarse-solve cost.  The package
also ships dataset generation, training, Fig.-1-style evaluation, an
error-budget report and a Lipschitz stability audit, all exposed through
the ``hybridfem`` command line tool.
"""

from .mesh import MeshHierarchy, Patch, build_hierarchy
from .fem import (
    FeFunction,
    SparseOperator,
    SolverError,
    assemble_stiffness,
    assemble_load,
    apply_dirichlet,
    solve_cg,
    fe_solve,
    norm_l2,
    seminorm_h1,
    norm_l2_nodal,
    error_vs_reference,
)
from .transfer import interpolate_up, restrict_patch, prolongate_patch, patch_weights
from .nn import (
    Mlp,
    AdamState,
    mlp_init,
    forward,
    gradients,
    adam_step,
    spectral_norm,
    lipschitz_constant,
)
from .rng import SplitMix64
from .data import (
    SourceParams,
    DataSample,
    Dataset,
    ModelStamp,
    FormatError,
    eval_source,
    source_fn,
    sample_source,
    generate_dataset,
    save_dataset,
    load_dataset,
    save_model,
    load_model,
)
from .hybrid import (
    TrainConfig,
    EvalRow,
    TrainingDivergedError,
    BudgetViolation,
    input_dim,
    output_dim,
    patch_input,
    patch_target,
    build_patch_arrays,
    loss,
    train,
    hybrid_solution,
    evaluate,
    error_budget,
    stability_check,
)

__version__ = "0.1.0"
