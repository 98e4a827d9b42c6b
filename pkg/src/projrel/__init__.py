"""projrel: exact worldlet statistics, extendability certificates, and
latent-variable samplers for projective relational models."""

from .core import (
    ArityCell,
    BudgetExceededError,
    InvalidArgumentError,
    IsoClassId,
    Permutation,
    ProjrelError,
    Signature,
    World,
    apply_permutation,
    canonical_form,
    cell_permute,
    decompose,
    enumerate_cells,
    enumerate_worlds,
    induce_subset,
    induce_tuple,
    induced_permutation,
    recompose,
)
from .stats import (
    FrequencyVector,
    WorldletDistribution,
    fenstad,
    frequency_ordered,
    frequency_unordered,
    is_exchangeable,
    iso_average,
    marginalize,
    point_mass,
    table1_rows,
)
from .extend import (
    MembershipCertificate,
    PolytopeInstance,
    build_polytope,
    check_extendable,
    modularity_check,
    scatter_data,
)
from .ahk import (
    AhkModel,
    bipartite_model,
    block_model,
    builtin_models,
    check_equivariance,
    constant_empty_model,
    degree_model,
    degree_model_test,
    erdos_renyi_model,
    estimate_marginal,
    exact_marginal,
    exchangeability_test,
    model_from_json,
    modularity_bound_test,
    projectivity_test,
    sample_world,
    strip_global_latent,
)
from .bounds import (
    BoundSpec,
    RealizerResult,
    empirical_deviation,
    search_realizer,
    tail_bound,
    union_bound,
)

__version__ = "0.1.0"
