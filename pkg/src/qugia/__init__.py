"""Query-based unnoticeable graph injection attacks and evaluation tooling."""

from .graph import (
    Graph,
    InjectionPatch,
    ConstraintSpec,
    GraphError,
    compose,
    validate_constraints,
    neighbor_set,
    test_neighbor_score,
    default_constraints,
    load_graph,
    save_graph,
    load_patch,
    save_patch,
)
from .models import (
    ModelWeights,
    DefenseConfig,
    TrainConfig,
    ModelError,
    QueryOracle,
    forward,
    predict,
    guard_prune,
    normalize_adjacency,
    train_gcn,
    load_weights,
    save_weights,
)
from .attack import (
    AttackConfig,
    AttackError,
    AttackResult,
    SearchState,
    TripletRecord,
    run_attack,
)
from .baselines import run_baseline
from .evaluate import (
    AttackReport,
    Manifest,
    accuracy,
    node_similarity,
    similarity_shift,
    run_experiment,
)

__version__ = "0.1.0"
