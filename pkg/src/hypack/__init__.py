"""hypack: an executable packing engine for bounded-degree k-graphs in
quasirandom hosts.

Candidacy graphs with intersection certificates, pattern/tester bookkeeping,
weight-controlled pseudorandom matchings, per-cluster approximate packing
rounds, and a randomized completion phase, with every structural guarantee
verified at desk scale.
"""

from .bigraph import (
    Bigraph,
    c4_count,
    certify_regular_c4,
    density,
    is_super_regular,
    m_factor,
    perfect_matching,
)
from .candidacy import (
    CandidacyGraph,
    build_candidacy,
    build_labelling,
    check_well_intersecting,
    suitable_pairs_E,
    suitable_set_X,
)
from .hypercore import (
    KGraph,
    VertexSetFamily,
    is_typical,
    is_typical_wrt_reduced,
    max_m_degree,
    shadow,
    shadow_power,
)
from .instances import (
    BlowupInstance,
    build_schedule,
    group_and_slice,
    refine_partitions,
    refine_partitions_single,
    split_host,
    validate_blowup,
)
from .matcher import (
    MatchHypergraph,
    TupleWeight,
    brute_force_matchings,
    degree_stats,
    pseudorandom_matching,
)
from .packer import (
    ParameterLadder,
    augment_guests,
    build_aux_hypergraph,
    build_registry,
    complete_packing,
    evaluate_tester_suite,
    pack_cluster,
    run_iterative,
    verify_packing,
)
from .patterns import (
    EdgeTesterSpec,
    LocalTester,
    SetTester,
    VertexTester,
    eval_general_edge_tester,
    eval_set_tester,
    eval_simple_edge_tester,
    eval_vertex_tester,
    first_pattern,
    pattern_class,
    second_pattern,
)
from .workbench import (
    ExperimentConfig,
    gen_binomial_kgraph,
    gen_complete_kgraph,
    gen_ktree,
    gen_multipartite_host,
    gen_sphere_triangulation,
    gen_tight_cycle_factor,
    run_experiment,
)

__version__ = "0.1.0"
