//! Lattice embedding, candidate-path generation and per-layer metric tables.

mod candidates;
mod decompose;
mod exhaustive;
mod kbest;
mod minimal;

pub use candidates::{extract_layer_metrics, CandidateList, CandidatePath, LayerMetricTable};
pub use decompose::{
    layer_map, real_decompose, real_embedding, real_layer_index, Part, RealDecomposition, RealLayer,
};
pub use exhaustive::{
    check_enumeration, exhaustive_layer_table, for_each_hypothesis, hypothesis_count,
    ExhaustiveTable, ENUMERATION_LIMIT,
};
pub use kbest::{kbest_constrained, kbest_search};
pub use minimal::{
    adjacent_levels, minimal_path_budget, minimal_path_set, minimal_path_set_with,
    ConstrainedMinima, CONSTRAINED_KBEST_WIDTH, MINIMAL_SET_EXHAUSTIVE_LIMIT,
};
