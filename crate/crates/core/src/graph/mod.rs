//! Graphs, synthetic data, perturbations, node splits and CSV ingestion.

mod dataset;
mod generators;
#[allow(clippy::module_inception)]
mod graph;
mod io;
mod split;

pub use dataset::{
    mask_indices, neighbor_mean, perturb, synth_dataset, Dataset, FeatureFamily, MaskKind, Masks,
    PerturbKind, PerturbSpec,
};
pub use generators::{gen_ba, gen_chain, gen_er, gen_grid, gen_tree, GraphSpec};
pub use graph::Graph;
pub use io::{export_csv, load_csv, load_csv_with_split};
pub use split::{label_propagation, split, SplitKind, SplitSpec};
