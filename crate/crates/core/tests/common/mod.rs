#![allow(dead_code)]

use qpignn::diff::{ParamStore, Tensor};
use qpignn::graph::Graph;
use qpignn::model::{init_params, ModelConfig, Variant};
use qpignn::rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Triangle with a tail: degrees 2, 2, 3, 2, 2, 1.
pub fn six_node_graph() -> Graph {
    Graph::from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)]).unwrap()
}

pub fn normal_vec(len: usize, seed: u64, tag: &str) -> Vec<f64> {
    let mut r = rng::stream(seed, tag, 0);
    (0..len).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

pub fn features(n: usize, d: usize, seed: u64) -> Tensor {
    Tensor::from_vec(n, d, normal_vec(n * d, seed, "fixture-x")).unwrap()
}

/// Default initialization plus noise on every entry, so no bias sits at zero
/// and no relu is pinned at its kink.
pub fn jittered_params(variant: Variant, feat_dim: usize, hidden: usize, seed: u64) -> ParamStore {
    let cfg = ModelConfig {
        variant,
        feat_dim,
        hidden,
        init_seed: seed,
    };
    let mut store = init_params(&cfg).unwrap();
    let mut r = rng::stream(seed, "fixture-jitter", 0);
    for (_, p) in store.iter_mut() {
        for x in p.value.data_mut() {
            *x += 0.3 * r.sample::<f64, _>(StandardNormal);
        }
    }
    store
}
