//! Ready-made SEMs used by tests, the CLI and the experiment harness, plus
//! random SEM and intervention generators.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::intervention::Intervention;
use crate::sem::{build_sem, Edge, Noise, SemModel};

fn named(sem: SemModel, names: &[&str]) -> SemModel {
    sem.with_names(names.iter().map(|s| s.to_string()).collect())
        .expect("fixture names match")
}

/// Four-node faithfulness-violation SEM over `X1, X2, X3, Xt` with unit
/// noise: `X1 -> X2` (1), `X1 -> X3` (a), `X2 -> X3` (b), `X2 -> Xt` (1),
/// `X3 -> Xt` (1). With `a = -b` the two paths from `X1` into `X3` cancel.
pub fn example_one(a: f64, b: f64) -> SemModel {
    example_one_with_noise(a, b, [1.0; 4])
}

pub fn example_one_with_noise(a: f64, b: f64, variances: [f64; 4]) -> SemModel {
    let edges = [
        Edge::new(0, 1, 1.0),
        Edge::new(0, 2, a),
        Edge::new(1, 2, b),
        Edge::new(1, 3, 1.0),
        Edge::new(2, 3, 1.0),
    ];
    let noise = variances.iter().map(|&v| Noise::gaussian(v)).collect();
    named(
        build_sem(&edges, noise, 3).expect("valid fixture"),
        &["X1", "X2", "X3", "Xt"],
    )
}

/// Environment of [`example_one`] in which the `a`/`b` weights are rewritten.
pub fn example_one_variant(a: f64, b: f64) -> Intervention {
    Intervention::soft_only([((0, 2), a), ((1, 2), b)])
}

fn chain_names(n: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    names.push("Xt".into());
    names
}

fn chain_edges(n: usize) -> Vec<Edge> {
    let mut edges: Vec<Edge> = (1..n).map(|i| Edge::new(i - 1, i, 1.0)).collect();
    edges.push(Edge::new(0, n, 1.0));
    edges.push(Edge::new(n - 1, n, 1.0));
    edges
}

/// Chain `X1 -> X2 -> ... -> Xn` with `X1 -> Xt` and `Xn -> Xt`, all
/// weights one. `X1` is fixed to 1, every other covariate copies its parent exactly and
/// the target carries unit noise. Variables are indexed `0..n` and the
/// target is index `n`.
pub fn chain(n: usize) -> SemModel {
    assert!(n >= 3, "chain needs at least one interior node");
    let mut noise = vec![Noise::gaussian(0.0); n + 1];
    noise[0] = Noise::constant(1.0);
    noise[n] = Noise::gaussian(1.0);
    build_sem(&chain_edges(n), noise, n)
        .expect("valid fixture")
        .with_names(chain_names(n))
        .expect("names match")
}

/// Sampling version of [`chain`]: `X1 = 1 + N(0, v)`, `Xn` and the target
/// carry `N(0, v)` noise and the interior copies its parent exactly.
pub fn chain_noisy(n: usize, variance: f64) -> SemModel {
    assert!(n >= 3, "chain needs at least one interior node");
    let mut noise = vec![Noise::gaussian(0.0); n + 1];
    noise[0] = Noise::Gaussian {
        variance,
        mean: 1.0,
    };
    noise[n - 1] = Noise::gaussian(variance);
    noise[n] = Noise::gaussian(variance);
    build_sem(&chain_edges(n), noise, n)
        .expect("valid fixture")
        .with_names(chain_names(n))
        .expect("names match")
}

/// Interior nodes `X2 .. X_{n-1}` of the chain.
pub fn chain_interior(n: usize) -> Vec<usize> {
    (1..n - 1).collect()
}

/// Hard-assigns 0 to interior node `k` whenever `pattern[k]` is set.
pub fn chain_pattern(n: usize, pattern: &[bool]) -> Intervention {
    assert_eq!(pattern.len(), n - 2);
    Intervention::hard_only(
        chain_interior(n)
            .into_iter()
            .zip(pattern)
            .filter(|(_, &cut)| cut)
            .map(|(i, _)| (i, 0.0)),
    )
}

/// Representative seven-node SEM `v1..v6, t` with unit weights:
/// `v1 -> v2`, `v1 -> v3`, `v2 -> v4`, `v3 -> v5`, `v4 -> v5`, `v5 -> t`,
/// `t -> v6`. The target's only parent is `v5` and `v6` is anti-causal.
/// Every noise term has variance `variance`.
pub fn seven_node(variance: f64) -> SemModel {
    let edges = [
        Edge::new(0, 1, 1.0),
        Edge::new(0, 2, 1.0),
        Edge::new(1, 3, 1.0),
        Edge::new(2, 4, 1.0),
        Edge::new(3, 4, 1.0),
        Edge::new(4, 6, 1.0),
        Edge::new(6, 5, 1.0),
    ];
    named(
        build_sem(&edges, vec![Noise::gaussian(variance); 7], 6).expect("valid fixture"),
        &["v1", "v2", "v3", "v4", "v5", "v6", "t"],
    )
}

/// Intervention sites `v3, v4, v5` of [`seven_node`].
pub fn seven_node_sites() -> Vec<usize> {
    vec![2, 3, 4]
}

/// Options for [`random_sem`].
#[derive(Debug, Clone, Copy)]
pub struct RandomSemOptions {
    pub edge_prob: f64,
    /// Weights are uniform on `[-max_weight, max_weight]`.
    pub max_weight: f64,
    pub min_variance: f64,
    pub max_variance: f64,
    /// Place the target last in the causal order so it has no descendants.
    pub target_is_sink: bool,
}

impl Default for RandomSemOptions {
    fn default() -> Self {
        RandomSemOptions {
            edge_prob: 0.5,
            max_weight: 1.0,
            min_variance: 0.05,
            max_variance: 1.0,
            target_is_sink: false,
        }
    }
}

/// Random DAG over `n_covariates + 1` variables in a random causal order.
pub fn random_sem<R: Rng>(rng: &mut R, n_covariates: usize, opts: RandomSemOptions) -> SemModel {
    let len = n_covariates + 1;
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let target = if opts.target_is_sink {
        order[len - 1]
    } else {
        order[rng.random_range(0..len)]
    };
    let mut edges = Vec::new();
    for a in 0..len {
        for b in a + 1..len {
            if rng.random::<f64>() < opts.edge_prob {
                let w = rng.random_range(-opts.max_weight..=opts.max_weight);
                if w != 0.0 {
                    edges.push(Edge::new(order[a], order[b], w));
                }
            }
        }
    }
    let noise = (0..len)
        .map(|_| Noise::gaussian(rng.random_range(opts.min_variance..=opts.max_variance)))
        .collect();
    build_sem(&edges, noise, target).expect("generated DAG is valid")
}

/// Random mix of hard assignments (each non-target variable with
/// probability 0.3, value `N(0, 1)`) and soft overrides (each forward pair
/// into a non-hard, non-target node with probability 0.3, weight uniform on
/// `[-1, 1]`).
pub fn random_intervention<R: Rng>(rng: &mut R, sem: &SemModel) -> Intervention {
    let t = sem.target();
    let mut hard = BTreeMap::new();
    for i in 0..sem.num_vars() {
        if i != t && rng.random::<f64>() < 0.3 {
            let z: f64 = StandardNormal.sample(rng);
            hard.insert(i, z);
        }
    }
    let order = sem.topo_order();
    let mut soft = BTreeMap::new();
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            let (j, i) = (order[a], order[b]);
            if i == t || hard.contains_key(&i) {
                continue;
            }
            if rng.random::<f64>() < 0.3 {
                soft.insert((j, i), rng.random_range(-1.0..=1.0));
            }
        }
    }
    Intervention::new(hard, soft)
}
