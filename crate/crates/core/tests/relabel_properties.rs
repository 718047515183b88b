mod common;

use dpmen::linalg::Matrix;
use dpmen::model::{ChainState, Dataset, Hyperparameters, PosteriorChain, ResponseKind};
use dpmen::relabel::{permute_state, relabel_chain};
use dpmen::sampler::mixture_log_likelihood;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const J: usize = 3;
const P: usize = 2;
const N: usize = 12;

struct Fixture {
    chain: PosteriorChain,
    data: Dataset,
    any_switch: bool,
}

/// A chain whose draws jitter around three separated components, with each
/// draw's labels shuffled at random when `shuffle` is set.
fn fixture(seed: u64, n_draws: usize, shuffle: bool) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[2.0, 0.0], [-2.0, 1.0], [0.0, -3.0]];
    let rows: Vec<Vec<f64>> = (0..N).map(|_| (0..P).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().enumerate().map(|(i, x)| common::dot(x, &centers[i % J])).collect();
    let data = Dataset::from_rows(&rows, y, "c", ResponseKind::RawScore).unwrap();
    let mut draws = Vec::new();
    let mut any_switch = false;
    for _ in 0..n_draws {
        let beta: Vec<Vec<f64>> = centers.iter().map(|c| c.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect()).collect();
        let state = ChainState {
            sticks: vec![0.4, 0.5],
            weights: vec![0.4, 0.3, 0.3],
            alpha: 1.0,
            beta: Matrix::from_rows(&beta).unwrap(),
            sigma2: (0..J).map(|_| rng.random_range(0.05..0.2)).collect(),
            tau: Matrix::from_rows(&vec![vec![0.5; P]; J]).unwrap(),
            assignments: (0..N).map(|i| i % J).collect(),
            net_of: vec![0; J],
            net_weights: vec![1.0],
            lambda1: vec![1.0],
            lambda2: vec![1.0],
        };
        let mut perm: Vec<usize> = (0..J).collect();
        if shuffle {
            perm.shuffle(&mut rng);
        }
        any_switch |= perm.iter().enumerate().any(|(a, &b)| a != b);
        draws.push(permute_state(&state, &perm));
    }
    let hyper = Hyperparameters { truncation: J, n_nets: 1, n_iter: n_draws + 1, burn_in: 1, ..Hyperparameters::default() };
    let chain = PosteriorChain {
        draws,
        hyper,
        relabeled: false,
        seed,
        class_id: "c".into(),
        n_samples: N,
        n_features: P,
        n_chains: 1,
    };
    Fixture { chain, data, any_switch }
}

fn component_rows(state: &ChainState) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = (0..J)
        .map(|j| {
            let mut r: Vec<u64> = state.beta.row(j).iter().map(|v| v.to_bits()).collect();
            r.push(state.sigma2[j].to_bits());
            r.push(state.weights[j].to_bits());
            r
        })
        .collect();
    rows.sort();
    rows
}

fn trace_variance(chain: &PosteriorChain) -> f64 {
    let n = chain.draws.len() as f64;
    let mut total = 0.0;
    for j in 0..J {
        for l in 0..P {
            let vals: Vec<f64> = chain.draws.iter().map(|d| d.beta.get(j, l)).collect();
            let mean = vals.iter().sum::<f64>() / n;
            total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relabeling_twice_changes_nothing(seed in any::<u64>(), n_draws in 2usize..30) {
        let f = fixture(seed, n_draws, true);
        let (once, _) = relabel_chain(&f.chain, &f.data);
        let (twice, info) = relabel_chain(&once, &f.data);
        prop_assert_eq!(&once.draws, &twice.draws);
        prop_assert!(info.permutations.iter().all(|p| p.iter().enumerate().all(|(a, &b)| a == b)));
    }

    #[test]
    fn likelihood_and_components_are_preserved(seed in any::<u64>(), n_draws in 1usize..30) {
        let f = fixture(seed, n_draws, true);
        let (out, _) = relabel_chain(&f.chain, &f.data);
        for (before, after) in f.chain.draws.iter().zip(&out.draws) {
            let gap = (mixture_log_likelihood(before, &f.data) - mixture_log_likelihood(after, &f.data)).abs();
            prop_assert!(gap <= 1e-9, "log-likelihood moved by {}", gap);
            prop_assert_eq!(component_rows(before), component_rows(after));
            prop_assert_eq!(before.alpha.to_bits(), after.alpha.to_bits());
            prop_assert_eq!(&before.lambda1, &after.lambda1);
        }
    }

    #[test]
    fn shuffled_labels_are_restored(seed in any::<u64>(), n_draws in 2usize..30) {
        let f = fixture(seed, n_draws, true);
        let (out, _) = relabel_chain(&f.chain, &f.data);
        let first = &out.draws[0].assignments;
        prop_assert!(out.draws.iter().all(|d| &d.assignments == first));
        if f.any_switch {
            prop_assert!(trace_variance(&out) < trace_variance(&f.chain));
        }
    }

    #[test]
    fn aligned_chain_keeps_identity(seed in any::<u64>(), n_draws in 1usize..30) {
        let f = fixture(seed, n_draws, false);
        let (out, info) = relabel_chain(&f.chain, &f.data);
        prop_assert!(info.permutations.iter().all(|p| p.iter().enumerate().all(|(a, &b)| a == b)));
        prop_assert_eq!(&out.draws, &f.chain.draws);
    }
}

#[test]
fn empty_chain_relabels_to_empty() {
    let mut f = fixture(1, 3, true);
    f.chain.draws.clear();
    let (out, info) = relabel_chain(&f.chain, &f.data);
    assert!(out.draws.is_empty());
    assert!(out.relabeled);
    assert!(info.converged);
}
