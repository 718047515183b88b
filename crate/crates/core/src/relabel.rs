//! Post-hoc label-switching correction.
//!
//! Each retained draw is permuted to agree as closely as possible with a
//! reference labeling. The reference holds, for every sample, the probability
//! of each label, and the cost of a draw is the squared gap between its
//! one-hot allocations and those probabilities. The reference starts at the
//! draw with the highest mixture log-likelihood and is then replaced by the
//! mean allocations of the permuted draws until the labels stop changing.
//!
//! Components hold no samples in many draws, so the allocations leave their
//! labels free. A small squared distance over `(β_j, σ_j²)`, weighted by
//! `1 + n_j`, settles those ties.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::model::{inverse_stick_breaking, ChainState, Dataset, PosteriorChain};
use crate::sampler::mixture_log_likelihood;

/// Above this many components the assignment is solved greedily.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 64;
pub const MAX_OUTER_ITERATIONS: usize = 100;
/// Scale of the parameter distance relative to one mismatched allocation.
pub const PARAMETER_TIE_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relabeling {
    /// `permutations[d][new] = old`: component `old` of draw `d` became `new`.
    pub permutations: Vec<Vec<usize>>,
    /// Final alignment target for the coefficients, `J × p`.
    pub reference: Matrix,
    pub reference_sigma2: Vec<f64>,
    /// Final label probabilities per sample, `n × J`.
    pub allocation: Matrix,
    /// Alignment cost of each draw against the final reference.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Reference {
    beta: Matrix,
    sigma2: Vec<f64>,
    allocation: Matrix,
    /// Squared norm of each allocation row.
    norms: Vec<f64>,
}

impl Reference {
    fn new(beta: Matrix, sigma2: Vec<f64>, allocation: Matrix) -> Self {
        let norms = (0..allocation.rows()).map(|i| allocation.row(i).iter().map(|v| v * v).sum()).collect();
        Reference { beta, sigma2, allocation, norms }
    }

    fn from_draw(draw: &ChainState) -> Self {
        let j = draw.n_components();
        let mut allocation = Matrix::zeros(draw.assignments.len(), j);
        for (i, &z) in draw.assignments.iter().enumerate() {
            allocation.row_mut(i)[z] = 1.0;
        }
        Reference::new(draw.beta.clone(), draw.sigma2.clone(), allocation)
    }
}

/// Align component labels across draws. A chain that is already relabeled
/// starts from its own mean as the reference, so relabeling is idempotent.
pub fn relabel_chain(chain: &PosteriorChain, data: &Dataset) -> (PosteriorChain, Relabeling) {
    let j = chain.hyper.truncation;
    let p = chain.n_features;
    let mut out = chain.clone();
    out.relabeled = true;
    if chain.draws.is_empty() {
        let relabeling = Relabeling {
            permutations: Vec::new(),
            reference: Matrix::zeros(j, p),
            reference_sigma2: vec![0.0; j],
            allocation: Matrix::zeros(chain.n_samples, j),
            cost_trace: Vec::new(),
            iterations: 0,
            converged: true,
        };
        return (out, relabeling);
    }

    let identity: Vec<Vec<usize>> = vec![(0..j).collect(); chain.draws.len()];
    let mut reference = if chain.relabeled {
        mean_reference(&chain.draws, &identity)
    } else {
        let best = chain
            .draws
            .iter()
            .map(|d| mixture_log_likelihood(d, data))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, ll)| if ll > acc.1 { (i, ll) } else { acc });
        Reference::from_draw(&chain.draws[best.0])
    };

    let mut previous: Option<(Vec<Vec<usize>>, f64)> = None;
    if chain.relabeled {
        previous = Some((identity.clone(), total_cost(&chain.draws, &identity, &reference)));
    }
    let mut perms = identity;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_OUTER_ITERATIONS {
        iterations += 1;
        let candidate: Vec<Vec<usize>> = chain.draws.iter().map(|d| best_permutation(d, &reference)).collect();
        let total = total_cost(&chain.draws, &candidate, &reference);
        if let Some((prev_perms, prev_total)) = &previous {
            // Labels of empty components are not identified by the data and may
            // keep drifting; only the occupied ones have to settle.
            if same_occupied_labels(&chain.draws, prev_perms, &candidate) || total >= *prev_total - 1e-12 * prev_total.abs() {
                converged = true;
                break;
            }
        }
        log::debug!("relabel iteration {iterations}: cost {total}");
        perms = candidate;
        reference = mean_reference(&chain.draws, &perms);
        previous = Some((perms.clone(), total_cost(&chain.draws, &perms, &reference)));
    }
    if !converged {
        warn!("relabeling did not converge after {MAX_OUTER_ITERATIONS} iterations; keeping the last labeling");
    }

    out.draws = chain.draws.iter().zip(&perms).map(|(d, perm)| permute_state(d, perm)).collect();
    let cost_trace = chain.draws.iter().zip(&perms).map(|(d, perm)| draw_cost(d, perm, &reference)).collect();
    let relabeling = Relabeling {
        permutations: perms,
        reference: reference.beta,
        reference_sigma2: reference.sigma2,
        allocation: reference.allocation,
        cost_trace,
        iterations,
        converged,
    };
    (out, relabeling)
}

/// `cost[new * J + old]` of sending component `old` of the draw to label `new`.
fn cost_matrix(draw: &ChainState, reference: &Reference) -> Vec<f64> {
    let j = draw.n_components();
    let weight = component_weights(draw);
    let mut cost = vec![0.0; j * j];
    for (i, &old) in draw.assignments.iter().enumerate() {
        let probs = reference.allocation.row(i);
        let norm = reference.norms[i];
        for (new, &prob) in probs.iter().enumerate() {
            cost[new * j + old] += 1.0 - 2.0 * prob + norm;
        }
    }
    for new in 0..j {
        for old in 0..j {
            let beta_gap: f64 = draw
                .beta
                .row(old)
                .iter()
                .zip(reference.beta.row(new))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let s_gap = draw.sigma2[old] - reference.sigma2[new];
            cost[new * j + old] += PARAMETER_TIE_WEIGHT * weight[old] * (beta_gap + s_gap * s_gap);
        }
    }
    cost
}

fn same_occupied_labels(draws: &[ChainState], a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    draws.iter().zip(a.iter().zip(b)).all(|(d, (pa, pb))| {
        let occ = d.occupancy();
        pa.iter().zip(pb).all(|(&oa, &ob)| oa == ob || (occ[oa] == 0 && occ[ob] == 0))
    })
}

fn draw_cost(draw: &ChainState, perm: &[usize], reference: &Reference) -> f64 {
    let j = perm.len();
    let cost = cost_matrix(draw, reference);
    perm.iter().enumerate().map(|(new, &old)| cost[new * j + old]).sum()
}

fn total_cost(draws: &[ChainState], perms: &[Vec<usize>], reference: &Reference) -> f64 {
    draws.iter().zip(perms).map(|(d, p)| draw_cost(d, p, reference)).sum()
}

fn best_permutation(draw: &ChainState, reference: &Reference) -> Vec<usize> {
    let j = draw.n_components();
    let cost = cost_matrix(draw, reference);
    if j <= EXACT_ASSIGNMENT_LIMIT {
        min_cost_assignment(&cost, j)
    } else {
        greedy_assignment(&cost, j)
    }
}

fn component_weights(draw: &ChainState) -> Vec<f64> {
    draw.occupancy().iter().map(|&c| 1.0 + c as f64).collect()
}

fn mean_reference(draws: &[ChainState], perms: &[Vec<usize>]) -> Reference {
    let j = draws[0].n_components();
    let p = draws[0].n_features();
    let n = draws[0].assignments.len();
    let mut beta = Matrix::zeros(j, p);
    let mut sigma2 = vec![0.0; j];
    let mut total = vec![0.0; j];
    let mut allocation = Matrix::zeros(n, j);
    let mut inverse = vec![0; j];
    for (d, perm) in draws.iter().zip(perms) {
        let weight = component_weights(d);
        for (new, &old) in perm.iter().enumerate() {
            let w = weight[old];
            for (acc, v) in beta.row_mut(new).iter_mut().zip(d.beta.row(old)) {
                *acc += w * v;
            }
            sigma2[new] += w * d.sigma2[old];
            total[new] += w;
            inverse[old] = new;
        }
        for (i, &z) in d.assignments.iter().enumerate() {
            allocation.row_mut(i)[inverse[z]] += 1.0;
        }
    }
    for new in 0..j {
        for v in beta.row_mut(new) {
            *v /= total[new];
        }
        sigma2[new] /= total[new];
    }
    let scale = 1.0 / draws.len() as f64;
    for i in 0..n {
        for v in allocation.row_mut(i) {
            *v *= scale;
        }
    }
    Reference::new(beta, sigma2, allocation)
}

/// Apply `perm[new] = old` to every component-indexed quantity of a draw.
pub fn permute_state(state: &ChainState, perm: &[usize]) -> ChainState {
    let j = perm.len();
    let mut inverse = vec![0; j];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let weights: Vec<f64> = perm.iter().map(|&o| state.weights[o]).collect();
    ChainState {
        sticks: inverse_stick_breaking(&weights),
        weights,
        alpha: state.alpha,
        beta: state.beta.permute_rows(perm),
        sigma2: perm.iter().map(|&o| state.sigma2[o]).collect(),
        tau: state.tau.permute_rows(perm),
        assignments: state.assignments.iter().map(|&z| inverse[z]).collect(),
        net_of: perm.iter().map(|&o| state.net_of[o]).collect(),
        net_weights: state.net_weights.clone(),
        lambda1: state.lambda1.clone(),
        lambda2: state.lambda2.clone(),
    }
}

/// Exact minimum-cost perfect matching on a square cost matrix (Hungarian
/// method with potentials). Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    assignment
}

/// Repeatedly match the cheapest remaining (row, col) pair.
pub fn greedy_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).collect();
    pairs.sort_by(|a, b| cost[a.0 * n + a.1].total_cmp(&cost[b.0 * n + b.1]).then(a.cmp(b)));
    let mut assignment = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for (r, c) in pairs {
        if assignment[r] == usize::MAX && !col_used[c] {
            assignment[r] = c;
            col_used[c] = true;
        }
    }
    assignment
}
