//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use dpmen::explain::{
    energy_mask, fill_mask, fit_surrogate, global_patterns, local_explanation, rmse, rmse_of, Pattern, SurrogateModel,
};
use dpmen::linalg::Matrix;
use dpmen::model::{
    logit, logit_transform, ChainState, Dataset, Hyperparameters, PosteriorChain, ResponseKind, Standardization,
};
use dpmen::relabel::{permute_state, relabel_chain};
use dpmen::rngdist::RandomSource;
use dpmen::sampler::{beta_conditional, mixture_log_likelihood, update_alpha, update_beta, update_sticks, update_w, Sampler};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mixture_hyper() -> Hyperparameters {
    Hyperparameters { truncation: 10, n_nets: 2, n_iter: 4000, burn_in: 2000, ..Default::default() }
}

fn by_weight(model: &SurrogateModel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..model.n_components()).collect();
    order.sort_by(|&a, &b| model.pi_mean[b].total_cmp(&model.pi_mean[a]));
    order
}

fn max_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn synthetic_mixture_recovery() -> Outcome {
    let g = two_component(101);
    let data = g.dataset("mix");
    let start = Instant::now();
    let model = fit_surrogate(&data, &mixture_hyper(), 5).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let err = rmse(&model, &data).map_err(|e| e.to_string())?;
    let order = by_weight(&model);
    // each of the two heaviest components must sit on a distinct true β
    let mut gaps = Vec::new();
    let mut used = [false; 2];
    for &j in &order[..2] {
        let coef = model.coefficients(j);
        let (t, gap) = (0..2)
            .map(|t| (t, max_abs_gap(&coef, &MIXTURE_BETAS[t])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if used[t] {
            return Err(format!("components {:?} both match true β #{t}", &order[..2]));
        }
        used[t] = true;
        gaps.push(gap);
    }
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    check(
        err <= 0.12 && worst < 0.1 && secs < 300.0,
        format!("rmse = {err:.4} (<= 0.12), max |β̄ - β| = {worst:.4} (< 0.1), fit took {secs:.1}s (< 300s)"),
    )
}

fn grouping_effect() -> Outcome {
    let g = duplicated_columns(202, 500);
    let data = g.dataset("dup");
    let hyper = Hyperparameters { truncation: 5, n_nets: 2, n_iter: 3000, burn_in: 1500, ..Default::default() };
    let model = fit_surrogate(&data, &hyper, 9).map_err(|e| e.to_string())?;
    let dominant = by_weight(&model)[0];
    let coef = model.coefficients(dominant);
    let gap = |b: &[f64]| (b[0] - b[1]).abs() / ((b[0].abs() + b[1].abs()) / 2.0);
    let ours = gap(&coef);
    let n = g.rows.len() as f64;
    let lambda_max = (0..5).map(|j| g.rows.iter().zip(&g.y).map(|(r, y)| r[j] * y).sum::<f64>().abs() / n).fold(0.0, f64::max);
    let oracle = lasso(&g.rows, &g.y, 0.05 * lambda_max, 500);
    let theirs = gap(&oracle);
    check(
        ours < 0.2 && theirs > 0.5,
        format!(
            "surrogate gap = {ours:.4} (< 0.2) with β̄ = ({:.3}, {:.3}); lasso gap = {theirs:.4} (> 0.5) with b = ({:.3}, {:.3})",
            coef[0], coef[1], oracle[0], oracle[1]
        ),
    )
}

fn geweke_prior_recovery() -> Outcome {
    let hyper = Hyperparameters {
        truncation: 2,
        n_nets: 1,
        alpha_shape: 2.0,
        alpha_rate: 1.0,
        sigma2_shape: 2.0,
        sigma2_rate: 0.5,
        lambda1_shape: 2.0,
        lambda2_shape: 2.0,
        lambda_v: 1.0,
        n_iter: 1,
        burn_in: 0,
        ..Default::default()
    };
    let (n, p, reps) = (20, 2, 5000);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let (mut alpha, mut sigma2, mut lambda1) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..reps {
        let mut src = RandomSource::with_stream(303, r as u64);
        let mut state = ChainState::from_prior(&hyper, n, p, &mut src).map_err(|e| e.to_string())?;
        let y: Vec<f64> = rows
            .iter()
            .zip(&state.assignments)
            .map(|(x, &z)| dot(x, state.beta.row(z)) + state.sigma2[z].sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let data = Dataset::from_rows(&rows, y, "g", ResponseKind::RawScore).unwrap();
        let mut sampler = Sampler::new(&data, &hyper, src);
        sampler.sweep(&mut state, 0).map_err(|e| format!("replicate {r}: {e}"))?;
        alpha.push(state.alpha);
        sigma2.push(state.sigma2[0]);
        lambda1.push(state.lambda1[0]);
    }
    let pa = ks_p_value(ks_statistic(&alpha, |x| gamma2_cdf(x, 1.0)), reps);
    let ps = ks_p_value(ks_statistic(&sigma2, |x| inv_gamma2_cdf(x, 0.5)), reps);
    let pl = ks_p_value(ks_statistic(&lambda1, |x| gamma2_cdf(x, 0.5)), reps);
    check(
        pa > 0.01 && ps > 0.01 && pl > 0.01,
        format!("KS p-values after one sweep: α {pa:.3}, σ₁² {ps:.3}, λ₁₁ {pl:.3} (all > 0.01, {reps} replicates)"),
    )
}

fn conjugate_blocks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (n, p) = (12, 3);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] - 0.5 * r[2] + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_rows(&rows, y.clone(), "c", ResponseKind::RawScore).unwrap();
    let hyper = Hyperparameters { truncation: 4, n_nets: 3, ..Default::default() };
    let mut state = ChainState::from_prior(&hyper, n, p, &mut RandomSource::new(404)).unwrap();
    state.assignments = (0..n).map(|i| [0, 0, 1, 2, 0, 1][i % 6]).collect();
    state.sigma2 = vec![0.3, 1.7, 0.9, 2.0];
    state.net_of = vec![0, 2, 2, 1];
    state.lambda2 = vec![0.8, 2.5, 1.1];
    state.tau = Matrix::from_rows(&[vec![0.2, 0.5, 0.9], vec![0.1, 0.3, 0.6], vec![0.7, 0.4, 0.05], vec![0.5, 0.5, 0.5]]).unwrap();
    state.alpha = 1.3;

    // Gaussian block against an independent linear-algebra oracle
    let mut beta_gap: f64 = 0.0;
    let mut oracle = Vec::new();
    for j in 0..4 {
        let mine: Vec<usize> = (0..n).filter(|&i| state.assignments[i] == j).collect();
        let x = DMatrix::from_fn(mine.len(), p, |r, c| rows[mine[r]][c]);
        let yj = DVector::from_iterator(mine.len(), mine.iter().map(|&i| y[i]));
        let l2 = state.lambda2[state.net_of[j]];
        let s2 = state.sigma2[j];
        let prior = DMatrix::from_diagonal(&DVector::from_fn(p, |l, _| l2 / (1.0 - state.tau.get(j, l))));
        let precision = (x.transpose() * &x + prior) / s2;
        let cov = precision.clone().try_inverse().unwrap();
        let mean = &cov * (x.transpose() * yj) / s2;
        let (prec, m) = beta_conditional(&state, &data, j).map_err(|e| e.to_string())?;
        for a in 0..p {
            beta_gap = beta_gap.max((m[a] - mean[a]).abs());
            for b in 0..p {
                beta_gap = beta_gap.max((prec[a * p + b] - precision[(a, b)]).abs());
            }
        }
        oracle.push((mean, cov));
    }

    let draws = 20_000;
    let mut src = RandomSource::new(405);
    let mut fails = Vec::new();
    let mut within = |name: String, samples: &[f64], mean: f64, sd: f64| {
        let avg = samples.iter().sum::<f64>() / samples.len() as f64;
        let tol = 3.0 * sd / (samples.len() as f64).sqrt();
        if (avg - mean).abs() > tol {
            fails.push(format!("{name}: {avg:.5} vs {mean:.5} ± {tol:.5}"));
        }
    };

    let mut beta_draws: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); p]; 4];
    let mut s = state.clone();
    for _ in 0..draws {
        update_beta(&mut s, &data, &mut src).map_err(|e| e.to_string())?;
        for (j, rows) in beta_draws.iter_mut().enumerate() {
            for (l, trace) in rows.iter_mut().enumerate() {
                trace.push(s.beta.get(j, l));
            }
        }
    }
    for (j, rows) in beta_draws.iter().enumerate() {
        for (l, trace) in rows.iter().enumerate() {
            within(format!("β[{j},{l}]"), trace, oracle[j].0[l], oracle[j].1[(l, l)].sqrt());
        }
    }

    let counts = state.occupancy();
    let mut stick_draws: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut s = state.clone();
    for _ in 0..draws {
        update_sticks(&mut s, &mut src).map_err(|e| e.to_string())?;
        for (trace, &u) in stick_draws.iter_mut().zip(&s.sticks) {
            trace.push(u);
        }
    }
    for j in 0..3 {
        let a = 1.0 + counts[j] as f64;
        let b = state.alpha + counts[j + 1..].iter().sum::<usize>() as f64;
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        within(format!("u[{j}]"), &stick_draws[j], a / (a + b), var.sqrt());
    }

    let mut s = state.clone();
    s.sticks = vec![0.4, 0.25, 0.6];
    let shape = hyper.alpha_shape + 3.0;
    let rate = hyper.alpha_rate - s.sticks.iter().map(|u: &f64| (1.0 - u).ln()).sum::<f64>();
    let alpha_draws: Vec<f64> = (0..draws)
        .map(|_| {
            update_alpha(&mut s, &hyper, &mut src).unwrap();
            s.alpha
        })
        .collect();
    within("α".into(), &alpha_draws, shape / rate, shape.sqrt() / rate);

    let mut s = state.clone();
    let mut w_draws: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for _ in 0..draws {
        update_w(&mut s, &mut src).map_err(|e| e.to_string())?;
        for (trace, &w) in w_draws.iter_mut().zip(&s.net_weights) {
            trace.push(w);
        }
    }
    let conc: Vec<f64> = (0..3).map(|k| 1.0 / 3.0 + state.net_of.iter().filter(|&&c| c == k).count() as f64).collect();
    let total: f64 = conc.iter().sum();
    for k in 0..3 {
        let m = conc[k] / total;
        within(format!("w[{k}]"), &w_draws[k], m, (m * (1.0 - m) / (total + 1.0)).sqrt());
    }

    check(
        beta_gap < 1e-8 && fails.is_empty(),
        format!(
            "β conditional max gap = {beta_gap:.2e} (< 1e-8); Monte Carlo moments {}",
            if fails.is_empty() { "within 3σ for β, u, α, w".to_string() } else { fails.join("; ") }
        ),
    )
}

fn relabel_inversion() -> Outcome {
    let betas = [vec![3.0, 0.0], vec![0.0, -3.0], vec![-2.0, 2.0]];
    let (n, nd) = (90, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let z: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let y: Vec<f64> = rows.iter().zip(&z).map(|(x, &k)| dot(x, &betas[k]) + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_rows(&rows, y, "r", ResponseKind::RawScore).unwrap();
    let hyper = Hyperparameters { truncation: 3, n_nets: 1, n_iter: nd, burn_in: 0, ..Default::default() };
    let template = ChainState::from_prior(&hyper, n, 2, &mut RandomSource::new(505)).unwrap();
    let jitter = |rng: &mut ChaCha8Rng| 0.02 * rng.sample::<f64, _>(StandardNormal);
    let aligned: Vec<ChainState> = (0..nd)
        .map(|_| {
            let mut s = template.clone();
            s.assignments = z.clone();
            s.weights = vec![0.3 + jitter(&mut rng), 0.34, 0.0];
            s.weights[2] = 1.0 - s.weights[0] - s.weights[1];
            s.sticks = dpmen::model::inverse_stick_breaking(&s.weights);
            s.beta = Matrix::from_rows(&betas.iter().map(|b| b.iter().map(|v| v + jitter(&mut rng)).collect()).collect::<Vec<_>>())
                .unwrap();
            s.sigma2 = (0..3).map(|_| 0.01 * (1.0 + jitter(&mut rng))).collect();
            s
        })
        .collect();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let scrambled: Vec<ChainState> = aligned
        .iter()
        .map(|s| permute_state(s, &perms[rng.random_range(0..perms.len())]))
        .collect();
    let chain = PosteriorChain {
        draws: scrambled,
        hyper,
        relabeled: false,
        seed: 505,
        class_id: "r".into(),
        n_samples: n,
        n_features: 2,
        n_chains: 1,
    };
    let (out, _) = relabel_chain(&chain, &data);
    // labels are identified up to one permutation shared by every draw
    let global: Vec<usize> = (0..3)
        .map(|new| (0..3).find(|&old| out.draws[0].beta.row(new) == aligned[0].beta.row(old)).unwrap_or(usize::MAX))
        .collect();
    if global.contains(&usize::MAX) {
        return Err("first draw's coefficients were altered".into());
    }
    let mut mismatched = 0;
    let mut ll_gap: f64 = 0.0;
    for (o, a) in out.draws.iter().zip(&aligned) {
        let expect = permute_state(a, &global);
        if o.beta != expect.beta || o.sigma2 != expect.sigma2 || o.assignments != expect.assignments || o.weights != expect.weights {
            mismatched += 1;
        }
        ll_gap = ll_gap.max((mixture_log_likelihood(o, &data) - mixture_log_likelihood(a, &data)).abs());
    }
    check(
        mismatched == 0 && ll_gap <= 1e-9,
        format!("{mismatched} of {nd} draws not restored; max log-likelihood change = {ll_gap:.2e} (<= 1e-9)"),
    )
}

fn fit_piecewise() -> Result<(Generated, Dataset, SurrogateModel), String> {
    let g = piecewise(606);
    let data = g.dataset("pw");
    let model = fit_surrogate(&data, &mixture_hyper(), 13).map_err(|e| e.to_string())?;
    Ok((g, data, model))
}

fn explanation_fidelity(fit: &(Generated, Dataset, SurrogateModel)) -> Outcome {
    let (g, _, model) = fit;
    let mut hits = 0;
    for ((x, &y), &r) in g.rows.iter().zip(&g.y).zip(&g.regime) {
        let e = local_explanation(model, x, 3, Some(y)).map_err(|e| e.to_string())?;
        let mut got: Vec<usize> = e.ranked_features.iter().map(|f| f.index).collect();
        got.sort_unstable();
        if got == PIECEWISE_SUPPORTS[r] {
            hits += 1;
        }
    }
    let share = hits as f64 / g.rows.len() as f64;
    let patterns = global_patterns(model, 3).map_err(|e| e.to_string())?;
    let mut supports: Vec<Vec<usize>> = patterns
        .iter()
        .map(|p| {
            let mut s = p.support.clone();
            s.sort_unstable();
            s
        })
        .collect();
    supports.sort();
    let expected: Vec<Vec<usize>> = PIECEWISE_SUPPORTS.iter().map(|s| s.to_vec()).collect();
    check(
        share >= 0.9 && supports == expected,
        format!("local top-3 recovers the generating support for {:.1}% (>= 90%); pattern supports {supports:?}", 100.0 * share),
    )
}

fn surrogate_beats_global_line(fit: &(Generated, Dataset, SurrogateModel)) -> Outcome {
    let (g, data, model) = fit;
    let ours = rmse(model, data).map_err(|e| e.to_string())?;
    let coef = least_squares(&g.rows, &g.y, true);
    let preds: Vec<f64> = g.rows.iter().map(|x| ls_predict(&coef, x)).collect();
    let line = common::rmse(&preds, &g.y);
    check(ours < 0.5 * line, format!("surrogate rmse = {ours:.4}, least-squares rmse = {line:.4}, ratio {:.3} (< 0.5)", ours / line))
}

fn pathological_mask() -> Outcome {
    let p = 12;
    let mut beta = vec![0.05; p];
    for (l, v) in [(2, 3.0), (5, -2.5), (9, 2.0)] {
        beta[l] = v;
    }
    let model = SurrogateModel {
        class_id: "m".into(),
        beta_mean: Matrix::from_rows(&[beta.clone()]).unwrap(),
        sigma2_mean: vec![0.01],
        pi_mean: vec![1.0],
        occupancy: vec![100.0],
        standardization: Standardization::identity(p),
        feature_names: None,
        response_kind: ResponseKind::RawScore,
        n_samples: 100,
        chain: None,
    };
    let pattern: Pattern = global_patterns(&model, 3).map_err(|e| e.to_string())?.remove(0);
    let threshold = 0.5;
    let mask = energy_mask(&pattern, threshold);
    let complement: Vec<bool> = mask.iter().map(|m| !m).collect();
    let mut src = RandomSource::new(808);
    let range = (-1.0, 1.0);
    let everywhere = vec![true; p];
    let mut contract_ok = true;
    let (mut on, mut off) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let base = fill_mask(&vec![0.0; p], &everywhere, range, &mut src).map_err(|e| e.to_string())?;
        let base_pred = model.predict(&base).unwrap();
        let crafted = dpmen::explain::craft_pathological(&pattern, &base, threshold, range, &mut src).map_err(|e| e.to_string())?;
        contract_ok &= crafted
            .iter()
            .zip(&base)
            .zip(&mask)
            .all(|((c, b), &m)| if m { c != b } else { c.to_bits() == b.to_bits() });
        on.push((model.predict(&crafted).unwrap() - base_pred).abs());
        let control = fill_mask(&base, &complement, range, &mut src).map_err(|e| e.to_string())?;
        off.push((model.predict(&control).unwrap() - base_pred).abs());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[49] + v[50]) / 2.0
    };
    let (m_on, m_off) = (median(&mut on), median(&mut off));
    check(
        contract_ok && m_on >= 10.0 * m_off,
        format!(
            "mask contract {}; median prediction change on-support {m_on:.4} vs off-support {m_off:.4} (ratio {:.1}, >= 10)",
            if contract_ok { "holds" } else { "violated" },
            m_on / m_off
        ),
    )
}

fn cli_pipeline(dir: &Path, data: &Path) -> Result<(), String> {
    let exe = env!("CARGO_BIN_EXE_dpmen");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let d = |s: &str| dir.join(s).display().to_string();
    let features = data.join("features.csv").display().to_string();
    let responses = data.join("responses.csv").display().to_string();
    run(&[
        "--quiet", "--seed", "17", "fit", "--features", &features, "--responses", &responses, "--out", &d("fit"),
        "--truncation", "6", "--nets", "2", "--iterations", "600", "--burn-in", "300", "--chains", "2",
    ])?;
    run(&[
        "--quiet", "explain", "--model", &d("fit/target/model.json"), "--features", &features, "--responses", &responses,
        "--rows", "0,1,2,3,4", "--top-k", "3", "--out", &d("explanations.json"),
    ])
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let g = two_component(909);
    let names: Vec<String> = (0..5).map(|c| format!("x{c}")).collect();
    dpmen::io::write_matrix_csv(&data.join("features.csv"), Some(&names), &g.rows).unwrap();
    let y: Vec<Vec<f64>> = g.y.iter().map(|&v| vec![v]).collect();
    dpmen::io::write_matrix_csv(&data.join("responses.csv"), Some(&["target".to_string()]), &y).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cli_pipeline(&a, &data)?;
    cli_pipeline(&b, &data)?;
    let files = [
        "fit/target/chain_0.bin",
        "fit/target/chain_1.bin",
        "fit/target/chain.bin",
        "fit/target/model.json",
        "fit/target/diagnostics_0.csv",
        "explanations.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() || !a.join(f).exists())
        .collect();
    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", files.len())
        } else {
            format!("differing or missing: {differing:?}")
        },
    )
}

fn logit_and_rmse_identities() -> Outcome {
    let d = Dataset::from_rows(&[vec![1.0]], vec![0.5], "l", ResponseKind::Probability).unwrap();
    let transformed = logit_transform(&d).map_err(|e| e.to_string())?.y()[0];
    let perfect = rmse_of(&[0.3, -1.0, 2.5], &[0.3, -1.0, 2.5]);
    let unit = rmse_of(&[1.0, -1.0, 1.0], &[0.0, 0.0, 0.0]);
    check(
        logit(0.5) == 0.0 && transformed == 0.0 && perfect == 0.0 && unit == 1.0,
        format!("logit(0.5) = {}, rmse(perfect) = {perfect}, rmse(1, -1, 1) = {unit}", logit(0.5)),
    )
}

fn main() {
    let piecewise_fit = fit_piecewise();
    let with_fit = |f: fn(&(Generated, Dataset, SurrogateModel)) -> Outcome| -> Outcome {
        match &piecewise_fit {
            Ok(fit) => f(fit),
            Err(e) => Err(format!("piecewise fit failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("1 synthetic mixture recovery", synthetic_mixture_recovery()),
        ("2 grouping effect", grouping_effect()),
        ("3 sampler prior recovery", geweke_prior_recovery()),
        ("4 conjugate blocks", conjugate_blocks()),
        ("5 relabeling inversion", relabel_inversion()),
        ("6 explanation fidelity", with_fit(explanation_fidelity)),
        ("7 surrogate vs global line", with_fit(surrogate_beats_global_line)),
        ("8 pathological mask", pathological_mask()),
        ("9 end-to-end determinism", end_to_end_determinism()),
        ("10 logit and rmse identities", logit_and_rmse_identities()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
