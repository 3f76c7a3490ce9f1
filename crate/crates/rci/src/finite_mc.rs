//! Finite-size Monte Carlo simulator for the RCI precoder.
//!
//! Draws i.i.d. circularly-symmetric complex Gaussian channels, normalizes
//! the precoder to the transmit power budget and evaluates every user's
//! SINR from channel quantities alone (no symbol-level simulation). Noise
//! power is fixed to one; the SNR enters through `P_d`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{RciError, Result};
use crate::scenario::Scenario;

/// Evaluation cap for the finite-size power grid search.
const GRID_EVAL_CAP: usize = 2_000_000;

/// One random channel draw for `K` users and `N` antennas.
#[derive(Debug, Clone)]
pub struct ChannelBatch {
    pub n_antennas: usize,
    pub n_users: usize,
    /// Group index of each user, non-decreasing.
    pub group_of_user: Vec<usize>,
    /// `K x N` channel matrix, unit-variance entries.
    pub matrix: DMatrix<Complex64>,
    pub seed: u64,
    pub trial_index: u64,
}

/// Per-realization SINR report.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteSinrReport {
    pub sinr: Vec<f64>,
    pub c_sq: f64,
    /// `(1/N) sum_k ln(1 + SINR_k)` (nats per antenna).
    pub sum_rate: f64,
    pub per_group_mean_sinr: Vec<f64>,
}

/// Aggregate of a trial batch.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub mean_rate: f64,
    pub std_error: f64,
    pub per_trial_rate: Vec<f64>,
}

/// Users per group via largest-remainder rounding of `beta_j * N`, so the
/// totals sum exactly to `round(beta * N)`.
pub fn group_sizes(n_antennas: usize, scenario: &Scenario) -> Result<Vec<usize>> {
    let n = n_antennas as f64;
    let total = (scenario.beta_total() * n).round() as usize;
    let quotas: Vec<f64> = scenario.loading().iter().map(|&b| b * n).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|&q| q.floor() as usize).collect();
    let mut assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    let mut cursor = 0;
    while assigned < total {
        let idx = order[cursor % order.len()];
        sizes[idx] += 1;
        assigned += 1;
        cursor += 1;
    }
    for (j, (&k, &b)) in sizes.iter().zip(scenario.loading()).enumerate() {
        if b > 0.0 && k == 0 {
            return Err(RciError::Domain(format!(
                "group {j} with loading {b} rounds to zero users at N={n_antennas}"
            )));
        }
    }
    Ok(sizes)
}

/// Draws the `(seed, trial)` channel realization; deterministic per pair.
pub fn sample_channel(
    n_antennas: usize,
    scenario: &Scenario,
    seed: u64,
    trial: u64,
) -> Result<ChannelBatch> {
    if n_antennas == 0 {
        return Err(RciError::Domain("need at least one antenna".into()));
    }
    let sizes = group_sizes(n_antennas, scenario)?;
    let n_users: usize = sizes.iter().sum();
    let mut group_of_user = Vec::with_capacity(n_users);
    for (g, &k) in sizes.iter().enumerate() {
        group_of_user.extend(std::iter::repeat(g).take(k));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let matrix = DMatrix::from_fn(n_users, n_antennas, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });

    Ok(ChannelBatch {
        n_antennas,
        n_users,
        group_of_user,
        matrix,
        seed,
        trial_index: trial,
    })
}

/// Cross-gain matrix `G = H (H^H H + alpha I)^{-1} H^H` together with the
/// squared column norms of `(H^H H + alpha I)^{-1} H^H`, shared by the SINR
/// evaluation and the power grid search.
struct PrecoderGains {
    cross_sq: DMatrix<f64>,
    w_col_norm_sq: Vec<f64>,
}

fn precoder_gains(channel: &ChannelBatch, alpha: f64) -> Result<PrecoderGains> {
    let h = &channel.matrix;
    let n = channel.n_antennas;
    let mut reg = h.adjoint() * h;
    for i in 0..n {
        reg[(i, i)] += Complex64::new(alpha, 0.0);
    }
    let chol = reg
        .cholesky()
        .ok_or_else(|| RciError::Singular("H^H H + alpha I is not positive definite".into()))?;
    let w = chol.solve(&h.adjoint()); // N x K
    let g = h * &w; // K x K
    let cross_sq = g.map(|z| z.norm_sqr());
    let w_col_norm_sq = (0..channel.n_users)
        .map(|k| w.column(k).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    Ok(PrecoderGains {
        cross_sq,
        w_col_norm_sq,
    })
}

fn sinr_from_gains(
    gains: &PrecoderGains,
    channel: &ChannelBatch,
    scenario: &Scenario,
    p_user: &[f64],
) -> (Vec<f64>, f64) {
    let p_d = scenario.snr(); // sigma^2 = 1
    let trace: f64 = p_user
        .iter()
        .zip(&gains.w_col_norm_sq)
        .map(|(&p, &w)| p * w)
        .sum();
    let c_sq = p_d / trace;
    let k_users = channel.n_users;
    let sinr = (0..k_users)
        .map(|k| {
            let a2 = scenario.path_gain_sq()[channel.group_of_user[k]];
            let row = gains.cross_sq.row(k);
            let mut interference = 0.0;
            for j in 0..k_users {
                if j != k {
                    interference += p_user[j] * row[j];
                }
            }
            c_sq * a2 * p_user[k] * row[k] / (c_sq * a2 * interference + 1.0)
        })
        .collect();
    (sinr, c_sq)
}

fn report_from_sinr(channel: &ChannelBatch, scenario: &Scenario, sinr: Vec<f64>, c_sq: f64) -> FiniteSinrReport {
    let sum_rate = sinr.iter().map(|&s| (1.0 + s).ln()).sum::<f64>() / channel.n_antennas as f64;
    let l = scenario.num_groups();
    let mut acc = vec![0.0; l];
    let mut cnt = vec![0usize; l];
    for (k, &s) in sinr.iter().enumerate() {
        let g = channel.group_of_user[k];
        acc[g] += s;
        cnt[g] += 1;
    }
    let per_group_mean_sinr = acc
        .iter()
        .zip(&cnt)
        .map(|(&a, &c)| if c > 0 { a / c as f64 } else { 0.0 })
        .collect();
    FiniteSinrReport {
        sinr,
        c_sq,
        sum_rate,
        per_group_mean_sinr,
    }
}

fn per_user_powers(channel: &ChannelBatch, p_bar_per_group: &[f64]) -> Vec<f64> {
    channel
        .group_of_user
        .iter()
        .map(|&g| p_bar_per_group[g])
        .collect()
}

/// Per-user SINRs for one realization with group powers `p_bar_per_group`
/// and normalized regularization `rho` (`alpha = N rho`).
pub fn finite_sinr(
    channel: &ChannelBatch,
    p_bar_per_group: &[f64],
    rho: f64,
    scenario: &Scenario,
) -> Result<FiniteSinrReport> {
    if !(rho > 0.0) {
        return Err(RciError::Domain(format!("rho must be positive, got {rho}")));
    }
    if p_bar_per_group.len() != scenario.num_groups() {
        return Err(RciError::Domain("power vector length mismatch".into()));
    }
    let alpha = channel.n_antennas as f64 * rho;
    let gains = precoder_gains(channel, alpha)?;
    let p_user = per_user_powers(channel, p_bar_per_group);
    let (sinr, c_sq) = sinr_from_gains(&gains, channel, scenario, &p_user);
    Ok(report_from_sinr(channel, scenario, sinr, c_sq))
}

/// Mean empirical sum rate and its standard error over `n_trials`
/// independent realizations. Trials run in parallel but accumulate in trial
/// order, so the output is identical for any worker count.
pub fn mc_expected_sum_rate(
    scenario: &Scenario,
    n_antennas: usize,
    p_bar: &[f64],
    rho: f64,
    n_trials: usize,
    seed: u64,
) -> Result<McSummary> {
    if n_trials == 0 {
        return Err(RciError::Domain("need at least one trial".into()));
    }
    let per_trial_rate: Vec<f64> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let channel = sample_channel(n_antennas, scenario, seed, t)?;
            Ok(finite_sinr(&channel, p_bar, rho, scenario)?.sum_rate)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(per_trial_rate))
}

fn summarize(per_trial_rate: Vec<f64>) -> McSummary {
    let n = per_trial_rate.len() as f64;
    let mean_rate = per_trial_rate.iter().sum::<f64>() / n;
    let var = if per_trial_rate.len() > 1 {
        per_trial_rate
            .iter()
            .map(|r| (r - mean_rate) * (r - mean_rate))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    McSummary {
        mean_rate,
        std_error: (var / n).sqrt(),
        per_trial_rate,
    }
}

/// Exhaustive grid maximizer of this realization's sum rate over the
/// simplex `sum_j beta_j p_bar_j = beta`, `p_bar >= 0`. Only intended for
/// up to three loaded groups.
pub fn finite_opt_power_grid(
    channel: &ChannelBatch,
    scenario: &Scenario,
    rho: f64,
    grid_step: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(grid_step > 0.0) {
        return Err(RciError::Domain("grid_step must be positive".into()));
    }
    let loaded: Vec<usize> = (0..scenario.num_groups())
        .filter(|&j| scenario.loading()[j] > 0.0)
        .collect();
    if loaded.len() > 3 {
        return Err(RciError::Domain(format!(
            "grid search supports at most 3 loaded groups, got {}",
            loaded.len()
        )));
    }
    let beta = scenario.beta_total();
    let betas = scenario.loading();
    let alpha = channel.n_antennas as f64 * rho;
    let gains = precoder_gains(channel, alpha)?;

    let steps_for = |j: usize| (beta / betas[j] / grid_step).floor() as usize + 1;
    let evals: usize = match loaded.len() {
        1 => 1,
        2 => steps_for(loaded[0]),
        _ => steps_for(loaded[0]) * steps_for(loaded[1]),
    };
    if evals > GRID_EVAL_CAP {
        return Err(RciError::GridTooLarge(format!(
            "{evals} grid evaluations exceed the cap of {GRID_EVAL_CAP}"
        )));
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |p_group: Vec<f64>| {
        let p_user = per_user_powers(channel, &p_group);
        let (sinr, _) = sinr_from_gains(&gains, channel, scenario, &p_user);
        let rate =
            sinr.iter().map(|&s| (1.0 + s).ln()).sum::<f64>() / channel.n_antennas as f64;
        match &best {
            Some((_, r)) if *r >= rate => {}
            _ => best = Some((p_group, rate)),
        }
    };

    match loaded.len() {
        1 => {
            let mut p = vec![0.0; betas.len()];
            p[loaded[0]] = beta / betas[loaded[0]];
            consider(p);
        }
        2 => {
            let (a, b) = (loaded[0], loaded[1]);
            for i in 0..steps_for(a) {
                let pa = (i as f64 * grid_step).min(beta / betas[a]);
                let pb = (beta - betas[a] * pa) / betas[b];
                if pb < 0.0 {
                    break;
                }
                let mut p = vec![0.0; betas.len()];
                p[a] = pa;
                p[b] = pb;
                consider(p);
            }
        }
        _ => {
            let (a, b, c) = (loaded[0], loaded[1], loaded[2]);
            for i in 0..steps_for(a) {
                let pa = (i as f64 * grid_step).min(beta / betas[a]);
                let rem_a = beta - betas[a] * pa;
                if rem_a < 0.0 {
                    break;
                }
                for k in 0..steps_for(b) {
                    let pb = k as f64 * grid_step;
                    let pc = (rem_a - betas[b] * pb) / betas[c];
                    if pc < 0.0 {
                        break;
                    }
                    let mut p = vec![0.0; betas.len()];
                    p[a] = pa;
                    p[b] = pb;
                    p[c] = pc;
                    consider(p);
                }
            }
        }
    }
    best.ok_or_else(|| RciError::Infeasible("empty power grid".into()))
}

/// Per-SNR comparison of the large-system allocation against the
/// per-realization grid optimum.
#[derive(Debug, Clone, Serialize)]
pub struct LsFsComparison {
    pub mean_rate_ls: f64,
    pub mean_rate_fs: f64,
    pub std_error_ls: f64,
    pub std_error_fs: f64,
}

/// Runs `n_trials` realizations evaluating both the fixed large-system
/// power vector and the finite-size grid optimum on each.
pub fn mc_ls_vs_fs(
    scenario: &Scenario,
    n_antennas: usize,
    p_bar: &[f64],
    rho: f64,
    grid_step: f64,
    n_trials: usize,
    seed: u64,
) -> Result<LsFsComparison> {
    if n_trials == 0 {
        return Err(RciError::Domain("need at least one trial".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let channel = sample_channel(n_antennas, scenario, seed, t)?;
            let ls = finite_sinr(&channel, p_bar, rho, scenario)?.sum_rate;
            let (_, fs) = finite_opt_power_grid(&channel, scenario, rho, grid_step)?;
            Ok((ls, fs))
        })
        .collect::<Result<_>>()?;
    let ls = summarize(pairs.iter().map(|p| p.0).collect());
    let fs = summarize(pairs.iter().map(|p| p.1).collect());
    Ok(LsFsComparison {
        mean_rate_ls: ls.mean_rate,
        mean_rate_fs: fs.mean_rate,
        std_error_ls: ls.std_error,
        std_error_fs: fs.std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_group_scenario() -> Scenario {
        Scenario::new(vec![1.0, 0.25], vec![0.5, 0.5], 10.0).unwrap()
    }

    #[test]
    fn group_sizes_split_evenly() {
        let s = two_group_scenario();
        let sizes = group_sizes(8, &s).unwrap();
        assert_eq!(sizes, vec![4, 4]);
    }

    #[test]
    fn group_sizes_largest_remainder_exact_total() {
        let s = Scenario::new(vec![1.0, 0.5, 0.2], vec![0.4, 0.35, 0.25], 10.0).unwrap();
        let sizes = group_sizes(10, &s).unwrap();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert_eq!(sizes, vec![4, 4, 2]); // remainders 0, .5, .5 -> group 2 first
    }

    #[test]
    fn group_sizes_error_when_group_vanishes() {
        let s = Scenario::new(vec![1.0, 0.25], vec![0.96, 0.04], 10.0).unwrap();
        assert!(group_sizes(8, &s).is_err());
    }

    #[test]
    fn channel_is_deterministic_per_seed_trial() {
        let s = two_group_scenario();
        let a = sample_channel(8, &s, 42, 0).unwrap();
        let b = sample_channel(8, &s, 42, 0).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = sample_channel(8, &s, 42, 1).unwrap();
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn channel_entries_unit_variance() {
        let s = Scenario::new(vec![1.0], vec![1.0], 10.0).unwrap();
        let ch = sample_channel(320, &s, 7, 0).unwrap();
        let mean_sq: f64 =
            ch.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>() / ch.matrix.len() as f64;
        assert!((mean_sq - 1.0).abs() < 0.02, "mean |h|^2 = {mean_sq}");
    }

    #[test]
    fn scalar_system_reduces_by_hand() {
        // K = N = 1, h ~ anything: SINR must equal P_d / sigma^2 at rho = 1
        let s = Scenario::new(vec![1.0], vec![1.0], 10.0).unwrap();
        let mut ch = sample_channel(1, &s, 1, 0).unwrap();
        ch.matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        let report = finite_sinr(&ch, &[1.0], 1.0, &s).unwrap();
        assert_relative_eq!(report.c_sq, 4.0 * 10.0, max_relative = 1e-12);
        assert_relative_eq!(report.sinr[0], 10.0, max_relative = 1e-12);
    }

    #[test]
    fn power_normalization_identity() {
        let s = two_group_scenario();
        let ch = sample_channel(16, &s, 3, 0).unwrap();
        let rho = 0.2;
        let alpha = 16.0 * rho;
        let gains = precoder_gains(&ch, alpha).unwrap();
        let p_user = per_user_powers(&ch, &[1.2, 0.8]);
        let (_, c_sq) = sinr_from_gains(&gains, &ch, &s, &p_user);
        let trace: f64 = p_user
            .iter()
            .zip(&gains.w_col_norm_sq)
            .map(|(&p, &w)| p * w)
            .sum();
        assert!((trace * c_sq - s.snr()).abs() <= 1e-10);
    }

    #[test]
    fn sinr_invariant_under_power_scaling() {
        let s = two_group_scenario();
        let ch = sample_channel(12, &s, 5, 2).unwrap();
        let base = finite_sinr(&ch, &[1.3, 0.7], 0.15, &s).unwrap();
        for t in [0.1, 0.37, 10.0] {
            let scaled = finite_sinr(&ch, &[1.3 * t, 0.7 * t], 0.15, &s).unwrap();
            for (a, b) in base.sinr.iter().zip(&scaled.sinr) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            assert_relative_eq!(scaled.c_sq, base.c_sq / t, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_trial_matches_finite_sinr() {
        let s = two_group_scenario();
        let summary = mc_expected_sum_rate(&s, 8, &[1.0, 1.0], 0.2, 1, 11).unwrap();
        let ch = sample_channel(8, &s, 11, 0).unwrap();
        let report = finite_sinr(&ch, &[1.0, 1.0], 0.2, &s).unwrap();
        assert_eq!(summary.per_trial_rate[0].to_bits(), report.sum_rate.to_bits());
        assert_eq!(summary.std_error, 0.0);
    }

    #[test]
    fn mc_reproducible_bitwise() {
        let s = two_group_scenario();
        let a = mc_expected_sum_rate(&s, 8, &[1.2, 0.8], 0.2, 16, 99).unwrap();
        let b = mc_expected_sum_rate(&s, 8, &[1.2, 0.8], 0.2, 16, 99).unwrap();
        assert_eq!(a.mean_rate.to_bits(), b.mean_rate.to_bits());
        assert_eq!(a.per_trial_rate, b.per_trial_rate);
    }

    #[test]
    fn grid_search_single_group_is_forced() {
        let s = Scenario::new(vec![1.0], vec![1.0], 10.0).unwrap();
        let ch = sample_channel(8, &s, 2, 0).unwrap();
        let (p, _) = finite_opt_power_grid(&ch, &s, 0.1, 0.01).unwrap();
        assert_relative_eq!(p[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn grid_refinement_never_hurts() {
        let s = two_group_scenario();
        let ch = sample_channel(8, &s, 21, 0).unwrap();
        let (_, coarse) = finite_opt_power_grid(&ch, &s, 0.2, 0.1).unwrap();
        let (_, fine) = finite_opt_power_grid(&ch, &s, 0.2, 0.05).unwrap();
        assert!(fine >= coarse);
    }

    #[test]
    fn grid_cost_guard_trips() {
        let s = two_group_scenario();
        let ch = sample_channel(8, &s, 2, 0).unwrap();
        assert!(matches!(
            finite_opt_power_grid(&ch, &s, 0.1, 1e-9),
            Err(RciError::GridTooLarge(_))
        ));
    }
}
