//! Water-filling power allocation for a fixed regularization parameter.
//!
//! For fixed `rho` the sum-rate problem in the normalized powers is convex
//! and the optimum is `p_bar_j = [1/lambda - 1/f_j]_+`, with `lambda` fixed
//! in closed form once the active-set size `m` is known. Groups are already
//! sorted by path gain, so the active set is always a prefix and `m` is
//! found by an incremental scan.

use serde::Serialize;

use crate::asymptotics;
use crate::error::{RciError, Result};
use crate::scenario::Scenario;

/// Boundary tolerance for accepting `p_bar_{m+1} <= 0`.
const NEXT_POWER_TOL: f64 = 1e-12;

/// Water-filling solution for one `(scenario, rho)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct PowerAllocation {
    /// Normalized powers, one per group, zero for inactive groups.
    pub p_bar: Vec<f64>,
    /// Power-constraint multiplier; `1/lambda` is the water level.
    pub lambda: f64,
    /// Number of groups with positive power.
    pub m_active: usize,
}

/// Solves `sum_j beta_j p_bar_j = beta` with `p_bar_j = [1/lambda - 1/f_j]_+`.
///
/// Groups with `beta_j = 0` are skipped and reported with zero power. Scans
/// active-set sizes `m = 1..` using the closed-form
/// `lambda = (sum_{j<=m} beta_j) / (beta + sum_{j<=m} beta_j/f_j)` and
/// accepts the first `m` whose trailing power is non-positive.
pub fn waterfill(scenario: &Scenario, rho: f64) -> Result<PowerAllocation> {
    let state = asymptotics::evaluate(scenario, rho)?;
    waterfill_from_gains(scenario.loading(), &state.f, scenario.beta_total())
}

/// Water-filling against explicit effective gains. `f` must be
/// non-increasing over the groups with positive loading.
pub fn waterfill_from_gains(betas: &[f64], f: &[f64], beta: f64) -> Result<PowerAllocation> {
    let candidates: Vec<usize> = (0..betas.len()).filter(|&j| betas[j] > 0.0).collect();
    if candidates.is_empty() {
        return Err(RciError::Infeasible("all group loadings are zero".into()));
    }

    let mut beta_sum = 0.0;
    let mut inv_f_sum = 0.0;
    for m in 1..=candidates.len() {
        let j = candidates[m - 1];
        beta_sum += betas[j];
        inv_f_sum += betas[j] / f[j];
        let lambda = beta_sum / (beta + inv_f_sum);
        let level = 1.0 / lambda;

        let last_power = level - 1.0 / f[j];
        if last_power <= 0.0 {
            continue;
        }
        let next_ok = match candidates.get(m) {
            Some(&next) => level - 1.0 / f[next] <= NEXT_POWER_TOL,
            None => true,
        };
        if !next_ok {
            continue;
        }

        let mut p_bar = vec![0.0; betas.len()];
        for &k in &candidates[..m] {
            p_bar[k] = level - 1.0 / f[k];
        }
        return Ok(PowerAllocation {
            p_bar,
            lambda,
            m_active: m,
        });
    }
    // f_j > 0 everywhere, so some m always satisfies both conditions.
    Err(RciError::Infeasible(
        "water-filling scan found no admissible active set".into(),
    ))
}

/// Maximum KKT stationarity/slackness violation of a candidate allocation:
/// `|f_j/(1+p_j f_j) - lambda|` over active groups and `[f_j - lambda]_+`
/// over inactive ones.
pub fn kkt_residual_p(scenario: &Scenario, rho: f64, alloc: &PowerAllocation) -> Result<f64> {
    let state = asymptotics::evaluate(scenario, rho)?;
    let mut worst = 0.0f64;
    for (j, &bj) in scenario.loading().iter().enumerate() {
        if bj == 0.0 {
            continue;
        }
        let fj = state.f[j];
        let pj = alloc.p_bar[j];
        let r = if pj > 0.0 {
            (fj / (1.0 + pj * fj) - alloc.lambda).abs()
        } else {
            (fj - alloc.lambda).max(0.0)
        };
        worst = worst.max(r);
    }
    Ok(worst)
}
