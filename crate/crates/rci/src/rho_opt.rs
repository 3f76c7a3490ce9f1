//! Joint solution of the power/regularization problem.
//!
//! With water-filling substituted for the powers, the optimal `rho` is a
//! root of the stationarity sum
//! `phi(rho) = sum_j beta_j p_j f_j^2/(1+p_j f_j) (rho/beta - 1/gamma_j)`
//! inside `[beta/gamma_1, beta/gamma_L]`. The water-filling active set may
//! change with `rho`, so `phi` is only piecewise smooth; roots are bracketed
//! on a fixed grid and refined by bisection, then rate-compared together
//! with the interval endpoints.

use serde::Serialize;

use crate::asymptotics::{self, limiting_sum_rate};
use crate::error::{RciError, Result};
use crate::scenario::Scenario;
use crate::waterfill::{waterfill, PowerAllocation};

/// Default number of grid points used to bracket roots of the stationarity sum.
pub const DEFAULT_GRID_POINTS: usize = 256;

const BISECTION_TOL: f64 = 1e-10;

/// Solution of the joint problem: optimal `rho`, the allocation at it, the
/// achieved limiting sum rate and the stationarity residual.
#[derive(Debug, Clone, Serialize)]
pub struct P1Solution {
    pub rho_star: f64,
    pub alloc: PowerAllocation,
    pub rate: f64,
    pub residual: f64,
    /// Set when the bracketing grid saw no sign change and the interval
    /// endpoints competed directly.
    pub no_interior_root: bool,
}

/// Stationarity sum of the sum rate in `rho` at a given allocation.
pub fn rho_stationarity(scenario: &Scenario, rho: f64, alloc: &PowerAllocation) -> Result<f64> {
    let state = asymptotics::evaluate(scenario, rho)?;
    let beta = scenario.beta_total();
    Ok(scenario
        .loading()
        .iter()
        .zip(&alloc.p_bar)
        .zip(&state.f)
        .zip(scenario.gamma())
        .map(|(((&bj, &pj), &fj), &gj)| {
            bj * pj * fj * fj / (1.0 + pj * fj) * (rho / beta - 1.0 / gj)
        })
        .sum())
}

fn phi(scenario: &Scenario, rho: f64) -> Result<f64> {
    let alloc = waterfill(scenario, rho)?;
    rho_stationarity(scenario, rho, &alloc)
}

/// Solves the joint problem with the default grid density.
pub fn solve_p1(scenario: &Scenario) -> Result<P1Solution> {
    solve_p1_with_grid(scenario, DEFAULT_GRID_POINTS)
}

/// Solves the joint problem, bracketing roots of the stationarity sum on a
/// `grid_points`-point grid over `[beta/gamma_1, beta/gamma_L]` (gammas of
/// the served groups only). All refined roots plus the two endpoints are
/// rate-compared and the best one is returned.
pub fn solve_p1_with_grid(scenario: &Scenario, grid_points: usize) -> Result<P1Solution> {
    if grid_points < 2 {
        return Err(RciError::Domain("grid needs at least 2 points".into()));
    }
    let beta = scenario.beta_total();
    let served: Vec<f64> = scenario
        .gamma()
        .iter()
        .zip(scenario.loading())
        .filter(|(_, &b)| b > 0.0)
        .map(|(&g, _)| g)
        .collect();
    if served.is_empty() {
        return Err(RciError::Infeasible("all group loadings are zero".into()));
    }
    let gamma_hi = served.iter().cloned().fold(f64::MIN, f64::max);
    let gamma_lo = served.iter().cloned().fold(f64::MAX, f64::min);
    let lo = beta / gamma_hi;
    let hi = beta / gamma_lo;

    if (hi - lo).abs() <= 1e-14 * hi.max(1.0) {
        return finish(scenario, lo, false);
    }

    let step = (hi - lo) / (grid_points - 1) as f64;
    let xs: Vec<f64> = (0..grid_points).map(|i| lo + step * i as f64).collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| phi(scenario, x))
        .collect::<Result<_>>()?;

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..grid_points - 1 {
        let (a, b, fa, fb) = (xs[i], xs[i + 1], vals[i], vals[i + 1]);
        if fa == 0.0 {
            roots.push(a);
        }
        if fa * fb < 0.0 {
            roots.push(bisect(scenario, a, b, fa)?);
        }
    }
    if *vals.last().unwrap() == 0.0 {
        roots.push(hi);
    }

    let no_interior_root = roots.is_empty();
    let mut best: Option<P1Solution> = None;
    for rho in roots.into_iter().chain([lo, hi]) {
        let cand = finish(scenario, rho, no_interior_root)?;
        match &best {
            Some(b) if b.rate >= cand.rate => {}
            _ => best = Some(cand),
        }
    }
    Ok(best.unwrap())
}

fn bisect(scenario: &Scenario, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    while b - a > BISECTION_TOL {
        let mid = 0.5 * (a + b);
        let fm = phi(scenario, mid)?;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

fn finish(scenario: &Scenario, rho: f64, no_interior_root: bool) -> Result<P1Solution> {
    let alloc = waterfill(scenario, rho)?;
    let rate = limiting_sum_rate(scenario, &alloc.p_bar, rho)?;
    let residual = rho_stationarity(scenario, rho, &alloc)?;
    Ok(P1Solution {
        rho_star: rho,
        alloc,
        rate,
        residual,
        no_interior_root,
    })
}
