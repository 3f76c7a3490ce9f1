//! Group-loading optimization: binary mode selection and fractional loading.
//!
//! Binary loading serves a prefix of the path-gain-sorted groups at their
//! maximum loading and compares the `L` per-mode rates. Fractional loading
//! additionally lets the last served group take any loading up to its cap;
//! the candidate modes are enumerated exactly as in the staged procedure
//! below (`solve_p3`), with the last loading fixed by driving its
//! stationarity multiplier `eta_M` to zero.

use serde::Serialize;

use crate::asymptotics::solve_g;
use crate::error::{RciError, Result};
use crate::rho_opt::{solve_p1, P1Solution};
use crate::scenario::Scenario;

/// Tolerance around zero for classifying `eta` signs.
const ETA_SIGN_TOL: f64 = 1e-9;
/// Two candidate rates closer than this are a tie; the smaller mode wins.
const RATE_TIE_TOL: f64 = 1e-9;
/// Target on `|eta_M|` for the interior loading root.
const ETA_ROOT_TOL: f64 = 1e-8;
/// Pre-scan points for bracketing the `beta_M` root.
const BETA_M_SCAN_POINTS: usize = 33;

/// Per-group loading caps `beta_{j,max}`.
#[derive(Debug, Clone, Serialize)]
pub struct LoadingBounds {
    pub beta_max: Vec<f64>,
}

impl LoadingBounds {
    pub fn new(beta_max: Vec<f64>) -> Result<Self> {
        if beta_max.is_empty() || !beta_max.iter().any(|&b| b > 0.0) {
            return Err(RciError::Domain(
                "need at least one positive loading bound".into(),
            ));
        }
        if beta_max.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(RciError::Domain("loading bounds must be non-negative".into()));
        }
        Ok(Self { beta_max })
    }

    /// Prefix-dominance validity condition for the binary scheme:
    /// `beta_{1,max} >= ... >= beta_{L,max}`.
    pub fn is_non_increasing(&self) -> bool {
        self.beta_max.windows(2).all(|w| w[0] >= w[1])
    }
}

/// One optimized transmission mode: which groups are served, at what
/// loading, and the embedded joint power/regularization solution.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSolution {
    /// Number of served groups `M` (prefix of the sorted groups).
    pub mode_m: usize,
    /// Served group indices, `0..mode_m`.
    pub served: Vec<usize>,
    /// Group loadings, length `L`, zero beyond `mode_m`.
    pub loadings: Vec<f64>,
    /// Total served loading.
    pub beta_star: f64,
    /// Joint solution on the served sub-problem.
    pub p1: P1Solution,
    /// Total-loading multiplier at the optimum.
    pub mu: f64,
    /// Per-served-group loading multipliers `eta_k`, `k = 1..=mode_m`
    /// (groups with a zero cap inside the prefix are skipped).
    pub eta: Vec<f64>,
    /// Power multiplier of the embedded water-filling solution.
    pub lambda: f64,
    /// Limiting sum rate (nats per antenna).
    pub rate: f64,
}

/// Loading multiplier of the last served group.
pub fn eta_last(solution: &ModeSolution) -> f64 {
    *solution.eta.last().expect("mode solution serves >= 1 group")
}

/// Total-loading multiplier at a converged sub-solve:
/// `mu = -lambda [1 + g / (1 + (rho/beta)(1+g)^2)]`.
pub fn mu_at_optimum(beta_star: f64, rho_star: f64, lambda: f64, g: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    -lambda * (1.0 + g / (1.0 + rho_star / beta_star * s))
}

/// Solves the sub-problem with an explicit per-group loading vector
/// (length `<= L`; missing trailing groups get zero) and wraps it with the
/// `mu`/`eta` diagnostics.
fn solve_with_loadings(base: &Scenario, loadings: &[f64], mode_m: usize) -> Result<ModeSolution> {
    let l = base.num_groups();
    let mut full = vec![0.0; l];
    full[..loadings.len()].copy_from_slice(loadings);
    let scen = base.with_loading(full.clone())?;
    let p1 = solve_p1(&scen)?;

    let beta_star = scen.beta_total();
    let lambda = p1.alloc.lambda;
    let g = solve_g(beta_star, p1.rho_star)?;
    let mu = mu_at_optimum(beta_star, p1.rho_star, lambda, g);

    let state = crate::asymptotics::evaluate(&scen, p1.rho_star)?;
    let eta: Vec<f64> = (0..l)
        .filter(|&k| scen.loading()[k] > 0.0)
        .map(|k| {
            let pk = p1.alloc.p_bar[k];
            let fk = state.f[k];
            (1.0 + pk * fk).ln() - lambda * (pk - 1.0) + mu
        })
        .collect();

    Ok(ModeSolution {
        mode_m,
        served: (0..mode_m).collect(),
        loadings: full,
        beta_star,
        rate: p1.rate,
        p1,
        mu,
        eta,
        lambda,
    })
}

/// Mode-`m` binary solution: first `m` groups at their loading caps.
///
/// Requires non-increasing caps; with other cap profiles the prefix is not
/// guaranteed to dominate all other size-`m` subsets.
pub fn solve_mode_binary(base: &Scenario, bounds: &LoadingBounds, m: usize) -> Result<ModeSolution> {
    if m == 0 || m > base.num_groups() || bounds.beta_max.len() != base.num_groups() {
        return Err(RciError::Domain(format!(
            "mode {m} out of range for {} groups",
            base.num_groups()
        )));
    }
    if !bounds.is_non_increasing() {
        return Err(RciError::Domain(
            "binary mode selection requires non-increasing loading bounds".into(),
        ));
    }
    solve_with_loadings(base, &bounds.beta_max[..m], m)
}

/// Binary group loading: best of the `L` prefix modes.
pub fn solve_p2(base: &Scenario, bounds: &LoadingBounds) -> Result<ModeSolution> {
    let mut best: Option<ModeSolution> = None;
    for m in 1..=base.num_groups() {
        let cand = solve_mode_binary(base, bounds, m)?;
        best = Some(match best {
            None => cand,
            Some(b) => {
                if cand.rate > b.rate + RATE_TIE_TOL {
                    cand
                } else {
                    b
                }
            }
        });
    }
    Ok(best.unwrap())
}

/// Finds `beta_M` in `[0, beta_{M,max}]` driving `eta_M` to zero for a mode
/// with `M` served groups, re-solving the joint problem at every candidate.
///
/// Pre-scans downward from the cap and bisects the first bracket found
/// (ties go to the larger loading). Returns `(0, solution without group M)`
/// when the residual never changes sign.
pub fn solve_beta_m(
    base: &Scenario,
    bounds: &LoadingBounds,
    m: usize,
) -> Result<(f64, ModeSolution)> {
    if m == 0 || m > base.num_groups() {
        return Err(RciError::Domain(format!("invalid mode {m}")));
    }
    let cap = bounds.beta_max[m - 1];
    if cap <= 0.0 {
        return Err(RciError::Domain(format!("group {m} has a zero loading cap")));
    }
    let eta_at = |beta_m: f64| -> Result<f64> {
        let mut loadings = bounds.beta_max[..m - 1].to_vec();
        loadings.push(beta_m);
        Ok(eta_last(&solve_with_loadings(base, &loadings, m)?))
    };

    let n = BETA_M_SCAN_POINTS;
    let points: Vec<f64> = (1..=n).rev().map(|i| cap * i as f64 / n as f64).collect();
    let mut prev = (points[0], eta_at(points[0])?);
    let mut bracket = None;
    for &t in &points[1..] {
        let e = eta_at(t)?;
        if prev.1 * e <= 0.0 {
            bracket = Some(((t, e), prev));
            break;
        }
        prev = (t, e);
    }

    let beta_m = match bracket {
        None => 0.0,
        Some(((mut lo, e_lo), (mut hi, _))) => {
            // eta is negative at the top of the bracket and >= 0 at the bottom
            let mut e_lo = e_lo;
            loop {
                let mid = 0.5 * (lo + hi);
                let e_mid = eta_at(mid)?;
                if e_mid.abs() <= ETA_ROOT_TOL || hi - lo <= 1e-12 {
                    // keep the larger loading consistent with eta ~ 0
                    break mid;
                }
                if e_lo * e_mid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    e_lo = e_mid;
                }
            }
        }
    };

    let solution = if beta_m > 0.0 {
        let mut loadings = bounds.beta_max[..m - 1].to_vec();
        loadings.push(beta_m);
        solve_with_loadings(base, &loadings, m)?
    } else {
        // group M dropped entirely
        solve_with_loadings(base, &bounds.beta_max[..m - 1], m)?
    };
    Ok((beta_m, solution))
}

/// One iteration record of the staged fractional-loading solve.
#[derive(Debug, Clone, Serialize)]
pub struct P3Iteration {
    /// Iteration index `j` (1-based prefix length).
    pub j: usize,
    /// Mode `M` implied by the water-filling active set.
    pub m: usize,
    /// True when `M` repeated an earlier iteration and was skipped.
    pub skipped: bool,
    /// `eta_k` diagnostics at the full-cap loading (before any `beta_M`
    /// adjustment); absent for skipped iterations.
    pub eta: Option<Vec<f64>>,
    /// Interior loading of group `M` after the root solve, if one ran.
    pub beta_m_star: Option<f64>,
    /// Final loadings and rate recorded for this candidate mode.
    pub loadings: Option<Vec<f64>>,
    pub beta_star: Option<f64>,
    pub rate: Option<f64>,
}

/// Outcome of the fractional-loading solve: the winning mode plus the full
/// per-iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct P3Outcome {
    pub winner: ModeSolution,
    pub trace: Vec<P3Iteration>,
}

/// Fractional group loading via the staged candidate-mode enumeration.
///
/// Iteration `j` serves the first `j` groups at their caps, reads off the
/// mode `M` from the water-filling active set, dedupes repeated `M`s, zeroes
/// loadings beyond `M` and, when `eta_M < 0`, replaces the cap of group `M`
/// by the interior root of `eta_M = 0`. With `early_break` the loop stops
/// after the first iteration whose `eta_M` was negative.
pub fn solve_p3(base: &Scenario, bounds: &LoadingBounds, early_break: bool) -> Result<P3Outcome> {
    let l = base.num_groups();
    if bounds.beta_max.len() != l {
        return Err(RciError::Domain(format!(
            "bounds length {} != {} groups",
            bounds.beta_max.len(),
            l
        )));
    }

    let mut seen_modes: Vec<usize> = Vec::new();
    let mut trace: Vec<P3Iteration> = Vec::new();
    let mut candidates: Vec<ModeSolution> = Vec::new();

    for j in 1..=l {
        if !bounds.beta_max[..j].iter().any(|&b| b > 0.0) {
            continue;
        }
        let full = solve_with_loadings(base, &bounds.beta_max[..j], j)?;
        // last group index (1-based) with positive power
        let m = full
            .p1
            .alloc
            .p_bar
            .iter()
            .rposition(|&p| p > 0.0)
            .map(|i| i + 1)
            .expect("water-filling serves at least one group");

        if seen_modes.contains(&m) {
            trace.push(P3Iteration {
                j,
                m,
                skipped: true,
                eta: None,
                beta_m_star: None,
                loadings: None,
                beta_star: None,
                rate: None,
            });
            continue;
        }
        seen_modes.push(m);

        // zero the loadings past M and re-solve at the full caps of 1..=M
        let at_caps = if m == j {
            full
        } else {
            solve_with_loadings(base, &bounds.beta_max[..m], m)?
        };
        let eta = at_caps.eta.clone();
        let eta_m = eta_last(&at_caps);

        let (beta_m_star, chosen) = if eta_m < -ETA_SIGN_TOL {
            let (bm, sol) = solve_beta_m(base, bounds, m)?;
            (Some(bm), sol)
        } else {
            (None, at_caps)
        };

        trace.push(P3Iteration {
            j,
            m,
            skipped: false,
            eta: Some(eta),
            beta_m_star,
            loadings: Some(chosen.loadings.clone()),
            beta_star: Some(chosen.beta_star),
            rate: Some(chosen.rate),
        });
        let had_negative_eta = beta_m_star.is_some();
        candidates.push(chosen);

        if early_break && had_negative_eta {
            break;
        }
    }

    let winner = candidates
        .into_iter()
        .reduce(|best, cand| {
            if cand.rate > best.rate + RATE_TIE_TOL {
                cand
            } else {
                best
            }
        })
        .ok_or_else(|| RciError::Infeasible("no candidate mode produced".into()))?;

    Ok(P3Outcome { winner, trace })
}

/// Independent grid-search oracle: sweeps the total loading, shapes it as a
/// prefix fill of the caps, and solves the joint problem at each point.
/// Returns the best `(beta, rate)` pair.
pub fn brute_force_p3(
    base: &Scenario,
    bounds: &LoadingBounds,
    grid_step: f64,
) -> Result<(f64, f64)> {
    if !(grid_step > 0.0) {
        return Err(RciError::Domain(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let budget: f64 = bounds.beta_max.iter().sum();
    let steps = (budget / grid_step).round() as usize;
    // the sum rate has slope kinks where a group's cap saturates, so the
    // cumulative cap sums join the uniform grid as candidate totals
    let mut candidates: Vec<f64> = (1..=steps)
        .map(|i| (i as f64 * grid_step).min(budget))
        .collect();
    let mut acc = 0.0;
    for &cap in &bounds.beta_max {
        acc += cap;
        candidates.push(acc.min(budget));
    }
    let mut best = (0.0, 0.0);
    for beta in candidates {
        let mut remaining = beta;
        let mut loadings = Vec::with_capacity(bounds.beta_max.len());
        for &cap in &bounds.beta_max {
            let take = cap.min(remaining);
            loadings.push(take);
            remaining -= take;
        }
        let scen = base.with_loading(loadings)?;
        let rate = solve_p1(&scen)?.rate;
        if rate > best.1 {
            best = (beta, rate);
        }
    }
    Ok(best)
}
