//! Large-system fixed point and limiting rate expressions.
//!
//! Everything here is a deterministic function of the loading `beta`, the
//! normalized regularization `rho = alpha/N` and the effective SNRs. The
//! fixed point `g(beta, rho)` solves `g = (rho + beta/(1+g))^{-1}`; the
//! per-group effective gain `f_j` is the power-independent factor of the
//! limiting SINR.

use serde::Serialize;

use crate::error::{RciError, Result};
use crate::scenario::Scenario;

/// Evaluated large-system point: `(beta, rho, g, f_1..f_L)`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticState {
    pub beta: f64,
    pub rho: f64,
    pub g: f64,
    pub f: Vec<f64>,
}

/// Unique positive root of `rho g^2 + (rho + beta - 1) g - 1 = 0`, i.e. the
/// fixed point `g = (rho + beta/(1+g))^{-1}`.
///
/// Uses the cancellation-free root form `g = 2 / (b + sqrt(b^2 + 4 rho))`
/// with `b = rho + beta - 1`.
pub fn solve_g(beta: f64, rho: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(RciError::Domain(format!("beta must be positive, got {beta}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(RciError::Domain(format!("rho must be positive, got {rho}")));
    }
    let b = rho + beta - 1.0;
    Ok(2.0 / (b + (b * b + 4.0 * rho).sqrt()))
}

/// Residual of the fixed-point equation, `g (rho + beta/(1+g)) - 1`.
pub fn fixed_point_residual(beta: f64, rho: f64, g: f64) -> f64 {
    g * (rho + beta / (1.0 + g)) - 1.0
}

/// `dg/drho = -g (1+g)^2 / (beta + rho (1+g)^2)`; strictly negative.
pub fn dg_drho(beta: f64, rho: f64, g: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    -g * s / (beta + rho * s)
}

/// Effective gain `f_j`: the limiting SINR of a group-`j` user per unit of
/// normalized power.
pub fn eff_gain(gamma_j: f64, beta: f64, rho: f64, g: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    g * (gamma_j + gamma_j * rho / beta * s) / (gamma_j + s)
}

/// `df_j/drho` at fixed `beta`. Vanishes at `rho = beta/gamma_j`, positive
/// below, negative above.
pub fn df_drho(gamma_j: f64, beta: f64, rho: f64, g: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    let f = eff_gain(gamma_j, beta, rho, g);
    let d = 1.0 + rho / beta * s;
    f * f * 2.0 * (1.0 / g + 1.0) / (d * d) * (rho / beta - 1.0 / gamma_j) * dg_drho(beta, rho, g)
}

/// Total derivative `df_j/dbeta` along `g = g(beta, rho)`.
pub fn df_dbeta(gamma_j: f64, beta: f64, rho: f64, g: f64) -> f64 {
    let s = (1.0 + g) * (1.0 + g);
    let f = eff_gain(gamma_j, beta, rho, g);
    let d = 1.0 + rho / beta * s;
    -(f / beta)
        * (1.0 + g / d + 2.0 * g * s * (rho / beta * gamma_j - 1.0) / ((gamma_j + s) * d * d))
}

/// Evaluates the fixed point and all per-group effective gains at `rho`.
pub fn evaluate(scenario: &Scenario, rho: f64) -> Result<AsymptoticState> {
    let beta = scenario.beta_total();
    let g = solve_g(beta, rho)?;
    let f = scenario
        .gamma()
        .iter()
        .map(|&gamma_j| eff_gain(gamma_j, beta, rho, g))
        .collect();
    Ok(AsymptoticState { beta, rho, g, f })
}

/// Limiting sum rate per antenna, `sum_j beta_j ln(1 + p_bar_j f_j)` (nats).
pub fn limiting_sum_rate(scenario: &Scenario, p_bar: &[f64], rho: f64) -> Result<f64> {
    if p_bar.len() != scenario.num_groups() {
        return Err(RciError::Domain(format!(
            "power vector length {} != {} groups",
            p_bar.len(),
            scenario.num_groups()
        )));
    }
    for (j, &p) in p_bar.iter().enumerate() {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(RciError::Domain(format!(
                "p_bar[{j}] must be non-negative, got {p}"
            )));
        }
    }
    let state = evaluate(scenario, rho)?;
    Ok(scenario
        .loading()
        .iter()
        .zip(p_bar)
        .zip(&state.f)
        .map(|((&bj, &pj), &fj)| bj * (1.0 + pj * fj).ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Damped fixed-point iteration, independent of the quadratic route.
    fn solve_g_iterative(beta: f64, rho: f64) -> f64 {
        let mut g = 1.0;
        for _ in 0..10_000 {
            let next = 1.0 / (rho + beta / (1.0 + g));
            let damped = 0.5 * g + 0.5 * next;
            if (damped - g).abs() <= 1e-13 * (1.0 + g.abs()) {
                return damped;
            }
            g = damped;
        }
        g
    }

    #[test]
    fn g_closed_form_cases() {
        // positive root of 2g^2 + 2g - 1 = 0
        let g = solve_g(1.0, 2.0).unwrap();
        assert_relative_eq!(g, (3.0f64.sqrt() - 1.0) / 2.0, max_relative = 1e-14);
        // positive root of g^2 + 2g - 1 = 0
        let g = solve_g(2.0, 1.0).unwrap();
        assert_relative_eq!(g, 2.0f64.sqrt() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn g_dominant_rho_limit() {
        let g = solve_g(1.0, 1e6).unwrap();
        assert!((g - 1e-6).abs() / 1e-6 < 0.01);
    }

    #[test]
    fn g_matches_damped_iteration_on_grid() {
        for &beta in &[0.05, 0.3, 1.0, 2.5, 4.0] {
            for &rho in &[1e-4, 1e-2, 0.5, 3.0, 1e3] {
                let g = solve_g(beta, rho).unwrap();
                let gi = solve_g_iterative(beta, rho);
                assert_relative_eq!(g, gi, max_relative = 1e-9);
                assert!(fixed_point_residual(beta, rho, g).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn g_rejects_non_positive_domain() {
        assert!(solve_g(0.0, 1.0).is_err());
        assert!(solve_g(1.0, 0.0).is_err());
        assert!(solve_g(1.0, -1.0).is_err());
    }

    #[test]
    fn dg_drho_value_and_sign() {
        let g = solve_g(1.0, 2.0).unwrap();
        assert_relative_eq!(dg_drho(1.0, 2.0, g), -0.144337567297, max_relative = 1e-9);
        for &beta in &[0.1, 1.0, 3.0] {
            for &rho in &[0.01, 1.0, 10.0] {
                let g = solve_g(beta, rho).unwrap();
                assert!(dg_drho(beta, rho, g) < 0.0);
            }
        }
    }

    #[test]
    fn dg_drho_matches_finite_difference() {
        let h = 1e-6;
        for &(beta, rho) in &[(1.0, 2.0), (2.0, 1.0), (0.5, 0.3)] {
            let g = solve_g(beta, rho).unwrap();
            let fd = (solve_g(beta, rho + h).unwrap() - solve_g(beta, rho - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(dg_drho(beta, rho, g), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn eff_gain_value_and_monotonicity() {
        let g = solve_g(1.0, 2.0).unwrap();
        assert_relative_eq!(eff_gain(10.0, 1.0, 2.0, g), 1.4596722564039624, max_relative = 1e-12);
        // increasing in gamma
        assert!(eff_gain(10.0, 1.0, 2.0, g) > eff_gain(5.0, 1.0, 2.0, g));
        // dominant-gamma limit
        let s = (1.0 + g) * (1.0 + g);
        let lim = g * (1.0 + 2.0 / 1.0 * s);
        assert_relative_eq!(eff_gain(1e12, 1.0, 2.0, g), lim, max_relative = 1e-9);
    }

    #[test]
    fn df_drho_zero_at_unimodal_peak_and_signs() {
        let gamma = 10.0;
        let beta = 1.0;
        let rho_peak = beta / gamma;
        let g = solve_g(beta, rho_peak).unwrap();
        assert!(df_drho(gamma, beta, rho_peak, g).abs() < 1e-14);
        let g = solve_g(beta, rho_peak / 2.0).unwrap();
        assert!(df_drho(gamma, beta, rho_peak / 2.0, g) > 0.0);
        let g = solve_g(beta, rho_peak * 2.0).unwrap();
        assert!(df_drho(gamma, beta, rho_peak * 2.0, g) < 0.0);
    }

    #[test]
    fn df_drho_matches_finite_difference() {
        let h = 1e-6;
        let (gamma, beta, rho) = (10.0, 1.0, 2.0);
        let g = solve_g(beta, rho).unwrap();
        let fd = (eff_gain(gamma, beta, rho + h, solve_g(beta, rho + h).unwrap())
            - eff_gain(gamma, beta, rho - h, solve_g(beta, rho - h).unwrap()))
            / (2.0 * h);
        assert_relative_eq!(df_drho(gamma, beta, rho, g), fd, max_relative = 1e-6);
    }

    #[test]
    fn df_dbeta_matches_finite_difference_and_alt_form() {
        let h = 1e-6;
        let (gamma, beta, rho) = (10.0, 1.0, 2.0);
        let g = solve_g(beta, rho).unwrap();
        let fd = (eff_gain(gamma, beta + h, rho, solve_g(beta + h, rho).unwrap())
            - eff_gain(gamma, beta - h, rho, solve_g(beta - h, rho).unwrap()))
            / (2.0 * h);
        assert_relative_eq!(df_dbeta(gamma, beta, rho, g), fd, max_relative = 1e-6);

        // alternative re-expression on a 10x10 grid
        for i in 1..=10 {
            for k in 1..=10 {
                let beta = 0.2 * i as f64;
                let rho = 0.3 * k as f64;
                let g = solve_g(beta, rho).unwrap();
                let s = (1.0 + g) * (1.0 + g);
                let d = 1.0 + rho / beta * s;
                let f = eff_gain(gamma, beta, rho, g);
                let alt = -(f / beta) * (1.0 + g / d)
                    + df_drho(gamma, beta, rho, g) / (1.0 + g);
                assert!((df_dbeta(gamma, beta, rho, g) - alt).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn df_dbeta_negative_above_single_group_optimum() {
        for &gamma in &[0.5, 2.0, 10.0, 100.0] {
            for &beta in &[0.2, 1.0, 3.0] {
                for mult in [1.0, 2.0, 10.0] {
                    let rho = beta / gamma * mult;
                    let g = solve_g(beta, rho).unwrap();
                    assert!(df_dbeta(gamma, beta, rho, g) < 0.0);
                }
            }
        }
    }

    #[test]
    fn sum_rate_zero_power_and_scale_structure() {
        let s = Scenario::new(vec![1.0, 0.25], vec![0.5, 0.5], 10.0).unwrap();
        assert_eq!(limiting_sum_rate(&s, &[0.0, 0.0], 0.2).unwrap(), 0.0);
        assert!(limiting_sum_rate(&s, &[-0.1, 0.0], 0.2).is_err());
        // product structure: each term depends on p*f only
        let st = evaluate(&s, 0.2).unwrap();
        let r1 = 0.5 * (1.0f64 + 2.0 * st.f[0]).ln();
        let direct: f64 = limiting_sum_rate(&s, &[2.0, 0.0], 0.2).unwrap();
        assert_relative_eq!(r1, direct, max_relative = 1e-14);
    }
}
