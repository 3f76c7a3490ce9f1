//! Static problem instance: path-gain groups, loadings and transmit SNR.

use serde::{Deserialize, Serialize};

use crate::error::{RciError, Result};

/// A multiuser MISO instance with `L` path-gain groups.
///
/// Groups are kept sorted by squared path gain, strongest first; ties keep
/// their original order. `gamma[j] = snr * path_gain_sq[j]` is the effective
/// SNR of group `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    path_gain_sq: Vec<f64>,
    loading: Vec<f64>,
    snr: f64,
    gamma: Vec<f64>,
    beta_total: f64,
}

impl Scenario {
    /// Builds a scenario from squared path gains `a_j^2`, group loadings
    /// `beta_j` and the transmit SNR `P_d/sigma^2` (linear scale).
    ///
    /// Groups are sorted by descending path gain (stable, so equal gains keep
    /// their input order) and the loadings are permuted along.
    pub fn new(path_gain_sq: Vec<f64>, loading: Vec<f64>, snr: f64) -> Result<Self> {
        if path_gain_sq.is_empty() || path_gain_sq.len() != loading.len() {
            return Err(RciError::Domain(format!(
                "need matching non-empty gain/loading vectors, got {} and {}",
                path_gain_sq.len(),
                loading.len()
            )));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(RciError::Domain(format!("snr must be positive, got {snr}")));
        }
        for (j, &a2) in path_gain_sq.iter().enumerate() {
            if !(a2 > 0.0 && a2.is_finite()) {
                return Err(RciError::Domain(format!(
                    "path_gain_sq[{j}] must be positive, got {a2}"
                )));
            }
        }
        for (j, &b) in loading.iter().enumerate() {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(RciError::Domain(format!(
                    "loading[{j}] must be non-negative, got {b}"
                )));
            }
        }
        let beta_total: f64 = loading.iter().sum();
        if beta_total <= 0.0 {
            return Err(RciError::Domain(
                "total loading beta must be positive".into(),
            ));
        }

        let mut order: Vec<usize> = (0..path_gain_sq.len()).collect();
        order.sort_by(|&i, &j| path_gain_sq[j].partial_cmp(&path_gain_sq[i]).unwrap());
        let path_gain_sq: Vec<f64> = order.iter().map(|&i| path_gain_sq[i]).collect();
        let loading: Vec<f64> = order.iter().map(|&i| loading[i]).collect();
        let gamma: Vec<f64> = path_gain_sq.iter().map(|&a2| snr * a2).collect();

        Ok(Self {
            path_gain_sq,
            loading,
            snr,
            gamma,
            beta_total,
        })
    }

    /// Number of groups `L`.
    pub fn num_groups(&self) -> usize {
        self.path_gain_sq.len()
    }

    /// Squared path gains `a_j^2`, non-increasing.
    pub fn path_gain_sq(&self) -> &[f64] {
        &self.path_gain_sq
    }

    /// Group loadings `beta_j`.
    pub fn loading(&self) -> &[f64] {
        &self.loading
    }

    /// Transmit SNR `P_d/sigma^2`.
    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Effective SNRs `gamma_j = snr * a_j^2`.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Total loading `beta`.
    pub fn beta_total(&self) -> f64 {
        self.beta_total
    }

    /// Same gains and SNR with different group loadings.
    pub fn with_loading(&self, loading: Vec<f64>) -> Result<Self> {
        Self::new(self.path_gain_sq.clone(), loading, self.snr)
    }

    /// Sub-scenario keeping only the first `m` (strongest) groups.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.num_groups() {
            return Err(RciError::Domain(format!(
                "prefix size {m} out of range 1..={}",
                self.num_groups()
            )));
        }
        Self::new(
            self.path_gain_sq[..m].to_vec(),
            self.loading[..m].to_vec(),
            self.snr,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_gains_descending_and_permutes_loading() {
        let s = Scenario::new(vec![0.25, 1.0], vec![0.3, 0.7], 10.0).unwrap();
        assert_eq!(s.path_gain_sq(), &[1.0, 0.25]);
        assert_eq!(s.loading(), &[0.7, 0.3]);
        assert_eq!(s.gamma(), &[10.0, 2.5]);
        assert!((s.beta_total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_gains_keep_input_order() {
        let s = Scenario::new(vec![1.0, 1.0, 0.5], vec![0.1, 0.2, 0.3], 1.0).unwrap();
        assert_eq!(s.loading(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Scenario::new(vec![], vec![], 1.0).is_err());
        assert!(Scenario::new(vec![1.0], vec![0.5], 0.0).is_err());
        assert!(Scenario::new(vec![0.0], vec![0.5], 1.0).is_err());
        assert!(Scenario::new(vec![1.0], vec![-0.1], 1.0).is_err());
        assert!(Scenario::new(vec![1.0], vec![0.0], 1.0).is_err());
    }

    #[test]
    fn gamma_is_snr_times_gain_exactly() {
        let s = Scenario::new(vec![1.0, 0.25, 0.1], vec![0.2; 3], 3.5).unwrap();
        for j in 0..3 {
            assert_eq!(s.gamma()[j], 3.5 * s.path_gain_sq()[j]);
        }
    }
}
