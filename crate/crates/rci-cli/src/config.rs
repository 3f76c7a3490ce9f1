//! Experiment configuration: JSON schema, defaults and flag overrides.

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub num_groups: usize,
    /// explicit squared path gains, strongest first
    #[serde(default)]
    pub path_gain_sq: Option<Vec<f64>>,
    /// alternatively a named rule; currently only "1/j^2"
    #[serde(default)]
    pub gain_rule: Option<String>,
    /// fixed group loadings (p1, mc)
    #[serde(default)]
    pub loading: Option<Vec<f64>>,
    /// per-group loading caps (p2, p3, validate)
    #[serde(default)]
    pub loading_max: Option<Vec<f64>>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// per-point SNR sweep; p1 emits the finite-size comparison over it
    #[serde(default)]
    pub snr_db_sweep: Option<Sweep>,
    /// total-loading sweep for the per-mode rate curves (p2)
    #[serde(default)]
    pub beta_sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || self.stop < self.start {
            bail!(
                "invalid sweep: start {}, stop {}, step {}",
                self.start,
                self.stop,
                self.step
            );
        }
        let n = ((self.stop - self.start) / self.step).round() as usize;
        Ok((0..=n)
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    /// grid density for bracketing the regularization stationarity condition
    pub grid_points: usize,
    pub early_break: bool,
    pub log_base: LogBase,
    /// power-grid step of the per-realization finite-size optimizer
    pub fs_grid_step: f64,
    /// total-loading step of the brute-force validation grid
    pub total_loading_step: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            grid_points: 256,
            early_break: false,
            log_base: LogBase::E,
            fs_grid_step: 0.01,
            total_loading_step: 0.001,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n_antennas: usize,
    pub trials: usize,
    pub seed: u64,
    /// antenna counts exercised by the convergence check in `validate`
    pub convergence_sizes: Vec<usize>,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock {
            n_antennas: 8,
            trials: 500,
            seed: 0,
            convergence_sizes: vec![16, 64, 256],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// file stem for the emitted documents: `<prefix>_<command>.{json,csv}`
    pub prefix: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            prefix: "results".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum LogBase {
    #[value(name = "e")]
    #[serde(rename = "e")]
    E,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    /// converts a natural-log rate into the configured base
    pub fn convert(&self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }
}

impl ExperimentConfig {
    /// Squared path gains, either listed explicitly or generated by rule.
    pub fn gains(&self) -> Result<Vec<f64>> {
        let s = &self.scenario;
        match (&s.path_gain_sq, &s.gain_rule) {
            (Some(list), None) => {
                if list.len() != s.num_groups {
                    bail!(
                        "path_gain_sq has {} entries but num_groups is {}",
                        list.len(),
                        s.num_groups
                    );
                }
                Ok(list.clone())
            }
            (None, Some(rule)) if rule == "1/j^2" => Ok((1..=s.num_groups)
                .map(|j| 1.0 / (j * j) as f64)
                .collect()),
            (None, Some(rule)) => bail!("unknown gain_rule {rule:?}; supported: \"1/j^2\""),
            (Some(_), Some(_)) => bail!("path_gain_sq and gain_rule are mutually exclusive"),
            (None, None) => bail!("scenario needs path_gain_sq or gain_rule"),
        }
    }

    pub fn loading(&self) -> Result<&[f64]> {
        let l = self
            .scenario
            .loading
            .as_deref()
            .context("this command needs scenario.loading")?;
        if l.len() != self.scenario.num_groups {
            bail!(
                "loading has {} entries but num_groups is {}",
                l.len(),
                self.scenario.num_groups
            );
        }
        Ok(l)
    }

    pub fn loading_max(&self) -> Result<&[f64]> {
        let l = self
            .scenario
            .loading_max
            .as_deref()
            .context("this command needs scenario.loading_max")?;
        if l.len() != self.scenario.num_groups {
            bail!(
                "loading_max has {} entries but num_groups is {}",
                l.len(),
                self.scenario.num_groups
            );
        }
        Ok(l)
    }

    pub fn snr(&self) -> Result<f64> {
        let db = self
            .scenario
            .snr_db
            .context("this command needs scenario.snr_db")?;
        Ok(10f64.powf(db / 10.0))
    }
}

pub fn snr_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
