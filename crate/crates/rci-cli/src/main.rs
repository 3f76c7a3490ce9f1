//! Experiment runner for the rci solvers: parameter sweeps, Monte Carlo
//! comparisons and a self-validation report, all emitted as CSV + JSON.

mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{snr_from_db, ExperimentConfig, LogBase};
use rci::multimode::{self, LoadingBounds};
use rci::rho_opt;
use rci::{finite_mc, Scenario};

#[derive(Parser)]
#[command(name = "rci", version, about = "Sum-rate optimization experiments for RCI precoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// output directory for the result documents
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// overrides mc.seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// base for all reported rates
    #[arg(long, value_enum)]
    log_base: Option<LogBase>,
    /// overrides mc.trials from the config
    #[arg(long)]
    trials: Option<usize>,
    /// stop the loading iteration at the first candidate past its peak
    #[arg(long)]
    early_break: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Power allocation and regularization at fixed loadings; with an SNR
    /// sweep, also the finite-size comparison table
    P1(CommonArgs),
    /// Binary group loading: best on/off mode, or per-mode rate curves over
    /// a total-loading sweep
    P2(CommonArgs),
    /// Fractional group loading via the full iteration, with trace
    P3(CommonArgs),
    /// Monte Carlo sum rate of the analytic allocation on random channels
    Mc(CommonArgs),
    /// Self-checks: loading grid search vs the solver, SINR convergence in N
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// allowed |beta_grid - beta_solver| in the grid check
        #[arg(long, default_value_t = 1e-3)]
        beta_tol: f64,
        /// allowed |rate_grid - rate_solver| in the grid check
        #[arg(long, default_value_t = 5e-4)]
        rate_tol: f64,
    },
}

/// Everything loaded and flag-merged before a command runs.
struct Runtime {
    cfg: ExperimentConfig,
    config_sha256: String,
    out_dir: PathBuf,
    log_base: LogBase,
    seed: u64,
    trials: usize,
    early_break: bool,
}

impl Runtime {
    fn new(args: &CommonArgs) -> Result<Runtime> {
        let raw = fs::read(&args.config)
            .with_context(|| format!("reading config {}", args.config.display()))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&raw)
            .with_context(|| format!("parsing config {}", args.config.display()))?;
        let config_sha256 = hex(&Sha256::digest(&raw));
        Ok(Runtime {
            log_base: args.log_base.unwrap_or(cfg.solver.log_base),
            seed: args.seed.unwrap_or(cfg.mc.seed),
            trials: args.trials.unwrap_or(cfg.mc.trials),
            early_break: args.early_break || cfg.solver.early_break,
            out_dir: args.out.clone(),
            cfg,
            config_sha256,
        })
    }

    fn scenario(&self, loading: Vec<f64>, snr: f64) -> Result<Scenario> {
        Ok(Scenario::new(self.cfg.gains()?, loading, snr)?)
    }

    fn meta(&self, command: &str) -> Meta {
        Meta {
            command: command.into(),
            config_sha256: self.config_sha256.clone(),
            log_base: self.log_base,
            seed: self.seed,
        }
    }

    /// Writes the JSON document and optional CSV, both fully assembled first
    /// so a failure never leaves partial files behind.
    fn emit<T: Serialize>(&self, command: &str, json: &T, csv_bytes: Option<Vec<u8>>) -> Result<()> {
        let body = serde_json::to_vec_pretty(json)?;
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let stem = format!("{}_{command}", self.cfg.output.prefix);
        let json_path = self.out_dir.join(format!("{stem}.json"));
        fs::write(&json_path, body).with_context(|| format!("writing {}", json_path.display()))?;
        println!("wrote {}", json_path.display());
        if let Some(bytes) = csv_bytes {
            let csv_path = self.out_dir.join(format!("{stem}.csv"));
            fs::write(&csv_path, bytes)
                .with_context(|| format!("writing {}", csv_path.display()))?;
            println!("wrote {}", csv_path.display());
        }
        Ok(())
    }
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Meta {
    command: String,
    config_sha256: String,
    log_base: LogBase,
    seed: u64,
}

#[derive(Serialize)]
struct P1Report {
    meta: Meta,
    snr_db: f64,
    rho_star: f64,
    lambda: f64,
    m_active: usize,
    p_bar: Vec<f64>,
    rate: f64,
    residual: f64,
}

#[derive(Serialize)]
struct SweepReport {
    meta: Meta,
    n_antennas: usize,
    trials: usize,
    rows: usize,
}

fn cmd_p1(rt: &Runtime) -> Result<()> {
    if let Some(sweep) = rt.cfg.scenario.snr_db_sweep {
        // finite-size comparison over the SNR sweep
        let loading = rt.cfg.loading()?.to_vec();
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["snr_db", "rate_ls", "rate_fs", "gap"])?;
        let points = sweep.values()?;
        for &db in &points {
            let s = rt.scenario(loading.clone(), snr_from_db(db))?;
            let sol = rho_opt::solve_p1_with_grid(&s, rt.cfg.solver.grid_points)?;
            let cmp = finite_mc::mc_ls_vs_fs(
                &s,
                rt.cfg.mc.n_antennas,
                &sol.alloc.p_bar,
                sol.rho_star,
                rt.cfg.solver.fs_grid_step,
                rt.trials,
                rt.seed,
            )?;
            let ls = rt.log_base.convert(cmp.mean_rate_ls);
            let fs_rate = rt.log_base.convert(cmp.mean_rate_fs);
            wtr.serialize((db, ls, fs_rate, (fs_rate - ls) / ls))?;
        }
        let report = SweepReport {
            meta: rt.meta("p1"),
            n_antennas: rt.cfg.mc.n_antennas,
            trials: rt.trials,
            rows: points.len(),
        };
        rt.emit("p1", &report, Some(wtr.into_inner()?))
    } else {
        let snr_db = rt
            .cfg
            .scenario
            .snr_db
            .context("p1 needs scenario.snr_db or scenario.snr_db_sweep")?;
        let s = rt.scenario(rt.cfg.loading()?.to_vec(), snr_from_db(snr_db))?;
        let sol = rho_opt::solve_p1_with_grid(&s, rt.cfg.solver.grid_points)?;
        let report = P1Report {
            meta: rt.meta("p1"),
            snr_db,
            rho_star: sol.rho_star,
            lambda: sol.alloc.lambda,
            m_active: sol.alloc.m_active,
            p_bar: sol.alloc.p_bar.clone(),
            rate: rt.log_base.convert(sol.rate),
            residual: sol.residual,
        };
        rt.emit("p1", &report, None)
    }
}

#[derive(Serialize)]
struct ModeReport {
    mode_m: usize,
    served: Vec<usize>,
    loadings: Vec<f64>,
    beta_star: f64,
    rho_star: f64,
    p_bar: Vec<f64>,
    lambda: f64,
    mu: f64,
    rate: f64,
}

fn mode_report(rt: &Runtime, sol: &multimode::ModeSolution) -> ModeReport {
    ModeReport {
        mode_m: sol.mode_m,
        served: sol.served.clone(),
        loadings: sol.loadings.clone(),
        beta_star: sol.beta_star,
        rho_star: sol.p1.rho_star,
        p_bar: sol.p1.alloc.p_bar.clone(),
        lambda: sol.lambda,
        mu: sol.mu,
        rate: rt.log_base.convert(sol.rate),
    }
}

fn cmd_p2(rt: &Runtime) -> Result<()> {
    let l = rt.cfg.scenario.num_groups;
    if let Some(sweep) = rt.cfg.scenario.beta_sweep {
        // per-mode rate curves with the total loading split evenly
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = vec!["beta".into()];
        header.extend((1..=l).map(|m| format!("rate_mode_{m}")));
        header.push("best_mode".into());
        wtr.write_record(&header)?;
        let points = sweep.values()?;
        for &beta in &points {
            let per = beta / l as f64;
            let base = rt.scenario(vec![per; l], rt.cfg.snr()?)?;
            let bounds = LoadingBounds::new(vec![per; l])?;
            let mut row: Vec<String> = vec![beta.to_string()];
            let mut best = (1usize, f64::MIN);
            for m in 1..=l {
                let rate = rt
                    .log_base
                    .convert(multimode::solve_mode_binary(&base, &bounds, m)?.rate);
                if rate > best.1 {
                    best = (m, rate);
                }
                row.push(rate.to_string());
            }
            row.push(best.0.to_string());
            wtr.write_record(&row)?;
        }
        let report = SweepReport {
            meta: rt.meta("p2"),
            n_antennas: rt.cfg.mc.n_antennas,
            trials: rt.trials,
            rows: points.len(),
        };
        rt.emit("p2", &report, Some(wtr.into_inner()?))
    } else {
        let caps = rt.cfg.loading_max()?.to_vec();
        let base = rt.scenario(caps.clone(), rt.cfg.snr()?)?;
        let sol = multimode::solve_p2(&base, &LoadingBounds::new(caps)?)?;
        let report = P2Report {
            meta: rt.meta("p2"),
            winner: mode_report(rt, &sol),
        };
        rt.emit("p2", &report, None)
    }
}

#[derive(Serialize)]
struct P2Report {
    meta: Meta,
    winner: ModeReport,
}

#[derive(Serialize)]
struct P3Report {
    meta: Meta,
    winner: ModeReport,
    iterations: usize,
}

fn cmd_p3(rt: &Runtime) -> Result<()> {
    let caps = rt.cfg.loading_max()?.to_vec();
    let l = caps.len();
    let base = rt.scenario(caps.clone(), rt.cfg.snr()?)?;
    let out = multimode::solve_p3(&base, &LoadingBounds::new(caps)?, rt.early_break)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["iteration", "m", "skipped"]
        .map(String::from)
        .to_vec();
    header.extend((1..=l).map(|j| format!("eta_{j}")));
    header.extend(["beta_m_star", "beta_star", "rate"].map(String::from));
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for it in &out.trace {
        let mut row = vec![it.j.to_string(), it.m.to_string(), it.skipped.to_string()];
        for k in 0..l {
            row.push(opt(it.eta.as_ref().and_then(|e| e.get(k).copied())));
        }
        row.push(opt(it.beta_m_star));
        row.push(opt(it.beta_star));
        row.push(opt(it.rate.map(|r| rt.log_base.convert(r))));
        wtr.write_record(&row)?;
    }

    let report = P3Report {
        meta: rt.meta("p3"),
        winner: mode_report(rt, &out.winner),
        iterations: out.trace.len(),
    };
    rt.emit("p3", &report, Some(wtr.into_inner()?))
}

#[derive(Serialize)]
struct McReport {
    meta: Meta,
    n_antennas: usize,
    trials: usize,
    rho_star: f64,
    p_bar: Vec<f64>,
    limit_rate: f64,
    mean_rate: f64,
    std_error: f64,
}

fn cmd_mc(rt: &Runtime) -> Result<()> {
    let s = rt.scenario(rt.cfg.loading()?.to_vec(), rt.cfg.snr()?)?;
    let sol = rho_opt::solve_p1_with_grid(&s, rt.cfg.solver.grid_points)?;
    let summary = finite_mc::mc_expected_sum_rate(
        &s,
        rt.cfg.mc.n_antennas,
        &sol.alloc.p_bar,
        sol.rho_star,
        rt.trials,
        rt.seed,
    )?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["trial", "rate"])?;
    for (t, &r) in summary.per_trial_rate.iter().enumerate() {
        wtr.serialize((t, rt.log_base.convert(r)))?;
    }
    let report = McReport {
        meta: rt.meta("mc"),
        n_antennas: rt.cfg.mc.n_antennas,
        trials: rt.trials,
        rho_star: sol.rho_star,
        p_bar: sol.alloc.p_bar.clone(),
        limit_rate: rt.log_base.convert(sol.rate),
        mean_rate: rt.log_base.convert(summary.mean_rate),
        std_error: rt.log_base.convert(summary.std_error),
    };
    rt.emit("mc", &report, Some(wtr.into_inner()?))
}

#[derive(Serialize)]
struct GridCheck {
    beta_grid: f64,
    rate_grid: f64,
    beta_solver: f64,
    rate_solver: f64,
    beta_delta: f64,
    rate_delta: f64,
    beta_tol: f64,
    rate_tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ConvergencePoint {
    n_antennas: usize,
    mean_rel_deviation: f64,
}

#[derive(Serialize)]
struct ConvergenceCheck {
    trials: usize,
    points: Vec<ConvergencePoint>,
    decreasing: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    meta: Meta,
    grid_check: Option<GridCheck>,
    convergence: Option<ConvergenceCheck>,
    pass: bool,
}

fn cmd_validate(rt: &Runtime, beta_tol: f64, rate_tol: f64) -> Result<()> {
    let mut pass = true;

    let grid_check = if rt.cfg.scenario.loading_max.is_some() {
        let caps = rt.cfg.loading_max()?.to_vec();
        let base = rt.scenario(caps.clone(), rt.cfg.snr()?)?;
        let bounds = LoadingBounds::new(caps)?;
        let (beta_grid, rate_grid) =
            multimode::brute_force_p3(&base, &bounds, rt.cfg.solver.total_loading_step)?;
        let out = multimode::solve_p3(&base, &bounds, rt.early_break)?;
        let beta_delta = (beta_grid - out.winner.beta_star).abs();
        let rate_delta = (rate_grid - out.winner.rate).abs();
        let ok = beta_delta <= beta_tol && rate_delta <= rate_tol;
        pass &= ok;
        Some(GridCheck {
            beta_grid,
            rate_grid: rt.log_base.convert(rate_grid),
            beta_solver: out.winner.beta_star,
            rate_solver: rt.log_base.convert(out.winner.rate),
            beta_delta,
            rate_delta,
            beta_tol,
            rate_tol,
            pass: ok,
        })
    } else {
        None
    };

    let convergence = if rt.cfg.scenario.loading.is_some() {
        let s = rt.scenario(rt.cfg.loading()?.to_vec(), rt.cfg.snr()?)?;
        let sol = rho_opt::solve_p1_with_grid(&s, rt.cfg.solver.grid_points)?;
        let state = rci::asymptotics::evaluate(&s, sol.rho_star)?;
        let limits: Vec<f64> = (0..s.num_groups())
            .map(|j| sol.alloc.p_bar[j] * state.f[j])
            .collect();
        let mut points = Vec::new();
        for &n in &rt.cfg.mc.convergence_sizes {
            let mut dev_sum = 0.0;
            let mut dev_cnt = 0usize;
            for t in 0..rt.trials as u64 {
                let ch = finite_mc::sample_channel(n, &s, rt.seed, t)?;
                let rep = finite_mc::finite_sinr(&ch, &sol.alloc.p_bar, sol.rho_star, &s)?;
                for j in 0..s.num_groups() {
                    if limits[j] > 0.0 {
                        dev_sum += (rep.per_group_mean_sinr[j] - limits[j]).abs() / limits[j];
                        dev_cnt += 1;
                    }
                }
            }
            points.push(ConvergencePoint {
                n_antennas: n,
                mean_rel_deviation: dev_sum / dev_cnt.max(1) as f64,
            });
        }
        let decreasing = points
            .windows(2)
            .all(|w| w[1].mean_rel_deviation < w[0].mean_rel_deviation);
        pass &= decreasing;
        Some(ConvergenceCheck {
            trials: rt.trials,
            points,
            decreasing,
        })
    } else {
        None
    };

    if grid_check.is_none() && convergence.is_none() {
        bail!("validate needs scenario.loading_max (grid check) and/or scenario.loading (convergence)");
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["check", "measure", "value"])?;
    if let Some(g) = &grid_check {
        wtr.serialize(("grid", "beta_delta", g.beta_delta))?;
        wtr.serialize(("grid", "rate_delta", g.rate_delta))?;
    }
    if let Some(c) = &convergence {
        for p in &c.points {
            wtr.serialize((
                "convergence",
                format!("mean_rel_deviation_n{}", p.n_antennas),
                p.mean_rel_deviation,
            ))?;
        }
    }

    let report = ValidateReport {
        meta: rt.meta("validate"),
        grid_check,
        convergence,
        pass,
    };
    rt.emit("validate", &report, Some(wtr.into_inner()?))?;
    if !pass {
        bail!("validation checks failed; see the report for measured deltas");
    }
    println!("validate: all checks passed");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::P1(args) => cmd_p1(&Runtime::new(args)?),
        Command::P2(args) => cmd_p2(&Runtime::new(args)?),
        Command::P3(args) => cmd_p3(&Runtime::new(args)?),
        Command::Mc(args) => cmd_mc(&Runtime::new(args)?),
        Command::Validate {
            common,
            beta_tol,
            rate_tol,
        } => cmd_validate(&Runtime::new(common)?, *beta_tol, *rate_tol),
    }
}
