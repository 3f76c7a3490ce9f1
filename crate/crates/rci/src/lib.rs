//! Sum-rate optimization for regularized channel inversion precoding in
//! large multiuser MISO broadcast channels.
//!
//! The library works in the large-system regime where users and antennas
//! grow together: each user's SINR concentrates on a deterministic limit
//! driven by a scalar fixed point, the optimal power allocation becomes
//! water-filling over path-gain groups, and the regularization parameter
//! and group loadings reduce to low-dimensional root-finding problems. A
//! finite-size Monte Carlo simulator validates the asymptotic answers on
//! concrete random channels.
//!
//! Modules:
//! - [`scenario`]: the static problem instance (groups, loadings, SNR)
//! - [`asymptotics`]: fixed point, effective gains, derivatives, sum rate
//! - [`waterfill`]: closed-form power allocation at fixed regularization
//! - [`rho_opt`]: joint power/regularization optimum
//! - [`multimode`]: binary and fractional group-loading optimization
//! - [`finite_mc`]: random-channel simulator and finite-size oracles

pub mod asymptotics;
pub mod error;
pub mod finite_mc;
pub mod multimode;
pub mod rho_opt;
pub mod scenario;
pub mod waterfill;

pub use asymptotics::AsymptoticState;
pub use error::{RciError, Result};
pub use finite_mc::{ChannelBatch, FiniteSinrReport, McSummary};
pub use multimode::{LoadingBounds, ModeSolution, P3Outcome};
pub use rho_opt::P1Solution;
pub use scenario::Scenario;
pub use waterfill::PowerAllocation;
