//! Ground-truth dynamics at desk scale and dataset construction.

pub mod dataset;
pub mod l96;
pub mod qg;

pub use dataset::{build_dataset, AugmentedTrajectory, ChannelStats, SoadDataset};
pub use l96::{integrate_l96, l96_rhs, Lorenz96Config};
pub use qg::{integrate_qg, psi_to_q, vort2vel, vort2vel_adjoint, QgConfig};
