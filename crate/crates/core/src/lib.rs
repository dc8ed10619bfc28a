//! Closed-form interference alignment for three-cell compounded MIMO
//! broadcast channels with mixed user classes.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense complex kernels (null spaces, Hermitian square roots,
//!   log-determinants, Gaussian sampling).
//! - [`channel`]: Kronecker-correlated channel synthesis with the conditional
//!   CSI-mismatch model.
//! - [`network`]: cell/antenna/stream bookkeeping and feasibility checks.
//! - [`dof`]: the outer-bound DoF program, its closed form, a brute-force
//!   oracle, and the minimum-antenna planner.
//! - [`beamformer`]: two-stage precoders (ICI nulling, XCI alignment) and
//!   receive combiners.
//! - [`simulator`]: Monte Carlo sum-rate evaluation and parameter sweeps.
//!
//! Cells, BSs and users are indexed from zero in the API. User `j` is served
//! by BS `j` (own message) and BS `j - 1` (cross message), with wraparound.

pub mod beamformer;
pub mod channel;
pub mod dof;
pub mod network;
pub mod numerics;
pub mod simulator;

pub use beamformer::{AlignmentReport, BeamformerSet, ChannelSelector, DesignError};
pub use channel::{ChannelSet, CorrelationModel, CorrelationSpec, CsiSpec, LinkChannel};
pub use dof::{AntennaPlan, DofProblem, DofSolution};
pub use network::{DemandMatrix, DerivedQuantities, FeasibilityReport, NetworkConfig};
pub use numerics::{ComplexMatrix, Tolerance};
pub use simulator::{RateSummary, SimulationSpec, TrialResult};
