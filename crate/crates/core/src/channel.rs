//! Kronecker-correlated MIMO channels with imperfect CSI.
//!
//! Per link the simulator draws the true i.i.d. channel `G ~ CN(0, 1)` and a
//! measurement error `E ~ CN(0, tau)`, forms the estimate `G + E`, and keeps
//! the MMSE-conditioned part `(G + E) / (1 + tau)` as the designer-known
//! channel. Both are then coloured as `R_r^{1/2} (.) R_t^{1/2}`.

use crate::network::NetworkConfig;
use crate::numerics::{self, complex_gaussian, ComplexMatrix, NumericsError, Tolerance};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("correlation coefficient magnitude must be below 1 (got {0})")]
    BadCoefficient(f64),
    #[error("CSI scale beta must be positive unless CSI is perfect")]
    BadCsi,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationModel {
    None,
    Exponential,
    Uniform,
}

/// Correlation at one end of a link, `r = magnitude * exp(j * phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideCorrelation {
    pub model: CorrelationModel,
    #[serde(default)]
    pub coeff: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SideCorrelation {
    pub const NONE: SideCorrelation = SideCorrelation {
        model: CorrelationModel::None,
        coeff: 0.0,
        phase: 0.0,
    };

    pub fn exponential(coeff: f64) -> Self {
        SideCorrelation {
            model: CorrelationModel::Exponential,
            coeff,
            phase: 0.0,
        }
    }

    pub fn uniform(coeff: f64) -> Self {
        SideCorrelation {
            model: CorrelationModel::Uniform,
            coeff,
            phase: 0.0,
        }
    }

    pub fn coefficient(&self) -> Complex64 {
        Complex64::from_polar(self.coeff, self.phase)
    }

    pub fn matrix(&self, n: usize) -> Result<ComplexMatrix, ChannelError> {
        correlation_matrix(n, self.model, self.coefficient())
    }
}

/// Transmit- and receive-side correlation of every link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub tx: SideCorrelation,
    pub rx: SideCorrelation,
}

/// Named correlation regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationPreset {
    Low,
    Medium,
    High,
}

impl CorrelationSpec {
    pub fn none() -> Self {
        CorrelationSpec {
            tx: SideCorrelation::NONE,
            rx: SideCorrelation::NONE,
        }
    }

    /// low: uncorrelated; medium: exponential 0.3 at Tx with uniform 0.9 at
    /// Rx; high: exponential 0.9 at Tx with uniform 0.9 at Rx.
    pub fn preset(p: CorrelationPreset) -> Self {
        match p {
            CorrelationPreset::Low => Self::none(),
            CorrelationPreset::Medium => CorrelationSpec {
                tx: SideCorrelation::exponential(0.3),
                rx: SideCorrelation::uniform(0.9),
            },
            CorrelationPreset::High => CorrelationSpec {
                tx: SideCorrelation::exponential(0.9),
                rx: SideCorrelation::uniform(0.9),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for side in [self.tx, self.rx] {
            if !(0.0..1.0).contains(&side.coeff) {
                return Err(ChannelError::BadCoefficient(side.coeff));
            }
        }
        Ok(())
    }
}

/// Exponential (`r^{|m-n|}` below the diagonal, conjugate above), uniform
/// (`r` off the diagonal) or identity correlation matrix of size `n`.
pub fn correlation_matrix(n: usize, model: CorrelationModel, r: Complex64) -> Result<ComplexMatrix, ChannelError> {
    if r.norm() >= 1.0 || !r.norm().is_finite() {
        return Err(ChannelError::BadCoefficient(r.norm()));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok(match model {
        CorrelationModel::None => DMatrix::identity(n, n),
        CorrelationModel::Exponential => DMatrix::from_fn(n, n, |m, k| {
            if m >= k {
                r.powu((m - k) as u32)
            } else {
                r.conj().powu((k - m) as u32)
            }
        }),
        CorrelationModel::Uniform => DMatrix::from_fn(n, n, |m, k| {
            if m == k {
                one
            } else if m > k {
                r
            } else {
                r.conj()
            }
        }),
    })
}

/// CSI error law `tau = beta * snr^{-alpha}`, or perfect CSI (`tau = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiSpec {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub perfect: bool,
}

impl CsiSpec {
    pub fn perfect() -> Self {
        CsiSpec {
            alpha: 0.0,
            beta: 0.0,
            perfect: true,
        }
    }

    pub fn imperfect(alpha: f64, beta: f64) -> Self {
        CsiSpec {
            alpha,
            beta,
            perfect: false,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.perfect || (self.beta > 0.0 && self.alpha >= 0.0) {
            Ok(())
        } else {
            Err(ChannelError::BadCsi)
        }
    }

    /// Per-entry error variance at the given linear SNR.
    pub fn error_variance(&self, snr_linear: f64) -> f64 {
        if self.perfect {
            0.0
        } else {
            self.beta * snr_linear.powf(-self.alpha)
        }
    }
}

/// Free-function form of [`CsiSpec::error_variance`].
pub fn error_variance(csi: &CsiSpec, snr_linear: f64) -> f64 {
    csi.error_variance(snr_linear)
}

/// One BS-to-user link: true channel and the designer's estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    /// `N_j x M_i` channel the signal actually passes through.
    pub true_h: ComplexMatrix,
    /// Channel known to the precoder/combiner design.
    pub known_h: ComplexMatrix,
    /// Per-entry variance `tau / (1 + tau)` of the uncorrelated error.
    pub err_cov_scale: f64,
}

impl LinkChannel {
    /// Realised estimation error `true_h - known_h`.
    pub fn error(&self) -> ComplexMatrix {
        &self.true_h - &self.known_h
    }
}

/// Square roots of the correlation matrices, cached per dimension.
#[derive(Debug, Clone)]
pub struct CorrelationFactors {
    tx: BTreeMap<usize, Option<ComplexMatrix>>,
    rx: BTreeMap<usize, Option<ComplexMatrix>>,
}

fn side_root(side: &SideCorrelation, n: usize, tol: &Tolerance) -> Result<Option<ComplexMatrix>, ChannelError> {
    if side.model == CorrelationModel::None {
        return Ok(None);
    }
    let r = side.matrix(n)?;
    Ok(Some(numerics::hermitian_sqrt(&r, tol)?))
}

impl CorrelationFactors {
    pub fn new(corr: &CorrelationSpec, tx_dims: &[usize], rx_dims: &[usize], tol: &Tolerance) -> Result<Self, ChannelError> {
        let mut tx = BTreeMap::new();
        for &m in tx_dims {
            if let std::collections::btree_map::Entry::Vacant(e) = tx.entry(m) {
                e.insert(side_root(&corr.tx, m, tol)?);
            }
        }
        let mut rx = BTreeMap::new();
        for &n in rx_dims {
            if let std::collections::btree_map::Entry::Vacant(e) = rx.entry(n) {
                e.insert(side_root(&corr.rx, n, tol)?);
            }
        }
        Ok(CorrelationFactors { tx, rx })
    }

    pub fn for_config(corr: &CorrelationSpec, config: &NetworkConfig, tol: &Tolerance) -> Result<Self, ChannelError> {
        Self::new(corr, &config.m_tx, &config.n_rx, tol)
    }

    fn colour(&self, n_rx: usize, m_tx: usize, g: &ComplexMatrix) -> ComplexMatrix {
        let rx = self.rx.get(&n_rx).expect("receive factor for this dimension");
        let tx = self.tx.get(&m_tx).expect("transmit factor for this dimension");
        let left = match rx {
            Some(s) => s * g,
            None => g.clone(),
        };
        match tx {
            Some(s) => left * s,
            None => left,
        }
    }

    /// Draws one link using the cached factors.
    pub fn draw_link<R: Rng + ?Sized>(&self, n_rx: usize, m_tx: usize, tau: f64, rng: &mut R) -> LinkChannel {
        let g = complex_gaussian(n_rx, m_tx, 1.0, rng);
        let e = complex_gaussian(n_rx, m_tx, tau, rng);
        let estimate = (&g + e).unscale(1.0 + tau);
        LinkChannel {
            true_h: self.colour(n_rx, m_tx, &g),
            known_h: self.colour(n_rx, m_tx, &estimate),
            err_cov_scale: tau / (1.0 + tau),
        }
    }
}

/// Draws a single `n_rx x m_tx` link with error variance `tau`.
pub fn draw_link<R: Rng + ?Sized>(
    n_rx: usize,
    m_tx: usize,
    corr: &CorrelationSpec,
    tau: f64,
    rng: &mut R,
    tol: &Tolerance,
) -> Result<LinkChannel, ChannelError> {
    assert!(tau >= 0.0, "error variance must be nonnegative");
    let factors = CorrelationFactors::new(corr, &[m_tx], &[n_rx], tol)?;
    Ok(factors.draw_link(n_rx, m_tx, tau, rng))
}

/// Every link of the network, indexed `[user][bs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub links: Vec<Vec<LinkChannel>>,
}

impl ChannelSet {
    pub fn link(&self, user: usize, bs: usize) -> &LinkChannel {
        &self.links[user][bs]
    }

    pub fn cells(&self) -> usize {
        self.links.len()
    }

    /// Draws all links with precomputed correlation factors. Links are drawn
    /// in `(user, bs)` row-major order from the one stream.
    pub fn draw_with<R: Rng + ?Sized>(config: &NetworkConfig, factors: &CorrelationFactors, tau: f64, rng: &mut R) -> Self {
        let links = (0..config.cells)
            .map(|j| {
                (0..config.cells)
                    .map(|i| factors.draw_link(config.n_rx[j], config.m_tx[i], tau, rng))
                    .collect()
            })
            .collect();
        ChannelSet { links }
    }
}

pub fn draw_channel_set<R: Rng + ?Sized>(
    config: &NetworkConfig,
    corr: &CorrelationSpec,
    tau: f64,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    let factors = CorrelationFactors::for_config(corr, config, &Tolerance::default())?;
    Ok(ChannelSet::draw_with(config, &factors, tau, rng))
}
