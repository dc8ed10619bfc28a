//! Monte Carlo rate evaluation.
//!
//! Each trial draws a channel set, designs the beamformers on the known
//! channels and evaluates the Gaussian-signalling rate of every user on the
//! true channels:
//!
//! `I_j = log2 det(J_j + s2 I + S_j) - log2 det(J_j + s2 I)`
//!
//! where `S_j` is the combined desired signal through the known channel and
//! `J_j` holds the leftover cross-message and inter-cell terms plus the
//! realised estimation-error leakage of every BS.

use crate::beamformer::{self, BeamformerSet, ChannelSelector, DesignError};
use crate::channel::{ChannelError, ChannelSet, CorrelationFactors, CorrelationModel, CorrelationSpec, CsiSpec};
use crate::network::{next, prev, FeasibilityReport, NetworkConfig};
use crate::numerics::{self, ComplexMatrix, NumericsError, Tolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("network is infeasible:\n{0}")]
    Infeasible(FeasibilityReport),
}

/// Converts dB to a linear power ratio, `10^(dB / 10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn default_noise_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub config: NetworkConfig,
    pub corr: CorrelationSpec,
    pub csi: CsiSpec,
    pub snr_points_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Receiver noise power; transmit power is `snr * noise_power`.
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
}

impl SimulationSpec {
    pub fn new(config: NetworkConfig, corr: CorrelationSpec, csi: CsiSpec) -> Self {
        SimulationSpec {
            config,
            corr,
            csi,
            snr_points_db: vec![30.0],
            trials: 1000,
            master_seed: 0,
            noise_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::Invalid("trials must be at least 1".into()));
        }
        if self.snr_points_db.is_empty() {
            return Err(SimError::Invalid("at least one SNR point is required".into()));
        }
        if let Some(x) = self.snr_points_db.iter().find(|x| !x.is_finite()) {
            return Err(SimError::Invalid(format!("SNR point {x} is not finite")));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(SimError::Invalid("noise power must be positive".into()));
        }
        if let Err(v) = self.config.validate() {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(SimError::Invalid(msg.join("; ")));
        }
        self.corr.validate()?;
        self.csi.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    /// Alignment residuals measured on the true channels.
    pub ici_residual: f64,
    pub xci_residual: f64,
}

impl TrialResult {
    /// Per-network average rate, the mean over users.
    pub fn average_rate(&self) -> f64 {
        self.sum_rate / self.per_user_rate.len() as f64
    }
}

fn outer(m: &ComplexMatrix) -> ComplexMatrix {
    m * m.adjoint()
}

/// Achievable rates of one trial. Designed-zero terms are still evaluated so
/// that estimation error shows up wherever it leaks.
pub fn trial_rate(bf: &BeamformerSet, links: &ChannelSet, snr_linear: f64, noise: f64) -> Result<TrialResult, NumericsError> {
    let cells = links.cells();
    let power = snr_linear * noise;
    let mut per_user_rate = Vec::with_capacity(cells);
    for j in 0..cells {
        let u = &bf.u[j];
        let d = u.ncols();
        if d == 0 {
            per_user_rate.push(0.0);
            continue;
        }
        let uh = u.adjoint();
        let p = prev(j, cells);
        let mut signal = ComplexMatrix::zeros(d, d);
        let mut interference = ComplexMatrix::identity(d, d).scale(noise);
        for i in 0..cells {
            let link = links.link(j, i);
            let known = &uh * &link.known_h;
            if i == p || i == j {
                signal += outer(&(&known * bf.message(i, j)));
            }
            let other = if i == p {
                bf.message(i, i)
            } else if i == j {
                bf.message(i, next(i, cells))
            } else {
                bf.v_full[i].clone()
            };
            interference += outer(&(&known * other)).scale(power);
            interference += outer(&(&uh * link.error() * &bf.v_full[i])).scale(power);
        }
        let total = &interference + signal.scale(power);
        let rate = numerics::log_det_hermitian(&total)? - numerics::log_det_hermitian(&interference)?;
        per_user_rate.push(rate.max(0.0));
    }
    Ok(TrialResult {
        sum_rate: per_user_rate.iter().sum(),
        per_user_rate,
        ici_residual: 0.0,
        xci_residual: 0.0,
    })
}

/// Empirical `p`-quantile with linear interpolation between order
/// statistics.
pub fn cdf_percentile(samples: &[f64], p: f64) -> f64 {
    assert!(!samples.is_empty(), "no samples");
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    sorted_percentile(&s, p)
}

fn sorted_percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    /// Sorted per-network average rates of the included trials.
    pub cdf: Vec<f64>,
    /// `mean_sum_rate / log2(snr)`; NaN at or below 0 dB.
    pub dof_estimate: f64,
    pub included_trials: usize,
    pub excluded_trials: usize,
}

impl RateSummary {
    pub fn from_trials(snr_db: f64, trials: &[Option<TrialResult>]) -> Self {
        let ok: Vec<&TrialResult> = trials.iter().flatten().collect();
        let mut cdf: Vec<f64> = ok.iter().map(|t| t.average_rate()).collect();
        cdf.sort_by(f64::total_cmp);
        let mean_sum_rate = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|t| t.sum_rate).sum::<f64>() / ok.len() as f64
        };
        let log_snr = db_to_linear(snr_db).log2();
        RateSummary {
            snr_db,
            mean_sum_rate,
            cdf,
            dof_estimate: if log_snr > 0.0 { mean_sum_rate / log_snr } else { f64::NAN },
            included_trials: ok.len(),
            excluded_trials: trials.len() - ok.len(),
        }
    }

    /// Quantile of the per-network average rate; the rate achieved with
    /// probability `q` is `percentile(1 - q)`.
    pub fn percentile(&self, p: f64) -> f64 {
        if self.cdf.is_empty() {
            return f64::NAN;
        }
        assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
        sorted_percentile(&self.cdf, p)
    }
}

/// Outcome of one SNR point: the summary and every trial (`None` when the
/// design failed).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrPoint {
    pub summary: RateSummary,
    pub trials: Vec<Option<TrialResult>>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the random stream for one trial.
pub fn trial_seed(master_seed: u64, snr_index: usize, trial: usize) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ snr_index as u64);
    splitmix64(b ^ (trial as u64).rotate_left(32))
}

/// Runs one trial end to end. Design failures give `Ok(None)`.
pub fn run_trial(
    spec: &SimulationSpec,
    factors: &CorrelationFactors,
    snr_index: usize,
    trial: usize,
    tol: &Tolerance,
) -> Result<Option<TrialResult>, DesignError> {
    let snr_db = spec.snr_points_db[snr_index];
    let snr = db_to_linear(snr_db);
    let tau = spec.csi.error_variance(snr);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.master_seed, snr_index, trial));
    let links = ChannelSet::draw_with(&spec.config, factors, tau, &mut rng);
    let bf = match beamformer::design(&links, &spec.config, &mut rng, tol) {
        Ok(bf) => bf,
        Err(DesignError::Infeasible(r)) => return Err(DesignError::Infeasible(r)),
        Err(_) => return Ok(None),
    };
    let Ok(mut result) = trial_rate(&bf, &links, snr, spec.noise_power) else {
        return Ok(None);
    };
    let report = beamformer::verify_alignment(&links, ChannelSelector::True, &bf, &spec.config, tol);
    result.ici_residual = report.ici_residual;
    result.xci_residual = report.xci_residual;
    Ok(Some(result))
}

/// All SNR points of `spec`, trials in parallel, results in trial order.
pub fn run(spec: &SimulationSpec) -> Result<Vec<SnrPoint>, SimError> {
    spec.validate()?;
    let report = spec.config.check_feasibility();
    if !report.passed() {
        return Err(SimError::Infeasible(report));
    }
    let tol = Tolerance::default();
    let factors = CorrelationFactors::for_config(&spec.corr, &spec.config, &tol)?;
    let mut points = Vec::with_capacity(spec.snr_points_db.len());
    for (s, &snr_db) in spec.snr_points_db.iter().enumerate() {
        let trials: Vec<Option<TrialResult>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &factors, s, t, &tol))
            .collect::<Result<_, _>>()
            .map_err(|e| match e {
                DesignError::Infeasible(r) => SimError::Infeasible(r),
                other => SimError::Invalid(other.to_string()),
            })?;
        points.push(SnrPoint {
            summary: RateSummary::from_trials(snr_db, &trials),
            trials,
        });
    }
    Ok(points)
}

/// Summaries only.
pub fn run_summaries(spec: &SimulationSpec) -> Result<Vec<RateSummary>, SimError> {
    Ok(run(spec)?.into_iter().map(|p| p.summary).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Sets every `M_i`.
    TxAntennas,
    /// Sets the receive-side coefficient; an uncorrelated receive side
    /// becomes uniform.
    RxCorrCoeff,
    /// Replaces the SNR list with the single value.
    Snr,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TxAntennas => "tx_antennas",
            SweepAxis::RxCorrCoeff => "rx_corr_coeff",
            SweepAxis::Snr => "snr",
        }
    }

    /// `spec` with this axis set to `value`.
    pub fn apply(&self, spec: &SimulationSpec, value: f64) -> Result<SimulationSpec, SimError> {
        let mut s = spec.clone();
        match self {
            SweepAxis::TxAntennas => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(SimError::Invalid(format!("antenna count {value} is not a whole number")));
                }
                s.config.m_tx = vec![value as usize; s.config.cells];
            }
            SweepAxis::RxCorrCoeff => {
                if !(0.0..1.0).contains(&value) {
                    return Err(SimError::Invalid(format!("correlation coefficient {value} is outside [0, 1)")));
                }
                if s.corr.rx.model == CorrelationModel::None {
                    s.corr.rx.model = CorrelationModel::Uniform;
                }
                s.corr.rx.coeff = value;
            }
            SweepAxis::Snr => s.snr_points_db = vec![value],
        }
        Ok(s)
    }
}

/// One grid point of a sweep; `result` is `Err` for points that could not
/// run (for example an infeasible antenna count).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub coords: Vec<(SweepAxis, f64)>,
    pub result: Result<Vec<SnrPoint>, SimError>,
}

/// Runs `spec` once per value on one axis.
pub fn sweep(spec: &SimulationSpec, axis: SweepAxis, values: &[f64]) -> Vec<SweepPoint> {
    sweep_grid(spec, &[(axis, values.to_vec())])
}

/// Cartesian grid over several axes; the last axis varies fastest.
pub fn sweep_grid(spec: &SimulationSpec, axes: &[(SweepAxis, Vec<f64>)]) -> Vec<SweepPoint> {
    let mut coords: Vec<Vec<(SweepAxis, f64)>> = vec![Vec::new()];
    for (axis, values) in axes {
        coords = coords
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push((*axis, v));
                    c
                })
            })
            .collect();
    }
    coords
        .into_iter()
        .map(|c| {
            let result = c
                .iter()
                .try_fold(spec.clone(), |s, (axis, v)| axis.apply(&s, *v))
                .and_then(|s| run(&s));
            SweepPoint { coords: c, result }
        })
        .collect()
}
