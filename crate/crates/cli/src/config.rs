//! Config file format and resolution into a [`SimulationSpec`].
//!
//! A config is a TOML document with `[network]`, `[correlation]`, `[csi]`,
//! `[simulation]` and `[sweep]` sections. The manifest written next to every
//! result file is also accepted; its embedded spec is used verbatim.

use std::path::Path;

use compia::channel::{CorrelationPreset, SideCorrelation};
use compia::simulator::SweepAxis;
use compia::{CorrelationSpec, CsiSpec, DemandMatrix, NetworkConfig, SimulationSpec};
use serde::{Deserialize, Serialize};

use crate::error::Failure;
use crate::output::RunManifest;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    network: NetworkSection,
    #[serde(default)]
    correlation: CorrelationSection,
    #[serde(default)]
    csi: CsiSection,
    #[serde(default)]
    simulation: SimulationSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerCell {
    All(usize),
    Each(Vec<usize>),
}

impl PerCell {
    fn expand(&self, cells: usize) -> Vec<usize> {
        match self {
            PerCell::All(x) => vec![*x; cells],
            PerCell::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    #[serde(default = "default_cells")]
    cells: usize,
    #[serde(default = "default_overlap")]
    overlap: usize,
    #[serde(default = "default_users")]
    users_per_cell: usize,
    m_tx: Option<PerCell>,
    n_rx: Option<PerCell>,
    demand: Option<Vec<Vec<usize>>>,
    own: Option<Vec<usize>>,
    cross: Option<Vec<usize>>,
}

fn default_cells() -> usize {
    3
}

fn default_overlap() -> usize {
    2
}

fn default_users() -> usize {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelationSection {
    preset: Option<CorrelationPreset>,
    tx: Option<SideCorrelation>,
    rx: Option<SideCorrelation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsiSection {
    perfect: Option<bool>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    #[serde(default = "default_snr")]
    snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_noise")]
    noise_power: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            snr_db: default_snr(),
            trials: default_trials(),
            seed: 0,
            noise_power: default_noise(),
        }
    }
}

fn default_snr() -> Vec<f64> {
    vec![30.0]
}

fn default_trials() -> usize {
    1000
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(default)]
    axes: Vec<AxisSpec>,
}

/// One sweep axis and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl AxisSpec {
    /// Parses `name=v1,v2,...`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (name, values) = s.split_once('=').ok_or_else(|| format!("expected NAME=V1,V2,... (got {s:?})"))?;
        let axis = match name.trim() {
            "tx_antennas" => SweepAxis::TxAntennas,
            "rx_corr_coeff" => SweepAxis::RxCorrCoeff,
            "snr" => SweepAxis::Snr,
            other => return Err(format!("unknown sweep axis {other:?} (expected tx_antennas, rx_corr_coeff or snr)")),
        };
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value {v:?} on axis {name}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AxisSpec { axis, values })
    }
}

/// A fully resolved run: what the manifest records and the hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub spec: SimulationSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<AxisSpec>,
}

/// Parsed input: either a TOML config or a manifest of an earlier run.
enum Source {
    Toml(Box<ConfigFile>),
    Manifest(Box<RunManifest>),
}

fn read_source(path: &Path) -> Result<Source, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: not a valid manifest: {e}", path.display())))?;
        return Ok(Source::Manifest(Box::new(m)));
    }
    let cfg: ConfigFile = toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(Source::Toml(Box::new(cfg)))
}

fn demand_of(net: &NetworkSection) -> Result<DemandMatrix, Failure> {
    let l = net.cells;
    match (&net.demand, &net.own, &net.cross) {
        (Some(rows), None, None) => {
            if rows.len() != l || rows.iter().any(|r| r.len() != l) {
                return Err(Failure::usage(format!("network.demand must be a {l} x {l} matrix")));
            }
            Ok(DemandMatrix::new(rows.clone()))
        }
        (None, Some(own), Some(cross)) => {
            if own.len() != l || cross.len() != l {
                return Err(Failure::usage(format!("network.own and network.cross must have {l} entries")));
            }
            Ok(DemandMatrix::from_own_cross(own, cross))
        }
        (None, None, None) => Err(Failure::usage("network needs either demand or own + cross")),
        _ => Err(Failure::usage("give either network.demand or network.own + network.cross, not both")),
    }
}

fn network_of(net: &NetworkSection) -> Result<NetworkConfig, Failure> {
    let demand = demand_of(net)?;
    let m = net.m_tx.as_ref().ok_or_else(|| Failure::usage("network.m_tx is required"))?;
    let n = net.n_rx.as_ref().ok_or_else(|| Failure::usage("network.n_rx is required"))?;
    Ok(NetworkConfig {
        cells: net.cells,
        overlap: net.overlap,
        users_per_cell: net.users_per_cell,
        m_tx: m.expand(net.cells),
        n_rx: n.expand(net.cells),
        demand,
    })
}

fn correlation_of(c: &CorrelationSection) -> CorrelationSpec {
    let mut spec = c.preset.map_or_else(CorrelationSpec::none, CorrelationSpec::preset);
    if let Some(tx) = c.tx {
        spec.tx = tx;
    }
    if let Some(rx) = c.rx {
        spec.rx = rx;
    }
    spec
}

fn csi_of(c: &CsiSection) -> CsiSpec {
    let imperfect = c.alpha.is_some() || c.beta.is_some();
    if c.perfect.unwrap_or(!imperfect) {
        CsiSpec::perfect()
    } else {
        CsiSpec::imperfect(c.alpha.unwrap_or(0.0), c.beta.unwrap_or(0.0))
    }
}

impl ConfigFile {
    fn resolve(&self) -> Result<ResolvedRun, Failure> {
        let config = network_of(&self.network)?;
        let spec = SimulationSpec {
            config,
            corr: correlation_of(&self.correlation),
            csi: csi_of(&self.csi),
            snr_points_db: self.simulation.snr_db.clone(),
            trials: self.simulation.trials,
            master_seed: self.simulation.seed,
            noise_power: self.simulation.noise_power,
        };
        Ok(ResolvedRun {
            spec,
            sweep: self.sweep.axes.clone(),
        })
    }
}

/// Loads a run description. Structural validation is left to the caller.
pub fn load_run(path: &Path) -> Result<ResolvedRun, Failure> {
    match read_source(path)? {
        Source::Toml(cfg) => cfg.resolve(),
        Source::Manifest(m) => Ok(m.run),
    }
}

/// Loads only the demand matrix; antenna counts may be absent.
pub fn load_demand(path: &Path) -> Result<DemandMatrix, Failure> {
    match read_source(path)? {
        Source::Toml(cfg) => demand_of(&cfg.network),
        Source::Manifest(m) => Ok(m.run.spec.config.demand),
    }
}

/// Command-line overrides applied on top of a loaded spec.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr: Option<Vec<f64>>,
    pub corr_preset: Option<CorrelationPreset>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut SimulationSpec) {
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(snr) = &self.snr {
            spec.snr_points_db = snr.clone();
        }
        if let Some(p) = self.corr_preset {
            spec.corr = CorrelationSpec::preset(p);
        }
        if self.alpha.is_some() || self.beta.is_some() {
            let (a0, b0) = if spec.csi.perfect { (0.0, 0.0) } else { (spec.csi.alpha, spec.csi.beta) };
            spec.csi = CsiSpec::imperfect(self.alpha.unwrap_or(a0), self.beta.unwrap_or(b0));
        }
    }
}
