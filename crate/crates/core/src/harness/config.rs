use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amp::SpectralOptions;
use crate::ensembles::{EnsembleSpec, PriorSpec};
use crate::error::{Error, Result};
use crate::nonlinearities::{Denoiser, TestFunction};
use crate::spectral::{PowerDepth, DEFAULT_GAP_MARGIN};
use crate::state_evolution::QuadratureSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Universality,
    StateEvolution,
    Bbp,
    Interpolation,
    Concentration,
    PowerBound,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Onsager,
    Generalized,
}

/// How the per-iteration denoisers are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `tanh(mu_k / sigma_k^2 x)` from the state evolution at `gamma`.
    #[default]
    BayesTanh,
    /// The `denoiser` field, used as is.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepthSetting {
    Fixed(usize),
    Named(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl Default for DepthSetting {
    fn default() -> Self {
        DepthSetting::Named(AutoTag::Auto)
    }
}

impl DepthSetting {
    pub fn to_power_depth(self) -> PowerDepth {
        match self {
            DepthSetting::Fixed(d) => PowerDepth::Fixed(d),
            DepthSetting::Named(AutoTag::Auto) => PowerDepth::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `v^{[0]} = u0`.
    #[default]
    Independent,
    /// Sign-corrected top eigenvector of the spiked operator.
    Spectral {
        #[serde(default)]
        power_depth: DepthSetting,
    },
}

fn d_gap_depth() -> usize {
    300
}
fn d_deflation() -> usize {
    100
}
fn d_margin() -> f64 {
    DEFAULT_GAP_MARGIN
}
fn d_min_overlap() -> f64 {
    1e-3
}
fn d_true() -> bool {
    true
}

/// Tuning of the gap check and the spectral start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSettings {
    #[serde(default = "d_gap_depth")]
    pub gap_depth: usize,
    #[serde(default = "d_deflation")]
    pub deflation_rounds: usize,
    #[serde(default = "d_margin")]
    pub margin: f64,
    #[serde(default = "d_min_overlap")]
    pub min_overlap: f64,
    #[serde(default = "d_true")]
    pub eigen_memory: bool,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            gap_depth: d_gap_depth(),
            deflation_rounds: d_deflation(),
            margin: d_margin(),
            min_overlap: d_min_overlap(),
            eigen_memory: true,
        }
    }
}

impl SpectralSettings {
    pub fn options(&self, power_depth: PowerDepth) -> SpectralOptions {
        SpectralOptions {
            power_depth,
            gap_depth: self.gap_depth,
            deflation_rounds: self.deflation_rounds,
            margin: self.margin,
            min_overlap: self.min_overlap,
            eigen_memory: self.eigen_memory,
        }
    }
}

fn d_trials() -> usize {
    50
}
fn d_iterations() -> usize {
    5
}
fn d_ensemble() -> EnsembleSpec {
    EnsembleSpec::gaussian()
}
fn d_prior() -> PriorSpec {
    PriorSpec::Rademacher
}
fn d_phi() -> TestFunction {
    TestFunction::TanhProduct
}
fn d_records() -> String {
    "records.csv".into()
}
fn d_summary() -> String {
    "summary.json".into()
}
fn d_power_iterations() -> usize {
    50
}

/// One experiment, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_grid: Vec<usize>,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Law of the non-Gaussian noise `A`.
    #[serde(default = "d_ensemble")]
    pub ensemble: EnsembleSpec,
    #[serde(default = "d_prior")]
    pub prior: PriorSpec,
    /// SNR of the rank-one spike `gamma u0 u0^T`; 0 means no spike.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoiser: Option<Denoiser>,
    #[serde(default = "d_phi")]
    pub phi: TestFunction,
    #[serde(rename = "K", default = "d_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub spectral: SpectralSettings,
    /// Power iterations per instance of the `power_bound` experiment.
    #[serde(default = "d_power_iterations")]
    pub power_iterations: usize,
    /// Sample `A` from the Gaussian stream, so `A = G` in every trial.
    #[serde(default)]
    pub reuse_g_stream_for_a: bool,
    #[serde(default = "d_records")]
    pub records_path: String,
    #[serde(default = "d_summary")]
    pub summary_path: String,
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(experiment: ExperimentKind, n_grid: Vec<usize>) -> Self {
        Self {
            experiment,
            n_grid,
            trials: d_trials(),
            master_seed: 0,
            ensemble: d_ensemble(),
            prior: d_prior(),
            gamma: 0.0,
            gamma_grid: None,
            engine: Engine::default(),
            schedule: Schedule::default(),
            denoiser: None,
            phi: d_phi(),
            iterations: d_iterations(),
            init: InitSpec::default(),
            t_grid: None,
            quadrature: QuadratureSpec::default(),
            spectral: SpectralSettings::default(),
            power_iterations: d_power_iterations(),
            reuse_g_stream_for_a: false,
            records_path: d_records(),
            summary_path: d_summary(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Pretty JSON with all defaults filled in.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.n_grid.is_empty() {
            return bad("n_grid must be nonempty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly ascending".into());
        }
        if self.n_grid[0] < 2 {
            return bad("every n must be at least 2".into());
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        self.ensemble.validate().map_err(to_config)?;
        self.prior.validate().map_err(to_config)?;
        self.phi.validate().map_err(to_config)?;
        self.quadrature.validate().map_err(to_config)?;
        if self.schedule == Schedule::Fixed {
            let f = self
                .denoiser
                .as_ref()
                .ok_or_else(|| Error::Config("schedule \"fixed\" needs a denoiser".into()))?;
            for k in 0..self.iterations {
                crate::nonlinearities::CoordinateMap::check(f, k).map_err(to_config)?;
            }
        } else if self.needs_denoisers() && !(self.gamma > 1.0) {
            return bad(format!(
                "the bayes_tanh schedule needs gamma > 1, got {}",
                self.gamma
            ));
        }
        if let InitSpec::Spectral {
            power_depth: DepthSetting::Fixed(0),
        } = self.init
        {
            return bad("power_depth must be at least 1".into());
        }
        if matches!(self.init, InitSpec::Spectral { .. }) && self.engine == Engine::Generalized {
            return bad("spectral initialization runs the onsager engine".into());
        }
        match self.experiment {
            ExperimentKind::Bbp => {
                let grid = self
                    .gamma_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("bbp needs gamma_grid".into()))?;
                if grid.is_empty() || grid.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                    return bad("gamma_grid must be nonempty with finite values >= 0".into());
                }
            }
            ExperimentKind::Interpolation => {
                let grid = self
                    .t_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("interpolation needs t_grid".into()))?;
                if grid.is_empty() || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return bad("t_grid must be nonempty and within [0, 1]".into());
                }
            }
            ExperimentKind::StateEvolution => match self.init {
                InitSpec::Spectral { .. } => {
                    if !(self.gamma > 1.0) {
                        return bad(format!(
                            "spectral state evolution needs gamma > 1, got {}",
                            self.gamma
                        ));
                    }
                    if !matches!(self.phi, TestFunction::SePair { .. }) {
                        return bad("spectral state evolution needs phi of kind se_pair".into());
                    }
                    if self.engine == Engine::Generalized {
                        return bad("state evolution runs the onsager engine".into());
                    }
                }
                InitSpec::Independent => {
                    if self.prior != PriorSpec::Gaussian {
                        return bad("covariance predictions need the gaussian prior".into());
                    }
                    if self.gamma != 0.0 {
                        return bad("covariance predictions need gamma = 0".into());
                    }
                    if self.iterations == 0 {
                        return bad("covariance predictions need K >= 1".into());
                    }
                    if self.engine == Engine::Generalized {
                        return bad("state evolution runs the onsager engine".into());
                    }
                }
            },
            ExperimentKind::PowerBound => {
                if *self.n_grid.last().unwrap() > 256 {
                    return bad("power_bound needs n <= 256".into());
                }
                if self.power_iterations < 1 {
                    return bad("power_iterations must be at least 1".into());
                }
            }
            ExperimentKind::Universality | ExperimentKind::Concentration => {}
        }
        Ok(())
    }

    fn needs_denoisers(&self) -> bool {
        !matches!(
            self.experiment,
            ExperimentKind::Bbp | ExperimentKind::PowerBound
        )
    }
}

fn to_config(e: Error) -> Error {
    Error::Config(e.to_string())
}
