//! Run configuration: a sectioned TOML file whose values command-line flags can override.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use krylov_ensemble::chain::DEFAULT_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    /// Askey-scheme q-Gaussian, −1 ≤ q ≤ 1.
    Qgauss,
    /// Tsallis q-Gaussian, 1 < q < 3.
    Tsallis,
    Uniform,
    /// Explicit ensemble read from an `omega,g` CSV.
    Discrete,
    /// `spins` identical spins at the mean frequency (σ = 0).
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Auto,
    ClosedForm,
    Hankel,
    Stieltjes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CavityCoupled,
    EnsembleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FrameArg {
    Lab,
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Times in 1/σ, frequencies in σ.
    Scaled,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Eig,
    Laguerre,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributionConfig {
    pub family: Family,
    pub mean: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// `omega,g` CSV for the discrete family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<String>,
    /// Draw this many spins from a continuous family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Spin count of the homogeneous family.
    pub spins: usize,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig { family: Family::Gaussian, mean: 0.0, sigma: 1.0, q: None, ensemble: None, samples: None, spins: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub mode: Mode,
    /// Cavity frequency; the distribution centre when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    pub g_eff: f64,
    pub m: usize,
    pub frame: FrameArg,
    pub route: Route,
    pub method: MethodArg,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            mode: Mode::EnsembleOnly,
            omega_c: None,
            g_eff: 1.0,
            m: DEFAULT_DIM,
            frame: FrameArg::Rotating,
            route: Route::Auto,
            method: MethodArg::Eig,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Window end, in the output units.
    pub t_max: f64,
    pub points: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_max: 10.0, points: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Chain site the state starts on; the bright state when absent (site 1 with a cavity,
    /// site 0 without).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outputs: String,
    pub units: Units,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    pub targets: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            initial: None,
            seed: None,
            outputs: "out".into(),
            units: Units::Scaled,
            r_max: None,
            targets: vec![0.9, 0.5, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub distribution: DistributionConfig,
    pub chain: ChainConfig,
    pub time: TimeConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn initial_site(&self) -> usize {
        self.run.initial.unwrap_or(match self.chain.mode {
            Mode::CavityCoupled => 1,
            Mode::EnsembleOnly => 0,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Canonical text form; `parse(canonical())` reproduces the config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical text. The output directory is left
    /// out so that moving a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.outputs.clear();
        let digest = Sha256::digest(c.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
