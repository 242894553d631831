//! TOML scenario files.
//!
//! ```toml
//! mode = "depth"
//! d = 10
//! values = [0, 1, 2, 4, 8, 16, 32]
//! trials = 5000
//! seed = 7
//! noise_var = 1.0
//! assortment = "product-quantizer"
//!
//! [prior]
//! kind = "isotropic"
//! scale = 1.0
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::{Mode, Scenario, DEFAULT_SEED, DEFAULT_TRIALS};
use crate::assortment::AssortmentMethod;
use crate::error::{Error, Result};
use crate::generalprior::{MixtureComponent, PriorSpec};

const DEFAULT_LLOYD_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: String,
    pub d: usize,
    pub values: Vec<usize>,
    #[serde(default)]
    pub k_values: Vec<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "unit")]
    pub noise_var: f64,
    #[serde(default = "default_assortment")]
    pub assortment: String,
    pub lloyd_samples: Option<usize>,
    pub prior: Option<PriorConfig>,
}

fn unit() -> f64 {
    1.0
}

fn default_assortment() -> String {
    "product-quantizer".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    Isotropic { scale: f64 },
    Diagonal { variances: Vec<f64> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    Mixture { components: Vec<ComponentConfig> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic component variance.
    pub variance: f64,
}

impl PriorConfig {
    fn build(&self, d: usize) -> Result<PriorSpec> {
        match self {
            PriorConfig::Isotropic { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid("prior scale must be positive"));
                }
                PriorSpec::isotropic(d, *scale)
            }
            PriorConfig::Diagonal { variances } => PriorSpec::gaussian(
                DVector::zeros(variances.len()),
                DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
            ),
            PriorConfig::Uniform { lower, upper } => {
                PriorSpec::uniform_box(DVector::from_column_slice(lower), DVector::from_column_slice(upper))
            }
            PriorConfig::Mixture { components } => PriorSpec::mixture(
                components
                    .iter()
                    .map(|c| MixtureComponent {
                        weight: c.weight,
                        mean: DVector::from_column_slice(&c.mean),
                        cov: DMatrix::identity(c.mean.len(), c.mean.len()) * c.variance,
                    })
                    .collect(),
            ),
        }
    }
}

impl ScenarioConfig {
    pub fn into_scenario(self) -> Result<Scenario> {
        let prior = match &self.prior {
            Some(p) => p.build(self.d)?,
            None => PriorSpec::isotropic(self.d, 1.0)?,
        };
        let assortment_method = match self.assortment.as_str() {
            "closed-form" => AssortmentMethod::ClosedForm,
            "product-quantizer" => AssortmentMethod::ProductQuantizer,
            "lloyd-refined" => AssortmentMethod::LloydRefined {
                n_samples: self.lloyd_samples.unwrap_or(DEFAULT_LLOYD_SAMPLES),
            },
            other => return Err(Error::Config(format!("unknown assortment method {other:?}"))),
        };
        let scenario = Scenario {
            d: self.d,
            prior,
            noise_var: self.noise_var,
            mode: Mode::parse(&self.mode).map_err(|e| Error::Config(e.to_string()))?,
            values: self.values,
            k_values: self.k_values,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            master_seed: self.seed.unwrap_or(DEFAULT_SEED),
            assortment_method,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn parse_config(text: &str) -> Result<Scenario> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.into_scenario()
}

pub fn load_config(path: &Path) -> Result<Scenario> {
    parse_config(&std::fs::read_to_string(path)?)
}
