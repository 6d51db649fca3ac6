//! TOML model configuration.
//!
//! ```toml
//! [model]
//! dimension = 1          # optional, inferred from the jump law
//! jump_rate = 1.0
//! horizon = 1.0
//! # drift_bound, diffusion_bound, ellipticity: optional overrides
//!
//! [model.drift]          # optional, default zero
//! kind = "trig"          # constant | affine_clamped | trig
//! base = 0.0
//! amplitude = 0.3
//! frequency = 1.0
//! phase = 1.5707963267948966
//!
//! [model.diffusion]      # optional, default identity
//! kind = "constant"      # constant | affine_clamped | trig | matrix
//! value = 1.0
//!
//! [jump_law]
//! kind = "gaussian"      # gaussian | laplace | product_laplace | multivariate_gaussian
//! variance = 1.0
//!
//! [defaults]             # all optional
//! seed = 42
//! paths = 1000000
//! steps_per_unit = 256
//! x = [0.0]
//! tol = 1e-12
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::JumpLaw;
use crate::model::{Diffusion, Drift, ModelSpec, ScalarProfile};
use crate::simulate::DEFAULT_STEPS_PER_UNIT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub jump_law: LawSection,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub dimension: Option<usize>,
    #[serde(default)]
    pub jump_rate: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub drift_bound: Option<f64>,
    pub diffusion_bound: Option<f64>,
    pub ellipticity: Option<f64>,
    pub drift: Option<ProfileSection>,
    pub diffusion: Option<DiffusionSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Constant { value: f64 },
    AffineClamped { slope: f64, intercept: f64, lower: f64, upper: f64 },
    Trig { base: f64, amplitude: f64, frequency: f64, phase: f64 },
}

impl From<ProfileSection> for ScalarProfile {
    fn from(p: ProfileSection) -> Self {
        match p {
            ProfileSection::Constant { value } => ScalarProfile::Constant(value),
            ProfileSection::AffineClamped { slope, intercept, lower, upper } => {
                ScalarProfile::AffineClamped { slope, intercept, lower, upper }
            }
            ProfileSection::Trig { base, amplitude, frequency, phase } => {
                ScalarProfile::Trig { base, amplitude, frequency, phase }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionSection {
    Matrix(MatrixSection),
    Diagonal(ProfileSection),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    pub kind: MatrixKind,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSection {
    Gaussian { variance: f64 },
    Laplace { rate: f64 },
    ProductLaplace { rates: Vec<f64> },
    MultivariateGaussian { covariance: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps_per_unit: Option<usize>,
    pub x: Option<Vec<f64>>,
    pub tol: Option<f64>,
}

impl Defaults {
    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit.unwrap_or(DEFAULT_STEPS_PER_UNIT)
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().cloned()))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn law(&self) -> Result<JumpLaw> {
        let law = match &self.jump_law {
            LawSection::Gaussian { variance } => JumpLaw::gaussian(*variance),
            LawSection::Laplace { rate } => JumpLaw::laplace(*rate),
            LawSection::ProductLaplace { rates } => JumpLaw::product_laplace(rates.clone()),
            LawSection::MultivariateGaussian { covariance } => JumpLaw::multivariate_gaussian(matrix(covariance, "covariance")?),
        };
        law.map_err(|e| Error::Config(format!("jump_law: {e}")))
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        let law = self.law()?;
        let m = &self.model;
        let d = m.dimension.unwrap_or(law.dimension());
        let mut b = ModelSpec::builder(d).jump_law(law).jump_rate(m.jump_rate).horizon(m.horizon);
        if let Some(p) = m.drift {
            b = b.drift(Drift::Componentwise(p.into()));
        }
        match &m.diffusion {
            Some(DiffusionSection::Diagonal(p)) => b = b.diffusion(Diffusion::Diagonal((*p).into())),
            Some(DiffusionSection::Matrix(s)) => b = b.diffusion(Diffusion::Matrix(matrix(&s.matrix, "diffusion matrix")?)),
            None => {}
        }
        if let Some(v) = m.drift_bound {
            b = b.drift_bound(v);
        }
        if let Some(v) = m.diffusion_bound {
            b = b.diffusion_bound(v);
        }
        if let Some(v) = m.ellipticity {
            b = b.ellipticity(v);
        }
        b.build().map_err(|e| Error::Config(format!("model: {e}")))
    }

    /// Start point: `defaults.x` or the origin.
    pub fn start(&self, d: usize) -> Result<Vec<f64>> {
        match &self.defaults.x {
            Some(x) if x.len() != d => Err(Error::Config(format!("defaults.x has dimension {}, model has {d}", x.len()))),
            Some(x) => Ok(x.clone()),
            None => Ok(vec![0.0; d]),
        }
    }
}
