//! Run configuration read from TOML. Every section is optional and defaults
//! to the fluidized-bed setup: five inputs, `S = 2`, `m = 11`, `M = 200`,
//! `λ = 0.2`, `d0 = (0.825, 8e-4)` and five weight pairs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{InputLaw, Marginal};
use crate::qoi::{QoiModel, SyntheticKind, SyntheticModel};
use crate::rdo::{DesignSpace, NelderMeadOptions, TrainingPlan, DEFAULT_WEIGHTS};
use crate::regression::SdMorphConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub surrogate: TrainingPlan,
    pub regression: SdMorphConfig,
    pub rdo: RdoSection,
    pub verify: VerifySection,
    pub io: IoSection,
}

/// One input marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarginalSpec {
    Uniform { lower: f64, upper: f64 },
    TruncatedNormal { mean: f64, sd: f64, lower: f64, upper: f64 },
}

impl MarginalSpec {
    pub fn to_marginal(self) -> Result<Marginal> {
        match self {
            MarginalSpec::Uniform { lower, upper } => Marginal::uniform(lower, upper),
            MarginalSpec::TruncatedNormal { mean, sd, lower, upper } => {
                Marginal::truncated_normal(mean, sd, lower, upper)
            }
        }
    }
}

impl From<Marginal> for MarginalSpec {
    fn from(m: Marginal) -> Self {
        match m {
            Marginal::Uniform { lower, upper } => MarginalSpec::Uniform { lower, upper },
            Marginal::TruncatedNormal { mean, sd, lower, upper } => {
                MarginalSpec::TruncatedNormal { mean, sd, lower, upper }
            }
        }
    }
}

/// Source of QoI values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Poly2x11,
    Nonpoly,
    /// Returns `problem.constant` everywhere.
    Constant,
    /// Values come from the CSV at `io.data`.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub inputs: Vec<MarginalSpec>,
    /// Means of the inputs at which `inputs` is stated.
    pub nominal_means: Vec<f64>,
    /// One-based input index of each design variable.
    pub design_inputs: Vec<usize>,
    pub design_bounds: Vec<[f64; 2]>,
    pub model: ModelKind,
    pub constant: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let space = DesignSpace::fluidized_bed();
        Self {
            inputs: InputLaw::fluidized_bed()
                .marginals()
                .iter()
                .map(|&m| m.into())
                .collect(),
            nominal_means: InputLaw::FLUIDIZED_BED_MEANS.to_vec(),
            design_inputs: space.inputs().iter().map(|i| i + 1).collect(),
            design_bounds: space.bounds().iter().map(|&(lo, hi)| [lo, hi]).collect(),
            model: ModelKind::Poly2x11,
            constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdoSection {
    pub weights: Vec<[f64; 2]>,
    pub d0: Vec<f64>,
    pub nm: NelderMeadOptions,
}

impl Default for RdoSection {
    fn default() -> Self {
        Self {
            weights: DEFAULT_WEIGHTS.iter().map(|&(a, b)| [a, b]).collect(),
            d0: vec![0.825, 8.0e-4],
            nm: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Design at which moments are checked; defaults to `rdo.d0`.
    pub design: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            design: None,
            samples: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Training data CSV (`x1..xN,Q`).
    pub data: Option<PathBuf>,
    /// Serialized surrogate.
    pub surrogate: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
}

/// Model selected by [`ProblemConfig::model`].
pub enum ConfiguredModel {
    Synthetic(SyntheticModel),
    Constant(f64),
}

impl QoiModel for ConfiguredModel {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self {
            ConfiguredModel::Synthetic(m) => m.evaluate(x),
            ConfiguredModel::Constant(c) => Ok(*c),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every section against the constraints of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let law = self.input_law()?;
        let space = self.design_space()?;
        let p = &self.problem;
        if p.nominal_means.len() != law.dim() {
            return Err(Error::InvalidConfig(format!(
                "{} nominal means for {} inputs",
                p.nominal_means.len(),
                law.dim()
            )));
        }
        if p.nominal_means.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::InvalidConfig("nominal means must be positive".into()));
        }
        for (i, (m, &mu)) in law.marginals().iter().zip(&p.nominal_means).enumerate() {
            if (m.mean() - mu).abs() > 1e-6 * mu {
                return Err(Error::InvalidConfig(format!(
                    "input {} has mean {} but nominal mean {mu}",
                    i + 1,
                    m.mean()
                )));
            }
        }
        if p.model != ModelKind::Dataset && p.model != ModelKind::Constant && law.dim() != 5 {
            return Err(Error::InvalidConfig("synthetic models take exactly 5 inputs".into()));
        }
        if !p.constant.is_finite() {
            return Err(Error::InvalidConfig("problem.constant must be finite".into()));
        }
        let s = &self.surrogate;
        if s.s == 0 || s.s > law.dim() || s.m < s.s {
            return Err(Error::InvalidTruncation {
                n: law.dim(),
                s: s.s,
                m: s.m,
            });
        }
        if s.samples < 2 {
            return Err(Error::InvalidConfig("surrogate.samples must be at least 2".into()));
        }
        self.regression.validate()?;
        space.check(&self.rdo.d0)?;
        if self.rdo.weights.is_empty() {
            return Err(Error::InvalidConfig("rdo.weights is empty".into()));
        }
        for &[w1, w2] in &self.rdo.weights {
            if !(w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-12) {
                return Err(Error::InvalidConfig(format!(
                    "weights ({w1}, {w2}) must be non-negative and sum to 1"
                )));
            }
        }
        self.rdo.nm.validate()?;
        if let Some(d) = &self.verify.design {
            space.check(d)?;
        }
        if self.verify.samples < 2 {
            return Err(Error::InvalidConfig("verify.samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn input_law(&self) -> Result<InputLaw> {
        InputLaw::new(
            self.problem
                .inputs
                .iter()
                .map(|s| s.to_marginal())
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let p = &self.problem;
        if p.design_inputs.contains(&0) {
            return Err(Error::InvalidConfig("design_inputs are one-based".into()));
        }
        DesignSpace::new(
            p.design_bounds.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            p.design_inputs.iter().map(|i| i - 1).collect(),
            p.inputs.len(),
        )
    }

    pub fn weights(&self) -> Vec<(f64, f64)> {
        self.rdo.weights.iter().map(|&[a, b]| (a, b)).collect()
    }

    /// The analytic model, or `None` when QoI values come from a dataset.
    pub fn model(&self) -> Option<ConfiguredModel> {
        match self.problem.model {
            ModelKind::Poly2x11 => Some(ConfiguredModel::Synthetic(SyntheticModel::fluidized_bed(
                SyntheticKind::Poly2x11,
            ))),
            ModelKind::Nonpoly => Some(ConfiguredModel::Synthetic(SyntheticModel::fluidized_bed(
                SyntheticKind::NonPoly,
            ))),
            ModelKind::Constant => Some(ConfiguredModel::Constant(self.problem.constant)),
            ModelKind::Dataset => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.input_law().unwrap(), InputLaw::fluidized_bed());
        assert_eq!(cfg.design_space().unwrap(), DesignSpace::fluidized_bed());
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_sections() {
        let cfg = RunConfig::from_toml(
            "[surrogate]\nsamples = 50\nmethod = \"lasso\"\n[rdo]\nweights = [[0.5, 0.5]]\n[rdo.nm]\nmax_evals = 30\n",
        )
        .unwrap();
        assert_eq!(cfg.surrogate.samples, 50);
        assert_eq!(cfg.surrogate.m, 11);
        assert_eq!(cfg.weights(), vec![(0.5, 0.5)]);
        assert_eq!(cfg.rdo.nm.max_evals, 30);
        assert_eq!(cfg.rdo.nm.reflection, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let e = RunConfig::from_toml("[surrogate]\nsamples = 5\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(RunConfig::from_toml("[rdo]\nweights = [[0.5, 0.6]]\n").is_err());
        assert!(RunConfig::from_toml("[rdo]\nd0 = [2.0, 8e-4]\n").is_err());
        assert!(RunConfig::from_toml("[surrogate]\ns = 6\n").is_err());
        assert!(RunConfig::from_toml("[regression]\nlambda = 2.0\n").is_err());
        assert!(RunConfig::from_toml("[problem]\nnominal_means = [1.0]\n").is_err());
        assert!(RunConfig::from_toml("[problem]\ndesign_inputs = [0, 3]\n").is_err());
    }

    #[test]
    fn marginal_specs() {
        let cfg = RunConfig::from_toml(
            r#"
[problem]
model = "constant"
constant = 2.5
nominal_means = [1.0, 2.0]
design_inputs = [2]
design_bounds = [[1.5, 2.5]]
inputs = [
  { dist = "uniform", lower = 0.5, upper = 1.5 },
  { dist = "truncated-normal", mean = 2.0, sd = 0.2, lower = 1.0, upper = 3.0 },
]
[rdo]
d0 = [2.0]
"#,
        )
        .unwrap();
        assert_eq!(cfg.input_law().unwrap().dim(), 2);
        assert_eq!(cfg.model().unwrap().evaluate(&[1.0, 2.0]).unwrap(), 2.5);
    }
}
