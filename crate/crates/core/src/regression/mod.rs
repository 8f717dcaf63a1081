//! Coefficient estimation for underdetermined PDD systems `A c = b`: LASSO
//! by coordinate descent, Moore–Penrose utilities, and sparsity-promoting
//! D-MORPH (sD-MORPH) regression.

mod lasso;
mod metrics;
mod pinv;
mod sdmorph;

pub use lasso::{k_max, lasso, lasso_with, select_penalty, LassoFit, LassoOptions, PenaltySelection};
pub use metrics::r_squared;
pub use pinv::{pseudoinverse, Pseudoinverse};
pub use sdmorph::{dmorph_init, iteration_weights, sdmorph_fit, sdmorph_from_prior, RowSpaceSolver, SdMorphFit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which estimator produces the PDD coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lasso,
    #[default]
    SdMorph,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::SdMorph => "sdmorph",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "sdmorph" | "sd-morph" => Ok(Method::SdMorph),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Linear-algebra route for each sD-MORPH update. Both solve the same
/// stationarity conditions; `Svd` factors `Φ W` each iteration, `RowSpace`
/// works with an `(M−1) × (M−1)` system and is much cheaper when `M ≪ L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SdMorphSolver {
    Svd,
    #[default]
    RowSpace,
}

/// The linear system `A c = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl RegressionProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_system(&a, &b)?;
        Ok(Self { a, b })
    }
}

pub(crate) fn check_system(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::DimensionMismatch("design matrix is empty".into()));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "design matrix has {} rows but {} outputs",
            a.nrows(),
            b.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("design matrix".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("output vector".into()));
    }
    Ok(())
}

/// Knobs for LASSO penalty selection and the sD-MORPH iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdMorphConfig {
    /// Blend between the LASSO prior (λ) and the previous iterate (1 − λ).
    pub lambda: f64,
    /// Regularizer in the weights `1 / (|c_j| + ε)`.
    pub epsilon: f64,
    pub min_iters: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Relative singular-value cutoff for pseudoinverses and ranks.
    pub rank_tol: f64,
    /// Fixed absolute LASSO penalty; skips cross-validation when set.
    pub lasso_penalty: Option<f64>,
    pub cv_folds: usize,
    /// Candidate penalties as fractions of `k_max = 2 max_j |a_jᵀ b|`.
    pub cv_grid: Vec<f64>,
    pub seed: u64,
    /// Leave the constant coefficient unpenalized in LASSO.
    pub exempt_intercept: bool,
    pub solver: SdMorphSolver,
}

impl Default for SdMorphConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            epsilon: 1e-6,
            min_iters: 10,
            max_iters: 50,
            rel_tol: 1e-6,
            rank_tol: 1e-12,
            lasso_penalty: None,
            cv_folds: 5,
            cv_grid: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            seed: 0,
            exempt_intercept: false,
            solver: SdMorphSolver::RowSpace,
        }
    }
}

impl SdMorphConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.min_iters > self.max_iters {
            return bad(format!(
                "min_iters {} exceeds max_iters {}",
                self.min_iters, self.max_iters
            ));
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive".into());
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return bad("rank_tol must lie in (0, 1)".into());
        }
        if let Some(k) = self.lasso_penalty {
            if !(k >= 0.0 && k.is_finite()) {
                return bad(format!("lasso_penalty must be non-negative, got {k}"));
            }
        }
        if self.cv_grid.is_empty() {
            return bad("cv_grid must not be empty".into());
        }
        if self.cv_grid.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return bad("cv_grid entries must be non-negative".into());
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        Ok(())
    }

    pub(crate) fn lasso_options(&self) -> LassoOptions {
        LassoOptions {
            exempt_intercept: self.exempt_intercept,
            ..LassoOptions::default()
        }
    }
}

/// How the LASSO penalty of a fit is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyRule {
    /// Cross-validate over the configured grid (or use `lasso_penalty`).
    CrossValidate,
    /// `k = fraction · k_max(A, b)`; used when refitting at new designs.
    Fraction(f64),
}

/// Coefficients plus the diagnostics of the estimator that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    pub coefficients: DVector<f64>,
    pub penalty: PenaltySelection,
    /// Present for sD-MORPH fits.
    pub sdmorph: Option<SdMorphFit>,
}

/// Fits `A c = b` with the requested estimator.
pub fn fit_coefficients(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cfg: &SdMorphConfig,
    method: Method,
    rule: PenaltyRule,
    pinv: Option<&Pseudoinverse>,
) -> Result<CoefficientFit> {
    check_system(a, b)?;
    cfg.validate()?;
    let penalty = match rule {
        PenaltyRule::CrossValidate => select_penalty(a, b, cfg)?,
        PenaltyRule::Fraction(f) => {
            let kmax = k_max(a, b, cfg.exempt_intercept);
            PenaltySelection {
                k: f * kmax,
                fraction: f,
                cv_errors: Vec::new(),
            }
        }
    };
    let c0 = lasso_with(a, b, penalty.k, &cfg.lasso_options(), None)?.coefficients;
    match method {
        Method::Lasso => Ok(CoefficientFit {
            coefficients: c0,
            penalty,
            sdmorph: None,
        }),
        Method::SdMorph => {
            let owned;
            let pinv = match pinv {
                Some(p) => p,
                None => {
                    owned = Pseudoinverse::new(a, cfg.rank_tol)?;
                    &owned
                }
            };
            let fit = sdmorph_from_prior(a, b, pinv, c0, cfg)?;
            Ok(CoefficientFit {
                coefficients: fit.coefficients.clone(),
                penalty,
                sdmorph: Some(fit),
            })
        }
    }
}
