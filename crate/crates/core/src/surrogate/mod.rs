//! The PDD surrogate: measure-fixing input transformation, fitting,
//! prediction, analytic moments and single-pass retraining at new designs.

mod serialize;
mod transform;

pub use transform::{rescale_inputs, transform_samples, transform_x_to_z, TrainingSet, TransformVector};

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::{InputLaw, Marginal};
use crate::orthopoly::OrthoBasis1D;
use crate::pdd::{basis_row, build_index_set, design_matrix, MultiIndexSet};
use crate::regression::{
    fit_coefficients, CoefficientFit, Method, PenaltyRule, PenaltySelection, Pseudoinverse, SdMorphConfig,
};

/// Univariate bases on the transformed measures plus the PDD index set.
/// Built once and shared by every surrogate derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct PddBasis {
    bases: Vec<OrthoBasis1D>,
    idx: MultiIndexSet,
}

impl PddBasis {
    /// Bases for the law of `Z`.
    pub fn new(z_law: &InputLaw, s: usize, m: usize) -> Result<Self> {
        let idx = build_index_set(z_law.dim(), s, m)?;
        let bases = z_law
            .marginals()
            .iter()
            .map(|&mg| OrthoBasis1D::build(mg, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bases, idx })
    }

    /// Bases for `Z = diag(r) X` with `X ~ x_law`.
    pub fn for_inputs(x_law: &InputLaw, r: &TransformVector, s: usize, m: usize) -> Result<Self> {
        Self::new(&x_law.scaled(r.as_slice())?, s, m)
    }

    pub fn from_parts(bases: Vec<OrthoBasis1D>, idx: MultiIndexSet) -> Result<Self> {
        if bases.len() != idx.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} bases for {} variables",
                bases.len(),
                idx.n()
            )));
        }
        if let Some(b) = bases.iter().find(|b| b.max_degree() < idx.m()) {
            return Err(Error::DegreeOutOfRange {
                degree: idx.m(),
                max: b.max_degree(),
            });
        }
        Ok(Self { bases, idx })
    }

    pub fn bases(&self) -> &[OrthoBasis1D] {
        &self.bases
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.idx
    }

    pub fn dim(&self) -> usize {
        self.idx.n()
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Law of `Z` the bases are orthonormal under.
    pub fn measures(&self) -> Vec<Marginal> {
        self.bases.iter().map(|b| *b.measure()).collect()
    }

    pub fn design_matrix(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        design_matrix(&self.bases, &self.idx, z)
    }

    pub fn row(&self, z: &[f64]) -> Result<Vec<f64>> {
        basis_row(&self.bases, &self.idx, z)
    }

    /// Content hash of the recurrence data, measures and index set.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for b in &self.bases {
            for v in b.alpha().iter().chain(b.beta()).chain(b.norms()) {
                v.to_bits().hash(&mut h);
            }
            let params: Vec<f64> = match *b.measure() {
                Marginal::Uniform { lower, upper } => vec![lower, upper],
                Marginal::TruncatedNormal { mean, sd, lower, upper } => vec![mean, sd, lower, upper],
            };
            params.iter().for_each(|v| v.to_bits().hash(&mut h));
        }
        (self.idx.n(), self.idx.s(), self.idx.m()).hash(&mut h);
        self.idx.entries().hash(&mut h);
        h.finish()
    }
}

/// Output mean and variance of a surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `h(z; r) ≈ Σ c_i Ψ_i(z)` on fixed bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PddSurrogate {
    basis: Arc<PddBasis>,
    c: DVector<f64>,
    r: TransformVector,
    method: Method,
    /// LASSO penalty as a fraction of `k_max`, reused when retraining.
    penalty_fraction: f64,
}

impl PddSurrogate {
    pub fn new(
        basis: Arc<PddBasis>,
        c: DVector<f64>,
        r: TransformVector,
        method: Method,
        penalty_fraction: f64,
    ) -> Result<Self> {
        if c.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} basis functions",
                c.len(),
                basis.len()
            )));
        }
        if r.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "transform vector has {} entries for {} variables",
                r.len(),
                basis.dim()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("surrogate coefficients".into()));
        }
        Ok(Self {
            basis,
            c,
            r,
            method,
            penalty_fraction,
        })
    }

    /// Fits coefficients on `train` with cross-validated LASSO, followed by
    /// sD-MORPH when requested.
    pub fn fit(basis: Arc<PddBasis>, train: &TrainingSet, cfg: &SdMorphConfig, method: Method) -> Result<Self> {
        Ok(Self::fit_with_report(basis, train, cfg, method)?.0)
    }

    pub fn fit_with_report(
        basis: Arc<PddBasis>,
        train: &TrainingSet,
        cfg: &SdMorphConfig,
        method: Method,
    ) -> Result<(Self, CoefficientFit)> {
        if train.len() < 2 {
            return Err(Error::InsufficientData(format!("{} training samples", train.len())));
        }
        let h = train.h();
        if h.iter().all(|&v| v == h[0]) {
            // Constant outputs: the intercept alone solves the system exactly
            // and is the sparsest solution; penalized fits would shrink it.
            cfg.validate()?;
            let k0 = basis
                .index_set()
                .position(&[], &[])
                .expect("index set holds the constant term");
            let mut c = DVector::zeros(basis.len());
            c[k0] = h[0];
            let fit = CoefficientFit {
                coefficients: c.clone(),
                penalty: PenaltySelection {
                    k: 0.0,
                    fraction: 0.0,
                    cv_errors: Vec::new(),
                },
                sdmorph: None,
            };
            return Ok((Self::new(basis, c, train.r().clone(), method, 0.0)?, fit));
        }
        let a = basis.design_matrix(train.z())?;
        let fit = fit_coefficients(&a, h, cfg, method, PenaltyRule::CrossValidate, None)?;
        let s = Self::new(
            basis,
            fit.coefficients.clone(),
            train.r().clone(),
            method,
            fit.penalty.fraction,
        )?;
        Ok((s, fit))
    }

    pub fn basis(&self) -> &Arc<PddBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn r(&self) -> &TransformVector {
        &self.r
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn penalty_fraction(&self) -> f64 {
        self.penalty_fraction
    }

    /// Same bases and design, different coefficients.
    pub fn with_coefficients(&self, c: DVector<f64>) -> Result<Self> {
        Self::new(
            self.basis.clone(),
            c,
            self.r.clone(),
            self.method,
            self.penalty_fraction,
        )
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("prediction point".into()));
        }
        let row = self.basis.row(z)?;
        Ok(row.iter().zip(self.c.iter()).map(|(a, c)| a * c).sum())
    }

    /// Predictions at every row of `z`.
    pub fn predict_many(&self, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.basis.design_matrix(z)? * &self.c)
    }

    /// Mean `c_1` and variance `Σ_{i≥2} c_i²`.
    pub fn moments(&self) -> Moments {
        Moments {
            mean: self.c[0],
            variance: self.c.rows(1, self.c.len() - 1).norm_squared(),
        }
    }
}

/// Retrains a surrogate at new designs without new model runs. Caches the
/// design matrix of the original samples and its pseudoinverse, which do
/// not change with the design.
#[derive(Debug, Clone)]
pub struct SinglePassTrainer {
    base: PddSurrogate,
    train: TrainingSet,
    a: DMatrix<f64>,
    base_fit: DVector<f64>,
    pinv: Option<Pseudoinverse>,
    cfg: SdMorphConfig,
    method: Method,
}

impl SinglePassTrainer {
    pub fn new(base: PddSurrogate, train: TrainingSet, cfg: SdMorphConfig, method: Method) -> Result<Self> {
        cfg.validate()?;
        if train.r() != base.r() {
            return Err(Error::InvalidConfig(
                "training samples were transformed with a different design than the surrogate".into(),
            ));
        }
        let a = base.basis.design_matrix(train.z())?;
        let base_fit = &a * &base.c;
        let pinv = match method {
            Method::SdMorph => Some(Pseudoinverse::new(&a, cfg.rank_tol)?),
            Method::Lasso => None,
        };
        Ok(Self {
            base,
            train,
            a,
            base_fit,
            pinv,
            cfg,
            method,
        })
    }

    pub fn base(&self) -> &PddSurrogate {
        &self.base
    }

    pub fn training(&self) -> &TrainingSet {
        &self.train
    }

    pub fn config(&self) -> &SdMorphConfig {
        &self.cfg
    }

    /// Surrogate at design `r_new`. Outputs at the original samples are
    /// synthesized as `h̃^(l) = h(diag(r/r') z^(l); r)`, then the coefficients
    /// are refit as `c(r') = c(r) + fit(A, h̃ − A c(r))`.
    pub fn retrain(&self, r_new: &TransformVector) -> Result<PddSurrogate> {
        let z_new = rescale_inputs(self.train.z(), self.base.r(), r_new)?;
        let a_new = self.base.basis.design_matrix(&z_new)?;
        let h_tilde = a_new * &self.base.c;
        let resid = h_tilde - &self.base_fit;
        if resid.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("synthesized outputs".into()));
        }
        let c = if resid.iter().all(|&v| v == 0.0) {
            self.base.c.clone()
        } else {
            let fit = fit_coefficients(
                &self.a,
                &resid,
                &self.cfg,
                self.method,
                PenaltyRule::Fraction(self.base.penalty_fraction),
                self.pinv.as_ref(),
            )?;
            &self.base.c + fit.coefficients
        };
        PddSurrogate::new(
            self.base.basis.clone(),
            c,
            r_new.clone(),
            self.method,
            self.base.penalty_fraction,
        )
    }
}

/// One-off [`SinglePassTrainer::retrain`].
pub fn single_pass_retrain(
    s: &PddSurrogate,
    train: &TrainingSet,
    r_new: &TransformVector,
    cfg: &SdMorphConfig,
    method: Method,
) -> Result<PddSurrogate> {
    SinglePassTrainer::new(s.clone(), train.clone(), cfg.clone(), method)?.retrain(r_new)
}
