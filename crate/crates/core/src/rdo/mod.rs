//! Robust design optimization: the normalized mean / standard deviation
//! objective, a box-constrained Nelder–Mead search and the driver that
//! trains one surrogate and then optimizes on single-pass retrains.

mod nelder_mead;

pub use nelder_mead::{nelder_mead, nelder_mead_with, NelderMeadOptions, NmOutcome, NmRecord, Step};

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::InputLaw;
use crate::qoi::{Dataset, QoiModel};
use crate::regression::{r_squared, Method, SdMorphConfig};
use crate::surrogate::{
    transform_samples, Moments, PddBasis, PddSurrogate, SinglePassTrainer, TrainingSet, TransformVector,
};

/// Substituted for the objective when the surrogate mean is not positive.
pub const MEAN_PENALTY: f64 = 1e9;

/// Default weight pairs, from mean-only to spread-only.
pub const DEFAULT_WEIGHTS: [(f64, f64); 5] = [(1.0, 0.0), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.0, 1.0)];

/// Box of design variables; design dimension `k` sets the mean of input
/// `inputs[k]` (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    bounds: Vec<(f64, f64)>,
    inputs: Vec<usize>,
    n_inputs: usize,
}

impl DesignSpace {
    pub fn new(bounds: Vec<(f64, f64)>, inputs: Vec<usize>, n_inputs: usize) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != inputs.len() {
            return Err(Error::InvalidConfig(format!(
                "{} bounds for {} design inputs",
                bounds.len(),
                inputs.len()
            )));
        }
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "design bound {k} = [{lo}, {hi}] must be positive with lower < upper"
                )));
            }
        }
        for (k, &i) in inputs.iter().enumerate() {
            if i >= n_inputs || inputs[..k].contains(&i) {
                return Err(Error::InvalidConfig(format!(
                    "design input index {} is repeated or outside 1..={n_inputs}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            bounds,
            inputs,
            n_inputs,
        })
    }

    /// Means of `X2` and `X3` over `[0.625, 1.025] × [5e-4, 1.1e-3]`.
    pub fn fluidized_bed() -> Self {
        Self::new(vec![(0.625, 1.025), (5.0e-4, 1.1e-3)], vec![1, 2], 5).expect("static design space is valid")
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Zero-based input index of each design variable.
    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn check(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} entries, space has {}",
                d.len(),
                self.dim()
            )));
        }
        for (k, (&v, &(lo, hi))) in d.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::OutOfBounds(format!("d{} = {v} outside [{lo}, {hi}]", k + 1)));
            }
        }
        Ok(())
    }

    /// Input means at design `d`: `nominal` with design entries replaced.
    pub fn means_at(&self, d: &[f64], nominal: &[f64]) -> Result<Vec<f64>> {
        self.check(d)?;
        if nominal.len() != self.n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "{} nominal means for {} inputs",
                nominal.len(),
                self.n_inputs
            )));
        }
        let mut means = nominal.to_vec();
        for (&i, &v) in self.inputs.iter().zip(d) {
            means[i] = v;
        }
        Ok(means)
    }

    /// Law of the inputs at design `d`: each design input is rescaled so its
    /// mean moves from the nominal value to `d_k`.
    pub fn law_at(&self, nominal_law: &InputLaw, d: &[f64], nominal: &[f64]) -> Result<InputLaw> {
        let means = self.means_at(d, nominal)?;
        let factors: Vec<f64> = means.iter().zip(nominal).map(|(m, n)| m / n).collect();
        nominal_law.scaled(&factors)
    }
}

/// `r_i = 1/d_k` for design inputs, `1/nominal_i` elsewhere.
pub fn r_from_design(d: &[f64], nominal: &[f64], space: &DesignSpace) -> Result<TransformVector> {
    TransformVector::from_means(&space.means_at(d, nominal)?)
}

/// `w1·μ0/mean + w2·sd/σ0`. The ratios are formed first so the value at
/// `(mean, sd) = (μ0, σ0)` is exactly `w1 + w2`.
pub fn objective(mean: f64, sd: f64, w1: f64, w2: f64, mu0: f64, sigma0: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::NonPositiveMean(mean));
    }
    Ok(w1 * (mu0 / mean) + w2 * (sd / sigma0))
}

fn check_weights(w1: f64, w2: f64) -> Result<()> {
    if !(w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "weights ({w1}, {w2}) must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdoConfig {
    pub w1: f64,
    pub w2: f64,
    pub mu0: f64,
    pub sigma0: f64,
    pub nm: NelderMeadOptions,
    pub d0: Vec<f64>,
}

impl RdoConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights(self.w1, self.w2)?;
        if !(self.mu0.is_finite() && self.mu0 != 0.0 && self.sigma0.is_finite() && self.sigma0 != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scaling factors mu0 = {}, sigma0 = {} must be finite and nonzero",
                self.mu0, self.sigma0
            )));
        }
        self.nm.validate()
    }
}

/// Surrogate settings used to build the initial fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingPlan {
    /// Interaction order `S`.
    pub s: usize,
    /// Polynomial degree `m`.
    pub m: usize,
    /// Number of model runs `M`.
    pub samples: usize,
    pub seed: u64,
    pub method: Method,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        Self {
            s: 2,
            m: 11,
            samples: 200,
            seed: 0,
            method: Method::SdMorph,
        }
    }
}

/// Moments of the surrogate retrained at design `d`.
pub fn evaluate_design(
    d: &[f64],
    trainer: &SinglePassTrainer,
    nominal: &[f64],
    space: &DesignSpace,
) -> Result<Moments> {
    let r = r_from_design(d, nominal, space)?;
    Ok(trainer.retrain(&r)?.moments())
}

/// Everything shared by the weight cases: the initial fit at `d0`, its
/// training data and the scaling factors.
#[derive(Debug, Clone)]
pub struct RdoSetup {
    trainer: SinglePassTrainer,
    space: DesignSpace,
    nominal: Vec<f64>,
    d0: Vec<f64>,
    initial: Moments,
}

impl RdoSetup {
    /// Samples `plan.samples` LHS inputs from the law at `d0`, runs the model
    /// once per sample and fits the initial surrogate.
    #[allow(clippy::too_many_arguments)]
    pub fn from_model(
        model: &dyn QoiModel,
        nominal_law: &InputLaw,
        nominal: &[f64],
        space: DesignSpace,
        d0: &[f64],
        plan: &TrainingPlan,
        cfg: &SdMorphConfig,
    ) -> Result<Self> {
        let law = space.law_at(nominal_law, d0, nominal)?;
        let x = law.sample_lhs(plan.samples, plan.seed);
        let q = (0..x.nrows())
            .map(|l| {
                let row: Vec<f64> = x.row(l).iter().copied().collect();
                model.evaluate(&row)
            })
            .collect::<Result<Vec<_>>>()?;
        let data = Dataset::new(x, q)?;
        Self::from_dataset(&data, nominal_law, nominal, space, d0, plan, cfg)
    }

    /// Fits the initial surrogate on samples drawn at `d0`.
    pub fn from_dataset(
        data: &Dataset,
        nominal_law: &InputLaw,
        nominal: &[f64],
        space: DesignSpace,
        d0: &[f64],
        plan: &TrainingPlan,
        cfg: &SdMorphConfig,
    ) -> Result<Self> {
        let law = space.law_at(nominal_law, d0, nominal)?;
        let r = r_from_design(d0, nominal, &space)?;
        let basis = Arc::new(PddBasis::for_inputs(&law, &r, plan.s, plan.m)?);
        let train = TrainingSet::from_dataset(data, r)?;
        let surrogate = PddSurrogate::fit(basis, &train, cfg, plan.method)?;
        Self::from_surrogate(surrogate, train, cfg, nominal, space, d0)
    }

    /// Reuses a surrogate already fitted at `d0`.
    pub fn from_surrogate(
        surrogate: PddSurrogate,
        train: TrainingSet,
        cfg: &SdMorphConfig,
        nominal: &[f64],
        space: DesignSpace,
        d0: &[f64],
    ) -> Result<Self> {
        let r0 = r_from_design(d0, nominal, &space)?;
        if surrogate.r() != &r0 {
            return Err(Error::InvalidConfig(
                "surrogate was not fitted at the initial design d0".into(),
            ));
        }
        let initial = surrogate.moments();
        let method = surrogate.method();
        let trainer = SinglePassTrainer::new(surrogate, train, cfg.clone(), method)?;
        Ok(Self {
            trainer,
            space,
            nominal: nominal.to_vec(),
            d0: d0.to_vec(),
            initial,
        })
    }

    pub fn trainer(&self) -> &SinglePassTrainer {
        &self.trainer
    }

    pub fn surrogate(&self) -> &PddSurrogate {
        self.trainer.base()
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn nominal_means(&self) -> &[f64] {
        &self.nominal
    }

    pub fn d0(&self) -> &[f64] {
        &self.d0
    }

    /// Moments of the initial fit; these fix `μ0` and `σ0`.
    pub fn initial_moments(&self) -> Moments {
        self.initial
    }

    pub fn evaluate(&self, d: &[f64]) -> Result<Moments> {
        evaluate_design(d, &self.trainer, &self.nominal, &self.space)
    }

    /// Held-out R² of the surrogate retrained at `d`, scored against fresh
    /// model runs on `samples` LHS points drawn at `d`. Costs `samples` model
    /// calls; a diagnostic for how far single-pass retraining can be trusted.
    pub fn retrain_r2(
        &self,
        d: &[f64],
        model: &dyn QoiModel,
        nominal_law: &InputLaw,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let r = r_from_design(d, &self.nominal, &self.space)?;
        let surrogate = self.trainer.retrain(&r)?;
        let x = self
            .space
            .law_at(nominal_law, d, &self.nominal)?
            .sample_lhs(samples, seed);
        let predicted = surrogate.predict_many(&transform_samples(&x, &r)?)?;
        let actual = (0..x.nrows())
            .map(|l| {
                let row: Vec<f64> = x.row(l).iter().copied().collect();
                model.evaluate(&row)
            })
            .collect::<Result<Vec<_>>>()?;
        r_squared(predicted.as_slice(), &actual)
    }

    /// Run configuration for a weight pair, with `μ0`, `σ0` from the initial fit.
    pub fn config(&self, w1: f64, w2: f64, nm: &NelderMeadOptions) -> RdoConfig {
        RdoConfig {
            w1,
            w2,
            mu0: self.initial.mean,
            sigma0: self.initial.sd(),
            nm: nm.clone(),
            d0: self.d0.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub d: Vec<f64>,
    pub objective: f64,
    pub mean: f64,
    pub sd: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdoResult {
    pub w1: f64,
    pub w2: f64,
    pub d_star: Vec<f64>,
    pub objective: f64,
    pub mean: f64,
    pub sd: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
    /// Surrogate retrains requested by the optimizer (QoI model calls are
    /// zero after setup).
    pub evaluations: usize,
    /// Distinct designs actually retrained.
    pub retrains: usize,
}

/// Minimizes the objective for one weight pair on single-pass retrains of
/// the setup's surrogate.
pub fn run_rdo(setup: &RdoSetup, cfg: &RdoConfig) -> Result<RdoResult> {
    cfg.validate()?;
    setup.space.check(&cfg.d0)?;
    let mut cache: HashMap<Vec<u64>, (f64, f64, f64)> = HashMap::new();
    let mut failure: Option<Error> = None;
    let f = |d: &[f64]| -> (f64, (f64, f64)) {
        let key: Vec<u64> = d.iter().map(|v| v.to_bits()).collect();
        if let Some(&(obj, mean, sd)) = cache.get(&key) {
            return (obj, (mean, sd));
        }
        let (obj, mean, sd) = match setup.evaluate(d) {
            Ok(mo) => {
                let sd = mo.sd();
                match objective(mo.mean, sd, cfg.w1, cfg.w2, cfg.mu0, cfg.sigma0) {
                    Ok(v) => (v, mo.mean, sd),
                    Err(_) => (MEAN_PENALTY, mo.mean, sd),
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
                (f64::INFINITY, f64::NAN, f64::NAN)
            }
        };
        cache.insert(key, (obj, mean, sd));
        (obj, (mean, sd))
    };
    let out = nelder_mead_with(f, &cfg.d0, setup.space.bounds(), &cfg.nm)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let trajectory = out
        .trajectory
        .into_iter()
        .map(|r| TrajectoryPoint {
            iteration: r.iteration,
            d: r.point,
            objective: r.value,
            mean: r.payload.0,
            sd: r.payload.1,
            improved: r.improved,
        })
        .collect();
    let (mean, sd) = out.best_payload;
    Ok(RdoResult {
        w1: cfg.w1,
        w2: cfg.w2,
        d_star: out.best,
        objective: out.best_value,
        mean,
        sd,
        trajectory,
        converged: out.converged,
        evaluations: out.evaluations,
        retrains: cache.len(),
    })
}

/// One weight case of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoCase {
    pub w1: f64,
    pub w2: f64,
    pub result: Result<RdoResult>,
}

/// Runs every weight pair from the same initial fit. Cases may run
/// concurrently; the output follows the order of `weights`.
pub fn pareto_sweep(setup: &RdoSetup, weights: &[(f64, f64)], nm: &NelderMeadOptions) -> Vec<ParetoCase> {
    weights
        .par_iter()
        .map(|&(w1, w2)| ParetoCase {
            w1,
            w2,
            result: run_rdo(setup, &setup.config(w1, w2, nm)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        assert_eq!(objective(3.0, 2.0, 0.25, 0.75, 3.0, 2.0).unwrap(), 1.0);
        for (w1, w2) in DEFAULT_WEIGHTS {
            assert_eq!(
                objective(
                    1408.118688088361,
                    194.4486523229088,
                    w1,
                    w2,
                    1408.118688088361,
                    194.4486523229088
                )
                .unwrap(),
                1.0
            );
        }
        assert_eq!(objective(2.0, 5.0, 1.0, 0.0, 1.0, 7.0).unwrap(), 0.5);
        let v = objective(2133.37, 0.0, 1.0, 0.0, 1436.78, 1.0).unwrap();
        assert!((v - 0.6735).abs() < 5e-5, "{v}");
        assert_eq!(
            objective(0.0, 1.0, 1.0, 0.0, 1.0, 1.0),
            Err(Error::NonPositiveMean(0.0))
        );
        assert!(objective(-3.0, 1.0, 0.5, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn objective_monotone_in_mean_and_sd() {
        for &(w1, w2) in &DEFAULT_WEIGHTS {
            let base = objective(10.0, 2.0, w1, w2, 9.0, 1.5).unwrap();
            let up_mean = objective(10.0 + 1e-3, 2.0, w1, w2, 9.0, 1.5).unwrap();
            let up_sd = objective(10.0, 2.0 + 1e-3, w1, w2, 9.0, 1.5).unwrap();
            if w1 > 0.0 {
                assert!(up_mean < base);
            }
            if w2 > 0.0 {
                assert!(up_sd > base);
            }
        }
    }

    #[test]
    fn r_from_nominal_design() {
        let space = DesignSpace::fluidized_bed();
        let nominal = InputLaw::FLUIDIZED_BED_MEANS;
        let r = r_from_design(&[0.825, 8.0e-4], &nominal, &space).unwrap();
        let expect = [1.0 / 0.12, 1.0 / 0.825, 1.0 / 8e-4, 1.0 / 1e-3, 1.0 / 7.35e-6];
        assert_eq!(r.as_slice(), &expect);

        for d in [[0.625, 5.0e-4], [1.025, 1.1e-3]] {
            let r = r_from_design(&d, &nominal, &space).unwrap();
            assert!(r.as_slice().iter().all(|v| v.is_finite()));
            let x = space.means_at(&d, &nominal).unwrap();
            let z = crate::surrogate::transform_x_to_z(&x, &r).unwrap();
            assert!(z.iter().all(|&v| (v - 1.0).abs() < 1e-15), "{z:?}");
        }
        assert!(matches!(
            r_from_design(&[1.2, 8.0e-4], &nominal, &space),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn design_law_moves_means_and_keeps_z_law() {
        let space = DesignSpace::fluidized_bed();
        let nominal = InputLaw::FLUIDIZED_BED_MEANS;
        let law0 = InputLaw::fluidized_bed();
        let d = [1.0, 6.0e-4];
        let law = space.law_at(&law0, &d, &nominal).unwrap();
        assert!((law.marginals()[1].mean() - 1.0).abs() < 1e-12);
        assert!((law.marginals()[2].mean() - 6.0e-4).abs() < 1e-16);
        let r = r_from_design(&d, &nominal, &space).unwrap();
        let r0 = r_from_design(&[0.825, 8.0e-4], &nominal, &space).unwrap();
        let z = law.scaled(r.as_slice()).unwrap();
        let z0 = law0.scaled(r0.as_slice()).unwrap();
        for (a, b) in z.marginals().iter().zip(z0.marginals()) {
            let (la, ua) = a.support();
            let (lb, ub) = b.support();
            assert!((la - lb).abs() < 1e-12 && (ua - ub).abs() < 1e-12);
        }
    }

    #[test]
    fn design_space_validation() {
        assert!(DesignSpace::new(vec![(1.0, 1.0)], vec![0], 2).is_err());
        assert!(DesignSpace::new(vec![(1.0, 2.0), (1.0, 2.0)], vec![0, 0], 2).is_err());
        assert!(DesignSpace::new(vec![(1.0, 2.0)], vec![2], 2).is_err());
        assert!(DesignSpace::new(vec![(1.0, 2.0)], vec![1], 2).is_ok());
    }

    #[test]
    fn config_validation() {
        let cfg = RdoConfig {
            w1: 0.7,
            w2: 0.3,
            mu0: 1.0,
            sigma0: 1.0,
            nm: NelderMeadOptions::default(),
            d0: vec![0.825, 8.0e-4],
        };
        assert!(cfg.validate().is_ok());
        assert!(RdoConfig {
            w2: 0.31,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(RdoConfig {
            sigma0: 0.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(RdoConfig {
            w1: -0.1,
            w2: 1.1,
            ..cfg
        }
        .validate()
        .is_err());
    }
}
