use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::InputLaw;

/// Anything that maps an input vector to a scalar QoI.
pub trait QoiModel: Send + Sync {
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

/// Wraps a closure as a [`QoiModel`].
pub struct FnModel<F>(pub F);

impl<F> QoiModel for FnModel<F>
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// Counts calls to an inner model.
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicUsize,
}

impl<M: QoiModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<M: QoiModel> QoiModel for CountingModel<M> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(x)
    }
}

impl<T: QoiModel + ?Sized> QoiModel for &T {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Polynomial with interaction order 2 and degree 11.
    Poly2x11,
    /// `Poly2x11` plus a bounded sinusoid in `u2 · u3`.
    NonPoly,
}

const SCALE: f64 = 1400.0;

// Normalizers of the two degree-11 terms: 5 (u1 − 1) stays within ±0.84 on
// the X1 support.
const HIGH_DEGREE: f64 = 5.0;

/// Stand-in for the fluidized-bed thermal energy, J. With `u_i = x_i / μ_i`
/// (nominal means) and `v_i = u_i − 1`:
///
/// ```text
/// Q = 1400 [1 + 0.05 v1 + 0.45 v2 − 0.30 v3 − 0.05 v4 + 0.10 v5
///          + 0.08 v2² + 0.04 v3² − 0.03 v4²
///          + 0.06 v2 v3 + 0.02 v1 v4
///          + 0.01 (5 v1)^11 + 0.01 (5 v1)^9 v5²]
/// ```
///
/// `Q = 1400` at the nominal means. Increasing in `u2` and decreasing in `u3`
/// throughout the design envelope.
pub fn poly2x11(u: &[f64; 5]) -> f64 {
    let v: [f64; 5] = std::array::from_fn(|i| u[i] - 1.0);
    let h = HIGH_DEGREE * v[0];
    SCALE
        * (1.0 + 0.05 * v[0] + 0.45 * v[1] - 0.30 * v[2] - 0.05 * v[3]
            + 0.10 * v[4]
            + 0.08 * v[1] * v[1]
            + 0.04 * v[2] * v[2]
            - 0.03 * v[3] * v[3]
            + 0.06 * v[1] * v[2]
            + 0.02 * v[0] * v[3]
            + 0.01 * h.powi(11)
            + 0.01 * h.powi(9) * v[4] * v[4])
}

fn nonpoly(u: &[f64; 5]) -> f64 {
    poly2x11(u) + SCALE * 0.02 * (3.0 * u[1] * u[2]).sin()
}

/// A synthetic model on the fluidized-bed inputs in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub kind: SyntheticKind,
    pub means: [f64; 5],
    /// Per-input admissible range.
    pub domain: [(f64, f64); 5],
}

impl SyntheticModel {
    /// Uses the nominal means of [`InputLaw::fluidized_bed`]; the domain is the
    /// nominal support widened so that every design in the default box stays
    /// inside it.
    pub fn fluidized_bed(kind: SyntheticKind) -> Self {
        let law = InputLaw::fluidized_bed();
        let means = InputLaw::FLUIDIZED_BED_MEANS;
        // Extreme mean ratios over D = [0.625, 1.025] × [5e-4, 1.1e-3].
        let ratios = [
            (1.0, 1.0),
            (0.625 / 0.825, 1.025 / 0.825),
            (5.0e-4 / 8.0e-4, 1.1e-3 / 8.0e-4),
            (1.0, 1.0),
            (1.0, 1.0),
        ];
        let domain = std::array::from_fn(|i| {
            let (lo, hi) = law.marginals()[i].support();
            (lo * ratios[i].0, hi * ratios[i].1)
        });
        Self { kind, means, domain }
    }

    pub fn normalized(&self, x: &[f64]) -> Result<[f64; 5]> {
        if x.len() != 5 {
            return Err(Error::DimensionMismatch(format!(
                "synthetic model takes 5 inputs, got {}",
                x.len()
            )));
        }
        for (i, (&xi, &(lo, hi))) in x.iter().zip(&self.domain).enumerate() {
            let tol = 1e-12 * (hi - lo);
            if !(xi.is_finite() && xi >= lo - tol && xi <= hi + tol) {
                return Err(Error::OutOfSupport(format!("x{} = {xi} outside [{lo}, {hi}]", i + 1)));
            }
        }
        Ok(std::array::from_fn(|i| x[i] / self.means[i]))
    }
}

impl QoiModel for SyntheticModel {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let u = self.normalized(x)?;
        Ok(match self.kind {
            SyntheticKind::Poly2x11 => poly2x11(&u),
            SyntheticKind::NonPoly => nonpoly(&u),
        })
    }
}

/// Evaluates a synthetic model with the fluidized-bed means and domain.
pub fn synthetic_qoi(x: &[f64], kind: SyntheticKind) -> Result<f64> {
    SyntheticModel::fluidized_bed(kind).evaluate(x)
}

/// Plain Monte Carlo moment estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub samples: usize,
}

impl McMoments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Delta-method standard error of the sample standard deviation.
    pub fn se_sd(&self) -> f64 {
        let sd = self.sd();
        if sd > 0.0 {
            self.se_variance / (2.0 * sd)
        } else {
            0.0
        }
    }
}

const SHARD: usize = 8192;

/// `m` iid draws from `law`, evaluated in seeded shards (stream = shard
/// index) and reduced in order, so the result depends only on `seed`.
pub fn mc_moments(model: &dyn QoiModel, law: &InputLaw, m: usize, seed: u64) -> Result<McMoments> {
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "Monte Carlo needs at least 2 samples, got {m}"
        )));
    }
    let shards = m.div_ceil(SHARD);
    let values: Vec<Vec<f64>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let count = SHARD.min(m - s * SHARD);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let x = law.sample_iid(count, &mut rng);
            (0..count)
                .map(|r| {
                    let row: Vec<f64> = x.row(r).iter().copied().collect();
                    model.evaluate(&row)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = values.into_iter().flatten().collect();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in &y {
        let d2 = (v - mean).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - 1.0);
    let mu2 = m2 / n;
    let mu4 = m4 / n;
    let var_of_var = ((mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    Ok(McMoments {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        se_variance: var_of_var.sqrt(),
        samples: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Marginal;

    #[test]
    fn nominal_value() {
        let q = synthetic_qoi(&InputLaw::FLUIDIZED_BED_MEANS, SyntheticKind::Poly2x11).unwrap();
        assert_eq!(q, 1400.0);
    }

    #[test]
    fn monotone_near_nominal() {
        let means = InputLaw::FLUIDIZED_BED_MEANS;
        let fd = |i: usize| {
            let h = 1e-4 * means[i];
            let mut a = means;
            let mut b = means;
            a[i] += h;
            b[i] -= h;
            (synthetic_qoi(&a, SyntheticKind::Poly2x11).unwrap() - synthetic_qoi(&b, SyntheticKind::Poly2x11).unwrap())
                / (2.0 * h / means[i])
        };
        assert!((fd(1) - 1400.0 * 0.45).abs() < 1e-6);
        assert!((fd(2) + 1400.0 * 0.30).abs() < 1e-6);
    }

    #[test]
    fn positive_and_monotone_on_envelope() {
        let model = SyntheticModel::fluidized_bed(SyntheticKind::NonPoly);
        let grid = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / 6.0;
        for a in 0..=6 {
            for b in 0..=6 {
                for c in 0..=6 {
                    for d in 0..=6 {
                        for e in 0..=6 {
                            let x = [
                                grid(model.domain[0], a),
                                grid(model.domain[1], b),
                                grid(model.domain[2], c),
                                grid(model.domain[3], d),
                                grid(model.domain[4], e),
                            ];
                            let u = model.normalized(&x).unwrap();
                            assert!(poly2x11(&u) > 0.0);
                            assert!(model.evaluate(&x).unwrap() > 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_support() {
        let mut x = InputLaw::FLUIDIZED_BED_MEANS;
        x[0] = 1.0;
        assert!(matches!(
            synthetic_qoi(&x, SyntheticKind::Poly2x11),
            Err(Error::OutOfSupport(_))
        ));
        assert!(synthetic_qoi(&x[..4], SyntheticKind::Poly2x11).is_err());
    }

    #[test]
    fn mc_constant_and_uniform() {
        let law = InputLaw::new(vec![Marginal::uniform(0.0, 1.0).unwrap()]).unwrap();
        let c = mc_moments(&FnModel(|_: &[f64]| Ok(3.5)), &law, 1000, 1).unwrap();
        assert_eq!((c.mean, c.variance), (3.5, 0.0));

        let id = FnModel(|x: &[f64]| Ok(x[0]));
        let mc = mc_moments(&id, &law, 200_000, 9).unwrap();
        assert!((mc.mean - 0.5).abs() < 3.0 * mc.se_mean);
        assert!((mc.variance - 1.0 / 12.0).abs() < 3.0 * mc.se_variance);
        assert_eq!(mc, mc_moments(&id, &law, 200_000, 9).unwrap());
    }

    #[test]
    fn counting_model_counts() {
        let m = CountingModel::new(SyntheticModel::fluidized_bed(SyntheticKind::Poly2x11));
        for _ in 0..7 {
            m.evaluate(&InputLaw::FLUIDIZED_BED_MEANS).unwrap();
        }
        assert_eq!(m.calls(), 7);
    }
}
