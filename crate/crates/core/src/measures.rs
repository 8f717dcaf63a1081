//! Input probability laws: bounded marginals, their densities and moments,
//! and Latin hypercube sampling.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// A one-dimensional probability law with bounded support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// Normal(mean, sd) restricted to `[lower, upper]`. `mean` is the location
    /// of the parent normal.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
}

impl Marginal {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let m = Marginal::Uniform { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn truncated_normal(mean: f64, sd: f64, lower: f64, upper: f64) -> Result<Self> {
        let m = Marginal::TruncatedNormal { mean, sd, lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (lower, upper) = self.support();
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidMarginal(format!(
                "support [{lower}, {upper}] must be finite with lower < upper"
            )));
        }
        if let Marginal::TruncatedNormal { mean, sd, .. } = *self {
            if !(sd.is_finite() && sd > 0.0) {
                return Err(Error::InvalidMarginal(format!("sd must be positive, got {sd}")));
            }
            if !(mean >= lower && mean <= upper) {
                return Err(Error::InvalidMarginal(format!(
                    "mean {mean} outside [{lower}, {upper}]"
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lower, upper } | Marginal::TruncatedNormal { lower, upper, .. } => (lower, upper),
        }
    }

    /// Normalizing mass Φ(β) − Φ(α) of a truncated normal, together with Φ(α).
    fn tn_mass(mean: f64, sd: f64, lower: f64, upper: f64) -> (f64, f64) {
        let a = std_normal_cdf((lower - mean) / sd);
        let b = std_normal_cdf((upper - mean) / sd);
        (a, b - a)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lower, upper) = self.support();
        if x < lower || x > upper {
            return 0.0;
        }
        match *self {
            Marginal::Uniform { lower, upper } => 1.0 / (upper - lower),
            Marginal::TruncatedNormal { mean, sd, lower, upper } => {
                let (_, mass) = Self::tn_mass(mean, sd, lower, upper);
                std_normal_pdf((x - mean) / sd) / (sd * mass)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lower, upper) = self.support();
        if x <= lower {
            return 0.0;
        }
        if x >= upper {
            return 1.0;
        }
        match *self {
            Marginal::Uniform { lower, upper } => (x - lower) / (upper - lower),
            Marginal::TruncatedNormal { mean, sd, lower, upper } => {
                let (fa, mass) = Self::tn_mass(mean, sd, lower, upper);
                ((std_normal_cdf((x - mean) / sd) - fa) / mass).clamp(0.0, 1.0)
            }
        }
    }

    /// Quantile function. For the truncated normal: bisection on the CDF down
    /// to 1e-12, with the parent-normal quantile as the first probe.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let (lower, upper) = self.support();
        let u = u.clamp(0.0, 1.0);
        match *self {
            Marginal::Uniform { .. } => lower + u * (upper - lower),
            Marginal::TruncatedNormal { mean, sd, lower, upper } => {
                if u <= 0.0 {
                    return lower;
                }
                if u >= 1.0 {
                    return upper;
                }
                let (fa, mass) = Self::tn_mass(mean, sd, lower, upper);
                let parent = Normal::new(mean, sd).expect("validated sd");
                let p = (fa + u * mass).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                let mut probe = parent.inverse_cdf(p);
                if !probe.is_finite() {
                    probe = 0.5 * (lower + upper);
                }
                let (mut lo, mut hi) = (lower, upper);
                let tol = 1e-12 * (upper - lower).max(f64::MIN_POSITIVE);
                let mut x = probe.clamp(lower, upper);
                while hi - lo > tol {
                    if self.cdf(x) < u {
                        lo = x;
                    } else {
                        hi = x;
                    }
                    x = 0.5 * (lo + hi);
                }
                x
            }
        }
    }

    /// `∫ x^order f(x) dx` over the support by 64-node Gauss–Legendre.
    pub fn raw_moment(&self, order: u32) -> f64 {
        let (lower, upper) = self.support();
        let gl = GaussLegendre::new(DEFAULT_NODES);
        gl.integrate(lower, upper, |x| x.powi(order as i32) * self.pdf(x))
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
            Marginal::TruncatedNormal { .. } => self.raw_moment(1),
        }
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        (self.raw_moment(2) - mu * mu).max(0.0)
    }

    /// Law of `factor · X`. Scales the bounds and, for the truncated normal,
    /// both location and sd (the coefficient of variation is preserved).
    pub fn scaled(&self, factor: f64) -> Result<Marginal> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidMarginal(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let m = match *self {
            Marginal::Uniform { lower, upper } => Marginal::Uniform {
                lower: lower * factor,
                upper: upper * factor,
            },
            Marginal::TruncatedNormal { mean, sd, lower, upper } => Marginal::TruncatedNormal {
                mean: mean * factor,
                sd: sd * factor,
                lower: lower * factor,
                upper: upper * factor,
            },
        };
        m.validate()?;
        Ok(m)
    }
}

/// Joint law of independent inputs (product of marginals).
#[derive(Debug, Clone, PartialEq)]
pub struct InputLaw {
    marginals: Vec<Marginal>,
}

impl InputLaw {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidMarginal("input law needs at least one marginal".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    /// The five inputs of the fluidized-bed char combustion model: freeboard
    /// height, air inflow, glass-bead diameter, char diameter and char mass
    /// inflow. Truncated normals carry a 10% coefficient of variation.
    pub fn fluidized_bed() -> Self {
        let tn = |mean: f64, lower, upper| Marginal::TruncatedNormal {
            mean,
            sd: 0.1 * mean,
            lower,
            upper,
        };
        Self {
            marginals: vec![
                Marginal::Uniform {
                    lower: 0.10,
                    upper: 0.14,
                },
                tn(0.825, 0.425, 1.225),
                Marginal::Uniform {
                    lower: 2.0e-4,
                    upper: 1.4e-3,
                },
                Marginal::Uniform {
                    lower: 5.0e-4,
                    upper: 1.5e-3,
                },
                tn(7.35e-6, 1.35e-6, 1.35e-5),
            ],
        }
    }

    /// Nominal means listed for [`InputLaw::fluidized_bed`].
    pub const FLUIDIZED_BED_MEANS: [f64; 5] = [0.12, 0.825, 8.0e-4, 1.0e-3, 7.35e-6];

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn joint_pdf(&self, x: &[f64]) -> f64 {
        self.marginals.iter().zip(x).map(|(m, &xi)| m.pdf(xi)).product()
    }

    /// Law of `diag(factors) · X`.
    pub fn scaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} scale factors for {} inputs",
                factors.len(),
                self.dim()
            )));
        }
        let marginals = self
            .marginals
            .iter()
            .zip(factors)
            .map(|(m, &f)| m.scaled(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { marginals })
    }

    /// Latin hypercube sample, `m × N`. Each column places exactly one point
    /// in each of the `m` equiprobable strata of its marginal.
    pub fn sample_lhs(&self, m: usize, seed: u64) -> DMatrix<f64> {
        sample_lhs(self, m, seed)
    }

    /// Plain Monte Carlo sample, `m × N`.
    pub fn sample_iid(&self, m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(m, n);
        for l in 0..m {
            for (i, marg) in self.marginals.iter().enumerate() {
                out[(l, i)] = marg.inverse_cdf(rng.gen::<f64>());
            }
        }
        out
    }
}

pub fn sample_lhs(law: &InputLaw, m: usize, seed: u64) -> DMatrix<f64> {
    let n = law.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(m, n);
    let mut strata: Vec<usize> = (0..m).collect();
    for (i, marg) in law.marginals().iter().enumerate() {
        strata.shuffle(&mut rng);
        let (lower, upper) = marg.support();
        for (l, &s) in strata.iter().enumerate() {
            let u = (s as f64 + rng.gen::<f64>()) / m as f64;
            out[(l, i)] = marg.inverse_cdf(u).clamp(lower, upper);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn air_inflow() -> Marginal {
        Marginal::truncated_normal(0.825, 0.0825, 0.425, 1.225).unwrap()
    }

    /// Reference erf by its Maclaurin series (|x| small) and continued fraction
    /// for erfc (|x| large); independent of statrs.
    fn reference_erf(x: f64) -> f64 {
        if x.abs() < 3.0 {
            let mut term = x;
            let mut sum = x;
            let mut n = 0.0;
            while term.abs() > 1e-17 * sum.abs().max(1e-300) {
                n += 1.0;
                term *= -x * x / n;
                sum += term / (2.0 * n + 1.0);
            }
            2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            let ax = x.abs();
            let mut f = 0.0;
            for k in (1..200).rev() {
                f = (k as f64 / 2.0) / (ax + f);
            }
            let erfc = (-ax * ax).exp() / std::f64::consts::PI.sqrt() / (ax + f);
            (1.0 - erfc) * x.signum()
        }
    }

    fn reference_phi(x: f64) -> f64 {
        0.5 * (1.0 + reference_erf(x / std::f64::consts::SQRT_2))
    }

    #[test]
    fn uniform_pdf_values() {
        let u = Marginal::uniform(0.0, 2.0).unwrap();
        assert_eq!(u.pdf(1.0), 0.5);
        assert_eq!(u.pdf(3.0), 0.0);
        assert_eq!(u.pdf(-0.1), 0.0);
    }

    #[test]
    fn truncated_normal_pdf_matches_reference_erf() {
        let m = air_inflow();
        let (mu, sd, lo, hi) = (0.825, 0.0825, 0.425, 1.225);
        let alpha = (lo - mu) / sd;
        let beta = (hi - mu) / sd;
        let mass = reference_phi(beta) - reference_phi(alpha);
        let expected = (1.0 / (2.0 * std::f64::consts::PI).sqrt()) / (sd * mass);
        assert_relative_eq!(m.pdf(0.825), expected, max_relative = 1e-12);
        // Away from the mode, too.
        let x = 0.95;
        let z = (x - mu) / sd;
        let expected = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / (sd * mass);
        assert_relative_eq!(m.pdf(x), expected, max_relative = 1e-12);
        assert_eq!(m.pdf(0.4), 0.0);
    }

    #[test]
    fn invalid_marginals_rejected() {
        assert!(Marginal::uniform(1.0, 1.0).is_err());
        assert!(Marginal::uniform(2.0, 1.0).is_err());
        assert!(Marginal::truncated_normal(0.5, 0.0, 0.0, 1.0).is_err());
        assert!(Marginal::truncated_normal(1.5, 0.1, 0.0, 1.0).is_err());
        assert!(InputLaw::new(vec![]).is_err());
    }

    #[test]
    fn pdf_integrates_to_one_and_zeroth_moment() {
        let law = InputLaw::fluidized_bed();
        for m in law.marginals() {
            let (lo, hi) = m.support();
            let mass = GaussLegendre::new(DEFAULT_NODES).integrate(lo, hi, |x| m.pdf(x));
            assert!((mass - 1.0).abs() < 1e-10, "{m:?}: {mass}");
            assert!((m.raw_moment(0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_raw_moments() {
        assert_relative_eq!(Marginal::uniform(0.0, 1.0).unwrap().raw_moment(1), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            Marginal::uniform(-1.0, 1.0).unwrap().raw_moment(2),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn truncated_normal_second_moment_matches_monte_carlo() {
        let m = air_inflow();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.825, 0.0825).unwrap();
        // Rejection sampling from the parent normal: independent of inverse_cdf.
        use rand::distributions::Distribution;
        let n = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        let mut count = 0usize;
        while count < n {
            let x: f64 = normal.sample(&mut rng);
            if !(0.425..=1.225).contains(&x) {
                continue;
            }
            let v = x * x;
            s += v;
            s2 += v * v;
            count += 1;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let q = m.raw_moment(2);
        assert!((q - mean).abs() < 3.0 * se, "quad {q} mc {mean} se {se}");
    }

    #[test]
    fn inverse_cdf_round_trip() {
        // Grid between the 1e-6 and 1 - 1e-6 quantiles; beyond that the CDF
        // saturates in double precision.
        for m in InputLaw::fluidized_bed().marginals() {
            let (lo, hi) = m.support();
            let a = m.inverse_cdf(1e-6);
            let b = m.inverse_cdf(1.0 - 1e-6);
            for k in 1..=100 {
                let x = a + (b - a) * k as f64 / 101.0;
                let back = m.inverse_cdf(m.cdf(x));
                assert!((back - x).abs() < 1e-9 * (hi - lo), "{m:?} {x} {back}");
            }
        }
    }

    #[test]
    fn lhs_stratifies_each_dimension() {
        let law = InputLaw::new(vec![Marginal::uniform(0.0, 1.0).unwrap()]).unwrap();
        let s = law.sample_lhs(4, 11);
        let mut bins = [0usize; 4];
        for l in 0..4 {
            let x = s[(l, 0)];
            bins[((x * 4.0).ceil() as usize).clamp(1, 4) - 1] += 1;
        }
        assert_eq!(bins, [1, 1, 1, 1]);

        let law = InputLaw::fluidized_bed();
        let m = 37;
        let s = law.sample_lhs(m, 5);
        for (i, marg) in law.marginals().iter().enumerate() {
            let mut seen = vec![false; m];
            for l in 0..m {
                let u = marg.cdf(s[(l, i)]);
                let k = ((u * m as f64).floor() as usize).min(m - 1);
                assert!(!seen[k], "stratum {k} hit twice in dim {i}");
                seen[k] = true;
            }
        }
    }

    #[test]
    fn lhs_is_deterministic_and_in_bounds() {
        let law = InputLaw::fluidized_bed();
        let a = law.sample_lhs(50, 42);
        let b = law.sample_lhs(50, 42);
        assert_eq!(a, b);
        assert_ne!(a, law.sample_lhs(50, 43));
        for (i, marg) in law.marginals().iter().enumerate() {
            let (lo, hi) = marg.support();
            assert!(a.column(i).iter().all(|&x| x >= lo && x <= hi));
        }
    }

    #[test]
    fn lhs_empirical_cdf_close_to_truth() {
        let law = InputLaw::fluidized_bed();
        let m = 10_000;
        let s = law.sample_lhs(m, 3);
        for (i, marg) in law.marginals().iter().enumerate() {
            let mut col: Vec<f64> = s.column(i).iter().copied().collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ks = col
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let f = marg.cdf(x);
                    (f - k as f64 / m as f64)
                        .abs()
                        .max(((k + 1) as f64 / m as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.02, "dim {i}: KS {ks}");
        }
    }

    #[test]
    fn scaling_preserves_coefficient_of_variation() {
        let m = air_inflow().scaled(1.0 / 0.825).unwrap();
        match m {
            Marginal::TruncatedNormal { mean, sd, .. } => {
                assert_relative_eq!(mean, 1.0, epsilon = 1e-15);
                assert_relative_eq!(sd, 0.1, epsilon = 1e-15);
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(m.mean(), 1.0, epsilon = 1e-12);
        assert!(air_inflow().scaled(0.0).is_err());
    }
}
