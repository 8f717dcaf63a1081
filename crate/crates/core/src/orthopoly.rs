//! Univariate orthonormal polynomials for a given probability measure, built
//! with the discretized Stieltjes procedure and evaluated by three-term
//! recurrence.

use crate::error::{Error, Result};
use crate::measures::Marginal;
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};

const BREAKDOWN_RATIO: f64 = 1e-14;

/// Orthonormal family `ψ_0 .. ψ_m` for one input measure.
///
/// The monic polynomials satisfy `p_{j+1} = (z − α_j) p_j − β_j p_{j−1}` and
/// `ψ_j = p_j / √h_j` with `h_j = ⟨p_j, p_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis1D {
    max_degree: usize,
    alpha: Vec<f64>,
    /// `beta[j-1]` holds β_j, j = 1..m−1.
    beta: Vec<f64>,
    norms: Vec<f64>,
    measure: Marginal,
}

/// Quadrature nodes and probability weights for `measure`; the weights are
/// renormalized to sum to one.
pub(crate) fn measure_rule(measure: &Marginal) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = measure.support();
    let (x, w) = GaussLegendre::new(DEFAULT_NODES).on_interval(lo, hi);
    let mut w: Vec<f64> = w.iter().zip(&x).map(|(w, &x)| w * measure.pdf(x)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (x, w)
}

impl OrthoBasis1D {
    pub fn build(measure: Marginal, m: usize) -> Result<Self> {
        measure.validate()?;
        let (x, w) = measure_rule(&measure);
        let q = x.len();
        let (lo, hi) = measure.support();
        let width = hi - lo;

        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m.saturating_sub(1));
        let mut norms = Vec::with_capacity(m + 1);

        let mut p_prev = vec![0.0; q];
        let mut p_cur = vec![1.0; q];
        let mut h_prev = 1.0;
        for j in 0..=m {
            let h: f64 = p_cur.iter().zip(&w).map(|(p, w)| w * p * p).sum();
            // β_j collapsing far below width² means the discrete measure has
            // run out of support points.
            let collapsed = j > 0 && h / h_prev < BREAKDOWN_RATIO * width * width;
            if !(h.is_finite() && h > 0.0) || collapsed {
                return Err(Error::DegenerateMeasure { degree: j, value: h });
            }
            norms.push(h);
            if j == m {
                break;
            }
            let a = p_cur
                .iter()
                .zip(&w)
                .zip(&x)
                .map(|((p, w), x)| w * x * p * p)
                .sum::<f64>()
                / h;
            let b = if j == 0 { 0.0 } else { h / h_prev };
            if j > 0 {
                beta.push(b);
            }
            alpha.push(a);
            let next: Vec<f64> = (0..q).map(|k| (x[k] - a) * p_cur[k] - b * p_prev[k]).collect();
            p_prev = std::mem::replace(&mut p_cur, next);
            h_prev = h;
        }
        Ok(Self {
            max_degree: m,
            alpha,
            beta,
            norms,
            measure,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn measure(&self) -> &Marginal {
        &self.measure
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Reassembles a basis from stored recurrence data (deserialization).
    pub fn from_parts(measure: Marginal, alpha: Vec<f64>, beta: Vec<f64>, norms: Vec<f64>) -> Result<Self> {
        let m = norms
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::DimensionMismatch("basis needs at least one norm".into()))?;
        if alpha.len() != m || beta.len() != m.saturating_sub(1) {
            return Err(Error::DimensionMismatch(format!(
                "recurrence lengths alpha={} beta={} for degree {m}",
                alpha.len(),
                beta.len()
            )));
        }
        if let Some((j, &h)) = norms.iter().enumerate().find(|(_, h)| !(**h > 0.0)) {
            return Err(Error::DegenerateMeasure { degree: j, value: h });
        }
        measure.validate()?;
        Ok(Self {
            max_degree: m,
            alpha,
            beta,
            norms,
            measure,
        })
    }

    /// `ψ_degree(z)`.
    pub fn eval(&self, degree: usize, z: f64) -> Result<f64> {
        if degree > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree,
                max: self.max_degree,
            });
        }
        let mut out = vec![0.0; degree + 1];
        self.eval_all_into(z, &mut out);
        Ok(out[degree])
    }

    /// Fills `out[j] = ψ_j(z)` for `j < out.len()` (at most `m + 1` values).
    pub fn eval_all_into(&self, z: f64, out: &mut [f64]) {
        let n = out.len().min(self.max_degree + 1);
        if n == 0 {
            return;
        }
        out[0] = 1.0;
        if n == 1 {
            return;
        }
        // Orthonormal recurrence: √β_{j+1} ψ_{j+1} = (z − α_j) ψ_j − √β_j ψ_{j−1},
        // with β_{j+1} = h_{j+1}/h_j.
        let mut prev = 0.0;
        let mut cur = 1.0;
        for j in 0..n - 1 {
            let s_next = (self.norms[j + 1] / self.norms[j]).sqrt();
            let s_cur = if j == 0 { 0.0 } else { self.beta[j - 1].sqrt() };
            let next = ((z - self.alpha[j]) * cur - s_cur * prev) / s_next;
            prev = cur;
            cur = next;
            out[j + 1] = cur;
        }
    }

    pub fn eval_all(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.max_degree + 1];
        self.eval_all_into(z, &mut out);
        out
    }

    /// Gram matrix `∫ ψ_j ψ_k f dz` under the 64-node rule.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let (x, w) = measure_rule(&self.measure);
        let m = self.max_degree;
        let mut g = vec![vec![0.0; m + 1]; m + 1];
        for (xk, wk) in x.iter().zip(&w) {
            let v = self.eval_all(*xk);
            for j in 0..=m {
                for k in 0..=m {
                    g[j][k] += wk * v[j] * v[k];
                }
            }
        }
        g
    }
}

pub fn build_basis(measure: Marginal, m: usize) -> Result<OrthoBasis1D> {
    OrthoBasis1D::build(measure, m)
}

pub fn eval_poly(basis: &OrthoBasis1D, degree: usize, z: f64) -> Result<f64> {
    basis.eval(degree, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::InputLaw;
    use approx::assert_relative_eq;

    fn max_gram_error(b: &OrthoBasis1D) -> f64 {
        let g = b.gram_matrix();
        let mut e: f64 = 0.0;
        for (j, row) in g.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let t = if j == k { 1.0 } else { 0.0 };
                e = e.max((v - t).abs());
            }
        }
        e
    }

    #[test]
    fn legendre_low_degrees() {
        let b = build_basis(Marginal::uniform(-1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(b.eval(0, 0.37).unwrap(), 1.0);
        assert_relative_eq!(b.eval(1, 0.4).unwrap(), 3f64.sqrt() * 0.4, epsilon = 1e-13);
        assert_relative_eq!(b.eval(2, 0.0).unwrap(), -(5f64.sqrt()) / 2.0, epsilon = 1e-13);

        let b = build_basis(Marginal::uniform(0.0, 1.0).unwrap(), 1).unwrap();
        for z in [0.0, 0.3, 0.9] {
            assert_relative_eq!(b.eval(1, z).unwrap(), 3f64.sqrt() * (2.0 * z - 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn degree_out_of_range() {
        let b = build_basis(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        assert!(matches!(
            b.eval(3, 0.5),
            Err(Error::DegreeOutOfRange { degree: 3, max: 2 })
        ));
    }

    #[test]
    fn unit_mean_inputs_are_orthonormal_to_degree_11() {
        let law = InputLaw::fluidized_bed();
        let means = InputLaw::FLUIDIZED_BED_MEANS;
        for (m, mean) in law.marginals().iter().zip(means) {
            let z = m.scaled(1.0 / mean).unwrap();
            let b = build_basis(z, 11).unwrap();
            let e = max_gram_error(&b);
            assert!(e < 1e-8, "{z:?}: gram error {e}");
            assert!(b.beta().iter().all(|&v| v > 0.0));
            assert!(b.norms().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn too_many_degrees_for_quadrature_breaks_down() {
        let r = build_basis(Marginal::uniform(0.0, 1.0).unwrap(), 70);
        assert!(matches!(r, Err(Error::DegenerateMeasure { .. })), "{r:?}");
    }

    /// Modified Gram–Schmidt on shifted monomials under the same discrete measure.
    fn gram_schmidt_values(measure: &Marginal, m: usize, pts: &[f64]) -> Vec<Vec<f64>> {
        let (x, w) = measure_rule(measure);
        let center = measure.mean();
        let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((a, b), w)| a * b * w).sum::<f64>();
        // Represent polynomials by their values at quadrature nodes and at pts.
        let mut basis_nodes: Vec<Vec<f64>> = Vec::new();
        let mut basis_pts: Vec<Vec<f64>> = Vec::new();
        for j in 0..=m {
            let mut vn: Vec<f64> = x.iter().map(|&t| (t - center).powi(j as i32)).collect();
            let mut vp: Vec<f64> = pts.iter().map(|&t| (t - center).powi(j as i32)).collect();
            for _ in 0..2 {
                for (bn, bp) in basis_nodes.iter().zip(&basis_pts) {
                    let c = ip(&vn, bn);
                    vn.iter_mut().zip(bn).for_each(|(v, b)| *v -= c * b);
                    vp.iter_mut().zip(bp).for_each(|(v, b)| *v -= c * b);
                }
            }
            let nrm = ip(&vn, &vn).sqrt();
            // Fix the sign so the leading coefficient is positive, as in the recurrence.
            vn.iter_mut().for_each(|v| *v /= nrm);
            vp.iter_mut().for_each(|v| *v /= nrm);
            basis_nodes.push(vn);
            basis_pts.push(vp);
        }
        basis_pts
    }

    #[test]
    fn recurrence_matches_gram_schmidt_at_degree_11() {
        let measure = Marginal::uniform(0.5, 1.5).unwrap();
        let b = build_basis(measure, 11).unwrap();
        let pts: Vec<f64> = (0..50).map(|k| 0.5 + k as f64 / 49.0).collect();
        let gs = gram_schmidt_values(&measure, 11, &pts);
        for (k, &z) in pts.iter().enumerate() {
            let v = b.eval(11, z).unwrap();
            assert!((v - gs[11][k]).abs() < 1e-7, "z={z} rec={v} gs={}", gs[11][k]);
        }
    }

    /// Monomial coefficients of ψ_j built from the recurrence.
    fn monomial_coeffs(b: &OrthoBasis1D, j: usize) -> Vec<f64> {
        let mut prev: Vec<f64> = vec![0.0];
        let mut cur: Vec<f64> = vec![1.0];
        for k in 0..j {
            let s_next = (b.norms()[k + 1] / b.norms()[k]).sqrt();
            let s_cur = if k == 0 { 0.0 } else { b.beta()[k - 1].sqrt() };
            let mut next = vec![0.0; cur.len() + 1];
            for (d, c) in cur.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= b.alpha()[k] * c;
            }
            for (d, c) in prev.iter().enumerate() {
                next[d] -= s_cur * c;
            }
            next.iter_mut().for_each(|v| *v /= s_next);
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn recurrence_matches_monomial_expansion_low_degree() {
        let measure = Marginal::truncated_normal(1.0, 0.1, 0.515, 1.485).unwrap();
        let b = build_basis(measure, 6).unwrap();
        for j in 0..=6 {
            let coeffs = monomial_coeffs(&b, j);
            for k in 0..25 {
                let z = 0.6 + 0.8 * k as f64 / 24.0;
                let direct = coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c);
                let rec = b.eval(j, z).unwrap();
                assert!((direct - rec).abs() < 1e-9 * rec.abs().max(1.0), "j={j} z={z}");
            }
        }
    }

    #[test]
    fn finite_differences_reveal_exact_degree() {
        let b = build_basis(Marginal::uniform(0.0, 2.0).unwrap(), 8).unwrap();
        let h = 0.1;
        for j in 0..=8 {
            let vals: Vec<f64> = (0..=j + 1).map(|k| b.eval(j, 0.2 + k as f64 * h).unwrap()).collect();
            let diff = |v: &[f64], order: usize| {
                let mut d = v.to_vec();
                for _ in 0..order {
                    d = d.windows(2).map(|w| w[1] - w[0]).collect();
                }
                d
            };
            let dj = diff(&vals, j);
            let dj1 = diff(&vals, j + 1);
            assert!(dj[0].abs() > 0.0);
            assert!(
                dj1[0].abs() <= 1e-6 * dj[0].abs(),
                "degree {j}: {} vs {}",
                dj1[0],
                dj[0]
            );
        }
    }
}
