use nalgebra::{DMatrix, DVector, Dyn, SVD};

use crate::error::{Error, Result};

/// Moore–Penrose pseudoinverse kept in factored form `A⁺ = V_r Σ_r⁻¹ U_rᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudoinverse {
    u: DMatrix<f64>,
    inv_s: DVector<f64>,
    v: DMatrix<f64>,
    rows: usize,
    cols: usize,
}

impl Pseudoinverse {
    /// Singular values below `rank_tol · σ_max` are treated as zero.
    pub fn new(a: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("matrix passed to pseudoinverse".into()));
        }
        let (rows, cols) = a.shape();
        let svd = full_svd(a.clone())?;
        let u = svd.u.ok_or_else(|| Error::SvdFailure("missing U".into()))?;
        let v_t = svd.v_t.ok_or_else(|| Error::SvdFailure("missing V".into()))?;
        let s = svd.singular_values;
        let smax = s.amax();
        let keep: Vec<usize> = (0..s.len()).filter(|&i| smax > 0.0 && s[i] > rank_tol * smax).collect();
        let u_r = u.select_columns(&keep);
        let v_r = v_t.transpose().select_columns(&keep);
        let inv_s = DVector::from_iterator(keep.len(), keep.iter().map(|&i| 1.0 / s[i]));
        Ok(Self {
            u: u_r,
            inv_s,
            v: v_r,
            rows,
            cols,
        })
    }

    pub fn rank(&self) -> usize {
        self.inv_s.len()
    }

    /// Shape of the original matrix `A`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Dense `A⁺` (`cols × rows`).
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut vs = self.v.clone();
        for (j, mut col) in vs.column_iter_mut().enumerate() {
            col *= self.inv_s[j];
        }
        vs * self.u.transpose()
    }

    /// `A⁺ b`.
    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        let t = self.u.tr_mul(b).component_mul(&self.inv_s);
        &self.v * t
    }

    /// `A⁺ A x`, the projection onto the row space of `A`.
    pub fn row_project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.v * self.v.tr_mul(x)
    }

    /// `Φ x = (I − A⁺A) x`, the projection onto the null space of `A`.
    pub fn null_project(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.row_project(x)
    }

    /// Dense `Φ = I − A⁺A` (`cols × cols`).
    pub fn null_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.cols, self.cols) - &self.v * self.v.transpose()
    }

    /// `A⁺ b + Φ (x − A⁺ b)`: the point of the solution manifold closest to `x`.
    pub fn onto_manifold(&self, particular: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        particular + self.null_project(&(x - particular))
    }
}

/// SVD with the same convergence settings as `nalgebra`'s `svd`; a tighter
/// threshold can stall on exactly rank-deficient input and return garbage.
pub(crate) fn full_svd(a: DMatrix<f64>) -> Result<SVD<f64, Dyn, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("matrix passed to SVD".into()));
    }
    let (rows, cols) = a.shape();
    a.try_svd(true, true, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| Error::SvdFailure(format!("{rows}x{cols} matrix did not converge")))
}

pub fn pseudoinverse(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    Ok(Pseudoinverse::new(a, rank_tol)?.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_inverses() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pseudoinverse(&i3, 1e-12).unwrap() - &i3).amax() < 1e-15);
        let two = DMatrix::from_element(1, 1, 2.0);
        assert!((pseudoinverse(&two, 1e-12).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wide_full_row_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(5, 20, |_, _| rng.gen::<f64>() - 0.5);
        let p = pseudoinverse(&a, 1e-12).unwrap();
        assert!((&a * &p * &a - &a).amax() < 1e-9);
    }

    #[test]
    fn rejects_nan() {
        let a = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(Pseudoinverse::new(&a, 1e-12), Err(Error::NonFiniteInput(_))));
    }

    fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let left = DMatrix::from_fn(rows, rank, |_, _| rng.gen::<f64>() - 0.5);
        let right = DMatrix::from_fn(rank, cols, |_, _| rng.gen::<f64>() - 0.5);
        left * right
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn penrose_conditions(rows in 1usize..12, cols in 1usize..12, rank_frac in 0.2f64..1.0, seed in 0u64..1000) {
            let rank = ((rows.min(cols) as f64 * rank_frac).ceil() as usize).max(1);
            let a = low_rank(rows, cols, rank, seed);
            let pi = Pseudoinverse::new(&a, 1e-10).unwrap();
            let p = pi.matrix();
            let scale = a.amax().max(1.0) * p.amax().max(1.0);
            let tol = 1e-9 * scale * scale;
            prop_assert!((&a * &p * &a - &a).amax() < tol);
            prop_assert!((&p * &a * &p - &p).amax() < tol);
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!((&ap - ap.transpose()).amax() < tol);
            prop_assert!((&pa - pa.transpose()).amax() < tol);

            let phi = pi.null_projector();
            prop_assert!((&phi * &phi - &phi).amax() < 1e-9);
            prop_assert!((&a * &phi).amax() < 1e-9 * a.amax().max(1.0));
        }
    }
}
