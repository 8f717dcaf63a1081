use nalgebra::{DMatrix, DVector};

use super::pinv::full_svd;
use super::{check_system, lasso_with, select_penalty, Pseudoinverse, SdMorphConfig, SdMorphSolver};
use crate::error::{Error, Result};

/// Result of an sD-MORPH run.
#[derive(Debug, Clone, PartialEq)]
pub struct SdMorphFit {
    pub coefficients: DVector<f64>,
    /// The LASSO prior `c0`.
    pub prior: DVector<f64>,
    /// Number of iterates produced, counting the initial projection.
    pub iterations: usize,
    pub converged: bool,
    /// Relative change between the last two iterates.
    pub last_change: f64,
}

/// Diagonal of the weight matrix: zero for the constant term, `1 / (|c_j| + ε)`
/// otherwise.
pub fn iteration_weights(c: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    DVector::from_iterator(
        c.len(),
        c.iter()
            .enumerate()
            .map(|(j, v)| if j == 0 { 0.0 } else { 1.0 / (v.abs() + epsilon) }),
    )
}

/// Projects the prior onto the solution manifold: `A⁺b + Φ (c0 − A⁺b)`.
pub fn dmorph_init(pinv: &Pseudoinverse, b: &DVector<f64>, c0: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, l) = pinv.shape();
    if b.len() != m || c0.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "expected b of length {m} and c0 of length {l}, got {} and {}",
            b.len(),
            c0.len()
        )));
    }
    let particular = pinv.apply(b);
    Ok(pinv.onto_manifold(&particular, c0))
}

/// Solves `min ½ δᵀ W δ  s.t.  A δ = r` with `W = diag(0, 1/d_1, …, 1/d_{L−1})`.
///
/// A Householder reflector maps the constant column onto `e₁`, which leaves
/// the unweighted coefficient in a single row. The remaining rows give an
/// `(M−1) × (M−1)` system `B D Bᵀ ν = s` that depends on `A` only through
/// quantities cached here.
#[derive(Debug, Clone)]
pub struct RowSpaceSolver {
    /// `H A[:, 1..]`.
    g: DMatrix<f64>,
    householder: Option<DVector<f64>>,
    /// `(H a₀)₁`; zero when the constant column vanishes.
    pivot: f64,
}

impl RowSpaceSolver {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let a0 = a.column(0).clone_owned();
        let rest = a.columns(1, a.ncols() - 1).clone_owned();
        let norm = a0.norm();
        if norm == 0.0 {
            return Self {
                g: rest,
                householder: None,
                pivot: 0.0,
            };
        }
        let sign = if a0[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = a0;
        v[0] += sign * norm;
        let mut solver = Self {
            g: rest,
            householder: Some(v),
            pivot: -sign * norm,
        };
        let mut g = std::mem::take(&mut solver.g);
        solver.reflect_columns(&mut g);
        solver.g = g;
        solver
    }

    fn reflect_columns(&self, x: &mut DMatrix<f64>) {
        if let Some(v) = &self.householder {
            let scale = 2.0 / v.norm_squared();
            let proj = v.tr_mul(x) * scale;
            x.ger(-1.0, v, &proj.row(0).transpose(), 1.0);
        }
    }

    fn reflect(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.householder {
            Some(v) => x - v * (2.0 * v.dot(x) / v.norm_squared()),
            None => x.clone(),
        }
    }

    /// Returns `δ` (length `L`) for weight reciprocals `d` (length `L − 1`).
    pub fn solve(&self, d: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.g.nrows();
        let l1 = self.g.ncols();
        if d.len() != l1 || r.len() != m {
            return Err(Error::DimensionMismatch("row-space solve".into()));
        }
        let hr = self.reflect(r);
        let first = usize::from(self.householder.is_some());
        let b = self.g.rows(first, m - first);
        let s = hr.rows(first, m - first).clone_owned();

        let mut bd = b.clone_owned();
        for (j, mut col) in bd.column_iter_mut().enumerate() {
            col *= d[j];
        }
        let nu = if m - first == 0 {
            DVector::zeros(0)
        } else {
            let k = &bd * b.transpose();
            solve_spd(k, &s)?
        };
        let rest = bd.tr_mul(&nu);
        let mut delta = DVector::zeros(l1 + 1);
        delta.rows_mut(1, l1).copy_from(&rest);
        if self.householder.is_some() {
            let top = self.g.row(0).transpose().dot(&rest);
            delta[0] = (hr[0] - top) / self.pivot;
        }
        Ok(delta)
    }
}

fn solve_spd(k: DMatrix<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = k.clone().cholesky() {
        let x = ch.solve(s);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let eig = k.symmetric_eigen();
    let emax = eig.eigenvalues.amax();
    if !(emax > 0.0 && emax.is_finite()) {
        return Ok(DVector::zeros(s.len()));
    }
    let qs = eig.eigenvectors.tr_mul(s);
    let scaled = DVector::from_iterator(
        qs.len(),
        qs.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(q, &e)| if e > 1e-13 * emax { q / e } else { 0.0 }),
    );
    Ok(&eig.eigenvectors * scaled)
}

/// One update by factoring `Φ W = E T Fᵀ`. Stationarity on the manifold
/// fixes the leading `r` components `F_rᵀ c = F_rᵀ p`; the constraint
/// `E_cᵀ c = E_cᵀ A⁺b` then determines the remaining ones.
fn svd_step(
    phi: &DMatrix<f64>,
    null_dim: usize,
    rank_tol: f64,
    particular: &DVector<f64>,
    p: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let l = p.len();
    let mut phiw = phi.clone();
    for (j, mut col) in phiw.column_iter_mut().enumerate() {
        col *= w[j];
    }
    let svd = full_svd(phiw)?;
    let mut order: Vec<usize> = (0..l).collect();
    let t = &svd.singular_values;
    order.sort_by(|&i, &j| t[j].total_cmp(&t[i]));
    let e = svd
        .u
        .ok_or_else(|| Error::SvdFailure("missing U".into()))?
        .select_columns(&order);
    let f = svd
        .v_t
        .ok_or_else(|| Error::SvdFailure("missing V".into()))?
        .transpose()
        .select_columns(&order);
    let tmax = t[order[0]];
    let numerical = order.iter().filter(|&&i| t[i] > rank_tol * tmax).count();
    let r = numerical.min(null_dim);

    let f_r = f.columns(0, r);
    let f_c = f.columns(r, l - r);
    let e_c = e.columns(r, l - r);
    let v = f_r.tr_mul(p);
    let rhs = e_c.tr_mul(&(particular - f_r * &v));
    let coupling = e_c.tr_mul(&f_c);
    let u = Pseudoinverse::new(&coupling, rank_tol)?.apply(&rhs);
    Ok(f_c * u + f_r * v)
}

/// Runs sD-MORPH from a given prior `c0`.
pub fn sdmorph_from_prior(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    pinv: &Pseudoinverse,
    c0: DVector<f64>,
    cfg: &SdMorphConfig,
) -> Result<SdMorphFit> {
    check_system(a, b)?;
    cfg.validate()?;
    if pinv.shape() != a.shape() {
        return Err(Error::DimensionMismatch("pseudoinverse does not match A".into()));
    }
    let l = a.ncols();
    let particular = pinv.apply(b);
    let mut c = pinv.onto_manifold(&particular, &c0);
    let null_dim = l - pinv.rank();
    if null_dim == 0 {
        return Ok(SdMorphFit {
            coefficients: c,
            prior: c0,
            iterations: 1,
            converged: true,
            last_change: 0.0,
        });
    }
    let target = a * &particular;

    let row_solver = match cfg.solver {
        SdMorphSolver::RowSpace => Some(RowSpaceSolver::new(a)),
        SdMorphSolver::Svd => None,
    };
    let phi = match cfg.solver {
        SdMorphSolver::Svd => Some(pinv.null_projector()),
        SdMorphSolver::RowSpace => None,
    };

    let mut iterations = 1;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    for i in 2..=cfg.max_iters {
        let p = &c0 * cfg.lambda + &c * (1.0 - cfg.lambda);
        let next = match (&row_solver, &phi) {
            (Some(rs), _) => {
                let d = DVector::from_iterator(l - 1, c.iter().skip(1).map(|v| v.abs() + cfg.epsilon));
                let r = &target - a * &p;
                p + rs.solve(&d, &r)?
            }
            (None, Some(phi)) => {
                let w = iteration_weights(&c, cfg.epsilon);
                svd_step(phi, null_dim, cfg.rank_tol, &particular, &p, &w)?
            }
            (None, None) => unreachable!(),
        };
        let next = pinv.onto_manifold(&particular, &next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::SvdFailure(format!("non-finite sD-MORPH iterate at step {i}")));
        }
        let denom = c.norm().max(f64::MIN_POSITIVE);
        last_change = (&next - &c).norm() / denom;
        c = next;
        iterations = i;
        if i >= cfg.min_iters && last_change < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(SdMorphFit {
        coefficients: c,
        prior: c0,
        iterations,
        converged,
        last_change,
    })
}

/// Full sD-MORPH pipeline: cross-validated LASSO prior, then the iteration.
pub fn sdmorph_fit(a: &DMatrix<f64>, b: &DVector<f64>, cfg: &SdMorphConfig) -> Result<SdMorphFit> {
    check_system(a, b)?;
    cfg.validate()?;
    let sel = select_penalty(a, b, cfg)?;
    let c0 = lasso_with(a, b, sel.k, &cfg.lasso_options(), None)?.coefficients;
    let pinv = Pseudoinverse::new(a, cfg.rank_tol)?;
    sdmorph_from_prior(a, b, &pinv, c0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(m: usize, l: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(m, l, |_, _| rng.gen::<f64>() - 0.5);
        a.column_mut(0).fill(1.0);
        let b = DVector::from_fn(m, |_, _| rng.gen::<f64>());
        (a, b)
    }

    // Direct solve of [W Aᵀ; A 0][δ; −μ] = [0; r].
    fn kkt_oracle(a: &DMatrix<f64>, w: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let (m, l) = a.shape();
        let mut k = DMatrix::zeros(l + m, l + m);
        for j in 0..l {
            k[(j, j)] = w[j];
        }
        k.view_mut((0, l), (l, m)).copy_from(&a.transpose());
        k.view_mut((l, 0), (m, l)).copy_from(a);
        let mut rhs = DVector::zeros(l + m);
        rhs.rows_mut(l, m).copy_from(r);
        k.lu().solve(&rhs).unwrap().rows(0, l).clone_owned()
    }

    #[test]
    fn weights_leave_constant_free() {
        let c = DVector::from_vec(vec![5.0, 0.0, -2.0]);
        let w = iteration_weights(&c, 1e-6);
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 1e6).abs() < 1e-6);
        assert!((w[2] - 1.0 / (2.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn init_lies_on_manifold_nearest_prior() {
        let (a, b) = random_system(6, 15, 4);
        let pinv = Pseudoinverse::new(&a, 1e-12).unwrap();
        let c0 = DVector::from_fn(15, |i, _| (i as f64).sin());
        let c1 = dmorph_init(&pinv, &b, &c0).unwrap();
        assert!((&a * &c1 - &b).amax() < 1e-10);
        // c1 − c0 is orthogonal to the null space of A.
        assert!(pinv.null_project(&(&c1 - &c0)).amax() < 1e-10);
        assert!(dmorph_init(&pinv, &b, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn row_space_step_matches_kkt() {
        for seed in 0..5 {
            let (a, _) = random_system(7, 18, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let d = DVector::from_fn(17, |_, _| 0.01 + rng.gen::<f64>());
            let r = DVector::from_fn(7, |_, _| rng.gen::<f64>() - 0.5);
            let mut w = DVector::zeros(18);
            for j in 1..18 {
                w[j] = 1.0 / d[j - 1];
            }
            let oracle = kkt_oracle(&a, &w, &r);
            let got = RowSpaceSolver::new(&a).solve(&d, &r).unwrap();
            assert!((&got - &oracle).amax() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn row_space_handles_negative_pivot_and_zero_column() {
        let (mut a, _) = random_system(4, 9, 9);
        a.column_mut(0).fill(-2.0);
        let d = DVector::from_element(8, 0.5);
        let r = DVector::from_vec(vec![0.3, -0.1, 0.2, 0.7]);
        let mut w = DVector::from_element(9, 2.0);
        w[0] = 0.0;
        let got = RowSpaceSolver::new(&a).solve(&d, &r).unwrap();
        assert!((&got - kkt_oracle(&a, &w, &r)).amax() < 1e-9);

        a.column_mut(0).fill(0.0);
        let got = RowSpaceSolver::new(&a).solve(&d, &r).unwrap();
        assert!((&a * &got - &r).amax() < 1e-10);
        assert_eq!(got[0], 0.0);
    }

    #[test]
    fn svd_step_matches_kkt() {
        let (a, b) = random_system(5, 12, 21);
        let pinv = Pseudoinverse::new(&a, 1e-12).unwrap();
        let particular = pinv.apply(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DVector::from_fn(12, |_, _| rng.gen::<f64>() - 0.5);
        let c = DVector::from_fn(12, |_, _| rng.gen::<f64>() - 0.5);
        let w = iteration_weights(&c, 1e-6);
        let got = svd_step(&pinv.null_projector(), 12 - pinv.rank(), 1e-12, &particular, &p, &w).unwrap();
        let oracle = &p + kkt_oracle(&a, &w, &(&b - &a * &p));
        assert!((&got - &oracle).amax() < 1e-8);
    }

    #[test]
    fn routes_agree_over_full_iteration() {
        let (a, b) = random_system(12, 40, 17);
        let pinv = Pseudoinverse::new(&a, 1e-12).unwrap();
        let c0 = lasso_with(&a, &b, 1e-3, &Default::default(), None)
            .unwrap()
            .coefficients;
        let svd = SdMorphConfig {
            solver: SdMorphSolver::Svd,
            ..SdMorphConfig::default()
        };
        let fast = SdMorphConfig::default();
        let c_svd = sdmorph_from_prior(&a, &b, &pinv, c0.clone(), &svd).unwrap();
        let c_fast = sdmorph_from_prior(&a, &b, &pinv, c0, &fast).unwrap();
        assert!((&c_svd.coefficients - &c_fast.coefficients).amax() < 1e-6);
        assert!((&a * &c_fast.coefficients - &b).amax() < 1e-9);
        assert!(c_fast.iterations >= 10);
    }

    #[test]
    fn overdetermined_returns_least_squares() {
        let (a, b) = random_system(30, 5, 2);
        let pinv = Pseudoinverse::new(&a, 1e-12).unwrap();
        let fit = sdmorph_from_prior(&a, &b, &pinv, DVector::zeros(5), &SdMorphConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients - pinv.apply(&b)).amax() < 1e-12);
    }

    #[test]
    fn promotes_sparsity_relative_to_min_norm() {
        let (m, l) = (25, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a = DMatrix::from_fn(m, l, |_, _| rng.gen::<f64>() - 0.5);
        a.column_mut(0).fill(1.0);
        let mut truth = DVector::zeros(l);
        for (j, v) in [(0, 2.0), (5, 1.0), (17, -0.8), (40, 0.5)] {
            truth[j] = v;
        }
        let b = &a * &truth;
        let fit = sdmorph_fit(&a, &b, &SdMorphConfig::default()).unwrap();
        let min_norm = pseudo(&a).apply(&b);
        let err_fit = (&fit.coefficients - &truth).norm();
        let err_mn = (&min_norm - &truth).norm();
        assert!(err_fit < 0.1 * err_mn, "{err_fit} vs {err_mn}");
    }

    fn pseudo(a: &DMatrix<f64>) -> Pseudoinverse {
        Pseudoinverse::new(a, 1e-12).unwrap()
    }
}
