use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_system, SdMorphConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    pub max_sweeps: usize,
    /// Converged when the largest coefficient change in a full sweep falls
    /// below `tol · max(1, max_j |c_j|)`.
    pub tol: f64,
    pub exempt_intercept: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            tol: 1e-10,
            exempt_intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Penalty chosen for a LASSO fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySelection {
    /// Absolute penalty `k`.
    pub k: f64,
    /// `k / k_max`.
    pub fraction: f64,
    /// Mean cross-validated squared error per grid entry (empty when no CV ran).
    pub cv_errors: Vec<f64>,
}

/// Smallest `k` for which the LASSO solution is identically zero.
pub fn k_max(a: &DMatrix<f64>, b: &DVector<f64>, exempt_intercept: bool) -> f64 {
    let skip = usize::from(exempt_intercept);
    a.column_iter()
        .skip(skip)
        .map(|col| 2.0 * col.dot(b).abs())
        .fold(0.0, f64::max)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `argmin (b − A c)ᵀ(b − A c) + k Σ |c_i|` with default options.
pub fn lasso(a: &DMatrix<f64>, b: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    Ok(lasso_with(a, b, k, &LassoOptions::default(), None)?.coefficients)
}

/// Cyclic coordinate descent with soft-thresholding. After each full sweep
/// the active (non-zero) coordinates are cycled until they settle.
pub fn lasso_with(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    k: f64,
    opts: &LassoOptions,
    warm_start: Option<&DVector<f64>>,
) -> Result<LassoFit> {
    check_system(a, b)?;
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::NonFiniteInput(format!("penalty k = {k}")));
    }
    let l = a.ncols();
    let half_k = 0.5 * k;
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let mut c = match warm_start {
        Some(w) if w.len() == l => w.clone(),
        _ => DVector::zeros(l),
    };
    let mut resid = b - a * &c;

    let update = |j: usize, c: &mut DVector<f64>, resid: &mut DVector<f64>| -> f64 {
        let nj = norms[j];
        if nj == 0.0 {
            let old = c[j];
            c[j] = 0.0;
            return old.abs();
        }
        let col = a.column(j);
        let old = c[j];
        let rho = col.dot(resid) + nj * old;
        let new = if j == 0 && opts.exempt_intercept {
            rho / nj
        } else {
            soft_threshold(rho, half_k) / nj
        };
        let delta = new - old;
        if delta != 0.0 {
            resid.axpy(-delta, &col, 1.0);
            c[j] = new;
        }
        delta.abs()
    };

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for j in 0..l {
            max_change = max_change.max(update(j, &mut c, &mut resid));
        }
        sweeps += 1;
        let scale = c.amax().max(1.0);
        if max_change < opts.tol * scale {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..l).filter(|&j| c[j] != 0.0).collect();
        while sweeps < opts.max_sweeps {
            let mut change: f64 = 0.0;
            for &j in &active {
                change = change.max(update(j, &mut c, &mut resid));
            }
            sweeps += 1;
            if change < opts.tol * c.amax().max(1.0) {
                break;
            }
        }
    }
    Ok(LassoFit {
        coefficients: c,
        sweeps,
        converged,
    })
}

/// Picks the penalty minimizing K-fold cross-validated squared prediction
/// error over `cfg.cv_grid` (fractions of `k_max`). Fold assignment is a
/// seeded shuffle; folds are fitted in parallel and reduced in fold order.
pub fn select_penalty(a: &DMatrix<f64>, b: &DVector<f64>, cfg: &SdMorphConfig) -> Result<PenaltySelection> {
    check_system(a, b)?;
    cfg.validate()?;
    let kmax = k_max(a, b, cfg.exempt_intercept);
    if let Some(k) = cfg.lasso_penalty {
        let fraction = if kmax > 0.0 { k / kmax } else { 0.0 };
        return Ok(PenaltySelection {
            k,
            fraction,
            cv_errors: Vec::new(),
        });
    }
    if cfg.cv_grid.len() == 1 {
        let fraction = cfg.cv_grid[0];
        return Ok(PenaltySelection {
            k: fraction * kmax,
            fraction,
            cv_errors: Vec::new(),
        });
    }
    let m = a.nrows();
    if m < cfg.cv_folds {
        return Err(Error::InsufficientData(format!(
            "{m} samples for {}-fold cross-validation",
            cfg.cv_folds
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let folds: Vec<Vec<usize>> = (0..cfg.cv_folds)
        .map(|f| order.iter().copied().skip(f).step_by(cfg.cv_folds).collect())
        .collect();

    // Solve along decreasing penalties so each fit warm-starts the next.
    let mut path: Vec<usize> = (0..cfg.cv_grid.len()).collect();
    path.sort_by(|&i, &j| cfg.cv_grid[j].total_cmp(&cfg.cv_grid[i]));

    let opts = cfg.lasso_options();
    let per_fold: Vec<Result<Vec<f64>>> = folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; m];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..m).filter(|&i| !in_test[i]).collect();
            let a_tr = a.select_rows(&train);
            let b_tr = b.select_rows(&train);
            let a_te = a.select_rows(test);
            let b_te = b.select_rows(test);
            let kmax_tr = k_max(&a_tr, &b_tr, cfg.exempt_intercept);
            let mut errs = vec![0.0; cfg.cv_grid.len()];
            let mut warm: Option<DVector<f64>> = None;
            for &g in &path {
                let fit = lasso_with(&a_tr, &b_tr, cfg.cv_grid[g] * kmax_tr, &opts, warm.as_ref())?;
                let pred = &a_te * &fit.coefficients;
                errs[g] = (&b_te - pred).norm_squared();
                warm = Some(fit.coefficients);
            }
            Ok(errs)
        })
        .collect();

    let mut totals = vec![0.0; cfg.cv_grid.len()];
    for fold in per_fold {
        for (t, e) in totals.iter_mut().zip(fold?) {
            *t += e;
        }
    }
    let cv_errors: Vec<f64> = totals.iter().map(|t| t / m as f64).collect();
    let best = cv_errors
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if *e < cv_errors[best] { i } else { best });
    let fraction = cfg.cv_grid[best];
    Ok(PenaltySelection {
        k: fraction * kmax,
        fraction,
        cv_errors,
    })
}
