use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qoi::Dataset;

/// Per-input scale factors `r` of `Z = diag(r) X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformVector(Vec<f64>);

impl TransformVector {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::DimensionMismatch("transform vector is empty".into()));
        }
        if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "scale factors must be positive and finite, got {v}"
            )));
        }
        Ok(Self(r))
    }

    /// `r_i = 1 / μ_i`, giving unit-mean transformed inputs.
    pub fn from_means(means: &[f64]) -> Result<Self> {
        Self::new(means.iter().map(|m| 1.0 / m).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "transform vector has {} entries, expected {n}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `z_i = r_i x_i`.
pub fn transform_x_to_z(x: &[f64], r: &TransformVector) -> Result<Vec<f64>> {
    r.check_len(x.len())?;
    Ok(x.iter().zip(r.as_slice()).map(|(x, r)| x * r).collect())
}

/// Row-wise [`transform_x_to_z`].
pub fn transform_samples(x: &DMatrix<f64>, r: &TransformVector) -> Result<DMatrix<f64>> {
    r.check_len(x.ncols())?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |l, i| {
        x[(l, i)] * r.as_slice()[i]
    }))
}

/// `Z'[l][i] = (r_i / r'_i) Z[l][i]`: the points at which the design-`r`
/// surrogate reproduces outputs at design `r'`.
pub fn rescale_inputs(z: &DMatrix<f64>, r: &TransformVector, r_new: &TransformVector) -> Result<DMatrix<f64>> {
    r.check_len(z.ncols())?;
    r_new.check_len(z.ncols())?;
    let ratio: Vec<f64> = r.as_slice().iter().zip(r_new.as_slice()).map(|(a, b)| a / b).collect();
    Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |l, i| ratio[i] * z[(l, i)]))
}

/// Transformed samples and outputs `{z^(l), h(z^(l); r)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    z: DMatrix<f64>,
    h: DVector<f64>,
    r: TransformVector,
}

impl TrainingSet {
    pub fn new(z: DMatrix<f64>, h: DVector<f64>, r: TransformVector) -> Result<Self> {
        if z.nrows() != h.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} outputs",
                z.nrows(),
                h.len()
            )));
        }
        r.check_len(z.ncols())?;
        if z.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("training set".into()));
        }
        Ok(Self { z, h, r })
    }

    /// Transforms raw dataset inputs with `r`.
    pub fn from_dataset(data: &Dataset, r: TransformVector) -> Result<Self> {
        let z = transform_samples(&data.x, &r)?;
        Self::new(z, DVector::from_column_slice(&data.q), r)
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn r(&self) -> &TransformVector {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}
