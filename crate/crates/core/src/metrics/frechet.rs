use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Ridge added to both covariance estimates.
pub const FRECHET_EPSILON: f64 = 1e-6;

fn gaussian_fit(set: &[Vec<f64>], dim: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if set.len() <= dim {
        return Err(Error::InvalidArgument(format!(
            "Fréchet distance needs more than {dim} samples, got {}",
            set.len()
        )));
    }
    let n = set.len() as f64;
    let mut mean = DVector::zeros(dim);
    for x in set {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        mean += DVector::from_column_slice(x);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for x in set {
        let c = DVector::from_column_slice(x) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= n - 1.0;
    for i in 0..dim {
        cov[(i, i)] += FRECHET_EPSILON;
    }
    Ok((mean, cov))
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^{1/2})` between Gaussian fits.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let dim = a.first().or(b.first()).map(Vec::len).ok_or(Error::EmptyBatch)?;
    let (mu_a, cov_a) = gaussian_fit(a, dim)?;
    let (mu_b, cov_b) = gaussian_fit(b, dim)?;
    // (Σa Σb)^{1/2} has the same trace as (Sa Σb Sa)^{1/2} with Sa = Σa^{1/2}.
    let s = sym_sqrt(&cov_a);
    let inner = &s * &cov_b * &s;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let d = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    Ok(d.max(0.0))
}
