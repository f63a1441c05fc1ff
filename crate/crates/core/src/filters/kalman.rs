//! Exact Gaussian filtering for linear models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
                context: "belief mean",
            });
        }
        Ok(Self { mean, cov })
    }
}

/// One predict/update cycle with the Joseph-form covariance update.
pub fn kalman_step(
    belief: &GaussianBelief,
    y: &[f64],
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q: &SymMatrix,
    r: &SymMatrix,
) -> Result<GaussianBelief> {
    let d_x = belief.mean.len();
    let d_y = y.len();
    check_shape(f, d_x, d_x, "F")?;
    check_shape(h, d_y, d_x, "H")?;
    check_shape(q.as_matrix(), d_x, d_x, "Q")?;
    check_shape(r.as_matrix(), d_y, d_y, "R")?;

    let m_pred = f * &belief.mean;
    let p_pred = f * belief.cov.as_matrix() * f.transpose() + q.as_matrix();

    let innovation = DVector::from_column_slice(y) - h * &m_pred;
    let s = h * &p_pred * h.transpose() + r.as_matrix();
    let s = SymMatrix::symmetrized(s);
    let chol = s
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovationCovariance)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ
    let gain = chol.solve(&(h * &p_pred)).transpose();
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovationCovariance);
    }

    let mean = m_pred + &gain * innovation;
    let i_kh = DMatrix::identity(d_x, d_x) - &gain * h;
    let cov = &i_kh * p_pred * i_kh.transpose() + &gain * r.as_matrix() * gain.transpose();
    Ok(GaussianBelief {
        mean,
        cov: SymMatrix::symmetrized(cov),
    })
}

fn check_shape(m: &DMatrix<f64>, rows: usize, cols: usize, context: &'static str) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: m.nrows(),
            context,
        });
    }
    if m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            got: m.ncols(),
            context,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn prior(m: f64, v: f64) -> GaussianBelief {
        GaussianBelief::new(DVector::from_element(1, m), SymMatrix::from_diagonal(&[v])).unwrap()
    }

    #[test]
    fn scalar_update_by_hand() {
        let post = kalman_step(
            &prior(0.0, 1.0),
            &[2.0],
            &scalar(1.0),
            &scalar(1.0),
            &SymMatrix::identity(1),
            &SymMatrix::identity(1),
        )
        .unwrap();
        assert!((post.mean[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((post.cov.get(0, 0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_innovation_keeps_predicted_mean() {
        let post = kalman_step(
            &prior(1.5, 0.3),
            &[3.0],
            &scalar(2.0),
            &scalar(1.0),
            &SymMatrix::identity(1),
            &SymMatrix::identity(1),
        )
        .unwrap();
        assert!((post.mean[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn uninformative_observation() {
        let post = kalman_step(
            &prior(0.7, 0.5),
            &[100.0],
            &scalar(1.0),
            &scalar(1.0),
            &SymMatrix::zeros(1),
            &SymMatrix::from_diagonal(&[1e12]),
        )
        .unwrap();
        assert!((post.mean[0] - 0.7).abs() < 1e-9);
        assert!((post.cov.get(0, 0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn singular_innovation() {
        let err = kalman_step(
            &prior(0.0, 0.0),
            &[0.0],
            &scalar(1.0),
            &scalar(1.0),
            &SymMatrix::zeros(1),
            &SymMatrix::zeros(1),
        );
        assert!(matches!(err, Err(Error::SingularInnovationCovariance)));
    }

    #[test]
    fn diagonal_model_decouples() {
        // with everything diagonal the filter is a bank of scalar filters
        let b = GaussianBelief::new(
            DVector::from_vec(vec![0.0, 1.0]),
            SymMatrix::from_diagonal(&[1.0, 2.0]),
        )
        .unwrap();
        let post = kalman_step(
            &b,
            &[2.0, -1.0],
            &DMatrix::identity(2, 2),
            &DMatrix::identity(2, 2),
            &SymMatrix::identity(2),
            &SymMatrix::identity(2),
        )
        .unwrap();
        let one = kalman_step(
            &prior(1.0, 2.0),
            &[-1.0],
            &scalar(1.0),
            &scalar(1.0),
            &SymMatrix::identity(1),
            &SymMatrix::identity(1),
        )
        .unwrap();
        assert!((post.mean[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((post.mean[1] - one.mean[0]).abs() < 1e-14);
        assert!(post.cov.get(0, 1).abs() < 1e-15);
    }
}
