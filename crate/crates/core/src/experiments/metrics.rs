//! Error measures against the exact non-private solutions.

use nalgebra::{DMatrix, DVector};

use crate::analysis::projection_residual;
use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;

/// `ψ = (‖A − AX′X′ᵀ‖_F² − ‖A − AX_optX_optᵀ‖_F²)/n`.
pub fn metric_psi(a: &DMatrix<f64>, x_prime: &DMatrix<f64>, x_opt: &DMatrix<f64>) -> Result<f64> {
    check_basis(a.ncols(), x_prime)?;
    check_basis(a.ncols(), x_opt)?;
    Ok((projection_residual(a, x_prime) - projection_residual(a, x_opt)) / a.nrows() as f64)
}

/// ψ from the Gram matrix `G = AᵀA`, using
/// `‖A − AXXᵀ‖² = ‖A‖² − tr(XᵀGX)` for orthonormal `X`. Costs `O(d²k)`.
pub fn psi_from_gram(g: &DMatrix<f64>, n: usize, x_prime: &DMatrix<f64>, x_opt: &DMatrix<f64>) -> Result<f64> {
    check_basis(g.ncols(), x_prime)?;
    check_basis(g.ncols(), x_opt)?;
    let captured = |x: &DMatrix<f64>| (x.transpose() * g * x).trace();
    Ok((captured(x_opt) - captured(x_prime)) / n as f64)
}

fn check_basis(d: usize, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != d {
        return Err(Error::shape(format!("basis has {} rows, data has {d} columns", x.nrows())));
    }
    Ok(())
}

/// `‖Ax − b‖² + λ‖x‖²`.
pub fn ridge_objective(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> Result<f64> {
    if a.ncols() != x.len() || a.nrows() != b.len() {
        return Err(Error::shape("ridge objective shapes disagree"));
    }
    let r = a * x - b;
    let mut acc = CompensatedSum::default();
    for v in r.iter() {
        acc.add(v * v);
    }
    Ok(acc.value() + lambda * x.norm_squared())
}

/// `φ = obj(x′)/obj(x_opt)`. A zero denominator gives 1 when the numerator is
/// also zero and an error otherwise.
pub fn metric_phi(a: &DMatrix<f64>, b: &DVector<f64>, x_prime: &DVector<f64>, x_opt: &DVector<f64>, lambda: f64) -> Result<f64> {
    let num = ridge_objective(a, b, x_prime, lambda)?;
    let den = ridge_objective(a, b, x_opt, lambda)?;
    if den == 0.0 {
        return if num == 0.0 { Ok(1.0) } else { Err(Error::Data("optimal objective is zero".into())) };
    }
    Ok(num / den)
}
