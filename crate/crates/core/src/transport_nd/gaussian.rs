//! Closed-form `W2^2` for affine images of a reference density and for
//! Gaussians.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-12;

/// `x -> Sigma^{1/2} x + lambda * xbar` applied to a reference density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub sigma: DMatrix<f64>,
    pub lambda: f64,
    pub xbar: DVector<f64>,
}

impl AffineParams {
    pub fn translation(lambda: f64, xbar: &[f64]) -> Self {
        let d = xbar.len();
        Self { sigma: DMatrix::identity(d, d), lambda, xbar: DVector::from_column_slice(xbar) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: &[f64], cov: DMatrix<f64>) -> Self {
        Self { mean: DVector::from_column_slice(mean), cov }
    }
}

/// Moments of the reference density `phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    /// `∫ x phi`.
    pub m1: DVector<f64>,
    /// `∫ |x|^2 phi`.
    pub m2: f64,
    /// Full `∫ x x^T phi`; isotropy (`m2 / d * I`) is assumed when absent.
    #[serde(default)]
    pub second: Option<DMatrix<f64>>,
    #[serde(default = "unit")]
    pub mass: f64,
}

fn unit() -> f64 {
    1.0
}

impl MomentPair {
    /// Moments of a standard normal in `d` dimensions.
    pub fn standard_normal(d: usize) -> Self {
        Self { m1: DVector::zeros(d), m2: d as f64, second: Some(DMatrix::identity(d, d)), mass: 1.0 }
    }
}

fn check_spd(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::NonSpd);
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYM_TOL * scale {
        return Err(Error::NonSpd);
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NonSpd);
    }
    Ok(eig)
}

/// Principal square root of an SPD matrix.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = check_spd(m)?;
    Ok(sqrt_from(&eig))
}

fn sqrt_from(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `W2^2` between the images of `phi` under two affine maps, using the map
/// `Σ_b^{1/2} Σ_a^{-1/2}(x - λ_a x̄_a) + λ_b x̄_b` (optimal when the
/// dilations commute).
pub fn w2_affine(phi: &MomentPair, a: &AffineParams, b: &AffineParams) -> Result<f64> {
    let d = phi.m1.len();
    if a.xbar.len() != d || b.xbar.len() != d || a.sigma.nrows() != d || b.sigma.nrows() != d {
        return Err(Error::InvalidInput("affine parameters and moments differ in dimension".into()));
    }
    let diff = sqrtm_spd(&a.sigma)? - sqrtm_spd(&b.sigma)?;
    let t = &a.xbar * a.lambda - &b.xbar * b.lambda;
    let second = match &phi.second {
        Some(s) => (&diff * s * diff.transpose()).trace(),
        None => diff.norm_squared() * phi.m2 / d as f64,
    };
    Ok(t.norm_squared() * phi.mass + 2.0 * t.dot(&(&diff * &phi.m1)) + second)
}

/// `|μ_a - μ_b|^2 + Tr(Σ_a + Σ_b - 2 (Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})`.
pub fn w2_gaussian(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    if a.mean.len() != b.mean.len() || a.cov.nrows() != b.cov.nrows() {
        return Err(Error::InvalidInput("Gaussian parameters differ in dimension".into()));
    }
    check_spd(&a.cov)?;
    check_spd(&b.cov)?;
    if a == b {
        return Ok(0.0);
    }
    // both orderings averaged so the result is bitwise symmetric
    let tr = 0.5 * (bures_trace(a, b)? + bures_trace(b, a)?);
    Ok((&a.mean - &b.mean).norm_squared() + tr.max(0.0))
}

fn bures_trace(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    let ra = sqrtm_spd(&a.cov)?;
    let mid = &ra * &b.cov * &ra;
    let mid = (&mid + mid.transpose()) * 0.5;
    let cross = sqrt_from(&SymmetricEigen::new(mid));
    Ok((&a.cov + &b.cov - cross * 2.0).trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_closed_forms() {
        let i2 = DMatrix::identity(2, 2);
        let a = GaussianParams::new(&[0.0, 0.0], i2.clone());
        let b = GaussianParams::new(&[3.0, 4.0], i2);
        assert_eq!(w2_gaussian(&a, &a).unwrap(), 0.0);
        assert!((w2_gaussian(&a, &b).unwrap() - 25.0).abs() < 1e-12);
        let s1 = GaussianParams::new(&[0.0], DMatrix::from_element(1, 1, 1.0));
        let s2 = GaussianParams::new(&[0.0], DMatrix::from_element(1, 1, 4.0));
        assert!((w2_gaussian(&s1, &s2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let bad = GaussianParams::new(&[0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        let ok = GaussianParams::new(&[0.0, 0.0], DMatrix::identity(2, 2));
        assert!(matches!(w2_gaussian(&bad, &ok), Err(Error::NonSpd)));
        assert!(matches!(w2_gaussian(&ok, &bad), Err(Error::NonSpd)));
    }

    #[test]
    fn affine_translation_and_zero() {
        let phi = MomentPair::standard_normal(2);
        let a = AffineParams::translation(1.0, &[1.0, 2.0]);
        let b = AffineParams::translation(2.0, &[0.0, -1.0]);
        assert_eq!(w2_affine(&phi, &a, &a).unwrap(), 0.0);
        assert!((w2_affine(&phi, &a, &b).unwrap() - (1.0 + 16.0)).abs() < 1e-12);
    }

    #[test]
    fn affine_matches_gaussian_for_diagonal_dilation() {
        let phi = MomentPair { second: None, ..MomentPair::standard_normal(2) };
        let sa = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let sb = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let a = AffineParams { sigma: sa.clone(), lambda: 0.5, xbar: DVector::from_column_slice(&[1.0, 1.0]) };
        let b = AffineParams { sigma: sb.clone(), lambda: 1.0, xbar: DVector::from_column_slice(&[0.0, 2.0]) };
        let ga = GaussianParams { mean: &a.xbar * a.lambda, cov: sa };
        let gb = GaussianParams { mean: &b.xbar * b.lambda, cov: sb };
        let x = w2_affine(&phi, &a, &b).unwrap();
        let y = w2_gaussian(&ga, &gb).unwrap();
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}
