//! Linear solvers: preconditioned conjugate gradients and banded Cholesky.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for an SPD operator. `apply` writes `A x` into its
/// second argument, `precond` writes `M^{-1} r`.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= rtol {
            return Ok((x, CgReport { iterations: it, relative_residual: rel }));
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure(format!("operator not positive definite (p'Ap = {pap:e})")));
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    if rel <= rtol {
        return Ok((x, CgReport { iterations: max_iter, relative_residual: rel }));
    }
    Err(Error::SolverFailure(format!("CG stalled at relative residual {rel:e} after {max_iter} iterations")))
}

/// Symmetric banded matrix stored by lower diagonals: `diag[k][i] = A[i][i-k]`
/// (entries with `i < k` unused).
#[derive(Clone, Debug, PartialEq)]
pub struct SymBanded {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bands: vec![vec![0.0; n]; bandwidth + 1] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    /// Add `v` to `A[i][j]` (and its mirror). Requires `|i - j| <= bandwidth`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.bands[r - c][r] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bandwidth() {
            0.0
        } else {
            self.bands[r - c][r]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (k, band) in self.bands.iter().enumerate() {
            for i in k..self.n {
                y[i] += band[i] * x[i - k];
                if k > 0 {
                    y[i - k] += band[i] * x[i];
                }
            }
        }
        y
    }

    /// In-band Cholesky factor `L` with `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let p = self.bandwidth();
        let mut l = self.bands.clone();
        for j in 0..n {
            let mut d = l[0][j];
            for k in 1..=p.min(j) {
                d -= l[k][j] * l[k][j];
            }
            if !(d > 0.0) {
                return Err(Error::NonSpd);
            }
            let d = d.sqrt();
            l[0][j] = d;
            for i in j + 1..(j + p + 1).min(n) {
                let mut s = l[i - j][i];
                for k in 1..=p {
                    if k > j || i - j + k > p {
                        break;
                    }
                    s -= l[i - j + k][i] * l[k][j];
                }
                l[i - j][i] = s / d;
            }
        }
        Ok(BandCholesky { n, bands: l })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let p = self.bands.len() - 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 1..=p.min(i) {
                s -= self.bands[k][i] * y[i - k];
            }
            y[i] = s / self.bands[0][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in 1..=p {
                if i + k >= n {
                    break;
                }
                s -= self.bands[k][i + k] * y[i + k];
            }
            y[i] = s / self.bands[0][i];
        }
        y
    }
}
