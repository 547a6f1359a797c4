//! Finite-domain convolution `(Am)(x) = ∫_Ω K(x - y) m(y) dy` and its adjoint.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};

/// Node count from which [`convolve`] switches to the FFT path.
pub const FFT_THRESHOLD: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `e^{-ℓ|x|}`.
    Laplace { ell: f64 },
    /// `1 / (1 + |x|)`.
    InverseDistance,
    /// `(2π)^{-d/2} |Σ|^{-1/2} e^{-x^T Σ^{-1} x / 2}`; `cov` is row-major `d x d`.
    Gaussian { cov: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
    /// Kernel set to zero beyond this radius.
    #[serde(default)]
    pub truncate: Option<f64>,
}

impl KernelSpec {
    pub fn laplace(ell: f64) -> Self {
        Self { kind: KernelKind::Laplace { ell }, truncate: None }
    }

    pub fn inverse_distance() -> Self {
        Self { kind: KernelKind::InverseDistance, truncate: None }
    }

    pub fn gaussian(cov: Vec<f64>) -> Self {
        Self { kind: KernelKind::Gaussian { cov }, truncate: None }
    }

    pub fn isotropic_gaussian(dim: usize, var: f64) -> Self {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = var;
        }
        Self::gaussian(cov)
    }

    pub fn truncated(mut self, radius: f64) -> Self {
        self.truncate = Some(radius);
        self
    }

    /// Evaluator for a `dim`-dimensional grid, validating parameters.
    pub fn evaluator(&self, dim: usize) -> Result<impl Fn(f64, f64) -> f64 + Sync + '_> {
        let gauss = match &self.kind {
            KernelKind::Laplace { ell } if !(*ell > 0.0) => {
                return Err(Error::InvalidInput(format!("Laplace kernel needs ell > 0, got {ell}")))
            }
            KernelKind::Gaussian { cov } => {
                if cov.len() != dim * dim {
                    return Err(Error::InvalidInput(format!("Gaussian kernel needs a {dim}x{dim} covariance")));
                }
                let (a, b, c) = if dim == 1 { (cov[0], 0.0, 1.0) } else { (cov[0], cov[1], cov[3]) };
                if dim == 2 && (cov[1] - cov[2]).abs() > 1e-12 * cov[0].abs().max(1.0) {
                    return Err(Error::NonSpd);
                }
                let det = a * c - b * b;
                if !(a > 0.0 && det > 0.0) {
                    return Err(Error::NonSpd);
                }
                let norm = (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0)
                    / if dim == 1 { a.sqrt() } else { det.sqrt() };
                Some((a, b, c, det, norm))
            }
            _ => None,
        };
        let trunc = self.truncate.unwrap_or(f64::INFINITY);
        Ok(move |x: f64, y: f64| {
            let r = (x * x + y * y).sqrt();
            if r > trunc {
                return 0.0;
            }
            match &self.kind {
                KernelKind::Laplace { ell } => (-ell * r).exp(),
                KernelKind::InverseDistance => 1.0 / (1.0 + r),
                KernelKind::Gaussian { .. } => {
                    let (a, b, c, det, norm) = gauss.unwrap();
                    let q = if dim == 1 { x * x / a } else { (c * x * x - 2.0 * b * x * y + a * y * y) / det };
                    norm * (-0.5 * q).exp()
                }
            }
        })
    }
}

/// `(Am)_i = Σ_j K(x_i - x_j) m_j w_j`, or the adjoint
/// `(A*r)_j = Σ_i K(x_i - x_j) r_i w_i` (same quadrature inner product).
pub fn convolve(m: &GridFn, k: &KernelSpec, adjoint: bool) -> Result<GridFn> {
    if m.grid().len() < FFT_THRESHOLD {
        convolve_dense(m, k, adjoint)
    } else {
        convolve_fft(m, k, adjoint)
    }
}

fn offset_table(grid: &Grid, k: &KernelSpec, adjoint: bool) -> Result<(Vec<f64>, usize, usize)> {
    let eval = k.evaluator(grid.dim())?;
    let nx = grid.n(0);
    let ny = grid.n(1);
    let (hx, hy) = (grid.h(0), if grid.dim() == 2 { grid.h(1) } else { 0.0 });
    let (wx, wy) = (2 * nx - 1, 2 * ny - 1);
    let sgn = if adjoint { -1.0 } else { 1.0 };
    let mut t = vec![0.0; wx * wy];
    for b in 0..wy {
        let dy = (b as f64 - (ny - 1) as f64) * hy;
        for a in 0..wx {
            let dx = (a as f64 - (nx - 1) as f64) * hx;
            t[b * wx + a] = eval(sgn * dx, sgn * dy);
        }
    }
    Ok((t, wx, wy))
}

pub fn convolve_dense(m: &GridFn, k: &KernelSpec, adjoint: bool) -> Result<GridFn> {
    let grid = m.grid();
    let (t, wx, _) = offset_table(grid, k, adjoint)?;
    let (nx, ny) = (grid.n(0), grid.n(1));
    let w = grid.weights();
    let src: Vec<f64> = m.values().iter().zip(&w).map(|(a, b)| a * b).collect();
    let out = crate::par::map_range(grid.len(), |idx| {
        let (i, j) = (idx % nx, idx / nx);
        let mut s = 0.0;
        for jj in 0..ny {
            let row = (j + ny - 1 - jj) * wx;
            for ii in 0..nx {
                s += t[row + i + nx - 1 - ii] * src[jj * nx + ii];
            }
        }
        s
    });
    m.with_values(out)
}

pub fn convolve_fft(m: &GridFn, k: &KernelSpec, adjoint: bool) -> Result<GridFn> {
    let grid = m.grid();
    let (t, wx, wy) = offset_table(grid, k, adjoint)?;
    let (nx, ny) = (grid.n(0), grid.n(1));
    let px = (wx + nx).next_power_of_two();
    let py = if grid.dim() == 2 { (wy + ny).next_power_of_two() } else { 1 };
    let w = grid.weights();
    let mut a = vec![Complex64::new(0.0, 0.0); px * py];
    let mut b = vec![Complex64::new(0.0, 0.0); px * py];
    for j in 0..wy {
        for i in 0..wx {
            a[j * px + i] = Complex64::new(t[j * wx + i], 0.0);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            b[j * px + i] = Complex64::new(m.values()[idx] * w[idx], 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    fft2(&mut planner, &mut a, px, py, false);
    fft2(&mut planner, &mut b, px, py, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    fft2(&mut planner, &mut a, px, py, true);
    let scale = 1.0 / (px * py) as f64;
    let oy = if grid.dim() == 2 { ny - 1 } else { 0 };
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            out.push(a[(j + oy) * px + i + nx - 1].re * scale);
        }
    }
    m.with_values(out)
}

fn fft2(planner: &mut FftPlanner<f64>, data: &mut [Complex64], px: usize, py: usize, inverse: bool) {
    let plan = if inverse { planner.plan_fft_inverse(px) } else { planner.plan_fft_forward(px) };
    plan.process(data);
    if py > 1 {
        let plan = if inverse { planner.plan_fft_inverse(py) } else { planner.plan_fft_forward(py) };
        let mut col = vec![Complex64::new(0.0, 0.0); py];
        for i in 0..px {
            for j in 0..py {
                col[j] = data[j * px + i];
            }
            plan.process(&mut col);
            for j in 0..py {
                data[j * px + i] = col[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Convention;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(g: &Grid, seed: u64) -> GridFn {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFn::new(g.clone(), (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn adjoint_identity_1d_and_2d() {
        let g1 = Grid::new_1d(-1.0, 1.0, 101, Convention::Endpoint).unwrap();
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [12, 9], Convention::Endpoint).unwrap();
        let k2 = KernelSpec::gaussian(vec![0.05, 0.01, 0.01, 0.08]);
        for (g, k) in [(g1, KernelSpec::laplace(2.0)), (g2, k2)] {
            let (m, r) = (random(&g, 1), random(&g, 2));
            let lhs = convolve(&m, &k, false).unwrap().dot(&r).unwrap();
            let rhs = m.dot(&convolve(&r, &k, true).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn dense_and_fft_agree() {
        let g = Grid::new_1d(-2.0, 2.0, 300, Convention::Endpoint).unwrap();
        let m = random(&g, 3);
        for k in [KernelSpec::laplace(1.0), KernelSpec::inverse_distance()] {
            for adj in [false, true] {
                let a = convolve_dense(&m, &k, adj).unwrap();
                let b = convolve_fft(&m, &k, adj).unwrap();
                let scale = a.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert!((x - y).abs() < 1e-12 * scale);
                }
            }
        }
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [20, 17], Convention::Endpoint).unwrap();
        let m = random(&g2, 4);
        let k = KernelSpec::isotropic_gaussian(2, 0.01);
        let (a, b) = (convolve_dense(&m, &k, false).unwrap(), convolve_fft(&m, &k, false).unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12 * 10.0);
        }
    }

    #[test]
    fn narrow_gaussian_is_near_identity() {
        let g = Grid::new_1d(-1.0, 1.0, 801, Convention::Endpoint).unwrap();
        let m = GridFn::from_fn(&g, |x, _| (-(4.0 * x * x)).exp());
        let h = g.h(0);
        let k = KernelSpec::isotropic_gaussian(1, (2.0 * h) * (2.0 * h));
        let a = convolve(&m, &k, false).unwrap();
        let err = a.sub(&m).unwrap().norm_l2() / m.norm_l2();
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn constant_interior_output_is_kernel_mass() {
        let g = Grid::new_1d(-10.0, 10.0, 2001, Convention::Endpoint).unwrap();
        let a = convolve(&GridFn::constant(&g, 1.0), &KernelSpec::laplace(2.0), false).unwrap();
        let mid = a.values()[1000];
        assert!((mid - 1.0).abs() < 1e-4, "{mid}");
    }

    #[test]
    fn invalid_kernels() {
        let g = Grid::new_1d(0.0, 1.0, 8, Convention::Endpoint).unwrap();
        let m = GridFn::constant(&g, 1.0);
        assert!(convolve(&m, &KernelSpec::laplace(0.0), false).is_err());
        assert!(matches!(convolve(&m, &KernelSpec::gaussian(vec![-1.0]), false), Err(Error::NonSpd)));
    }
}
