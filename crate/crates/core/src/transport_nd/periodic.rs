//! Periodic 2D helpers: spectral gradient/divergence, a CG solver for
//! `-∇·(A ∇ψ) = r`, and off-grid interpolation (trigonometric on small
//! grids, Catmull-Rom above [`SPECTRAL_INTERP_MAX`] nodes).

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::Grid;
use crate::linalg::{pcg, CgReport};

/// Spectral gradient with Nyquist modes removed.
pub fn grad(grid: &Grid, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = fourier::forward(grid, v)?;
    let nyq = fourier::nyquist_mask(grid);
    let pairs = fourier::frequency_pairs(grid);
    let mut sx = spec.clone();
    let mut sy = spec;
    for k in 0..pairs.len() {
        let (x, y) = pairs[k];
        if nyq[k] {
            sx[k] = Complex64::new(0.0, 0.0);
            sy[k] = Complex64::new(0.0, 0.0);
        } else {
            sx[k] *= Complex64::new(0.0, x);
            sy[k] *= Complex64::new(0.0, y);
        }
    }
    Ok((fourier::inverse(grid, sx), fourier::inverse(grid, sy)))
}

/// Spectral divergence of `(qx, qy)`, the negative transpose of [`grad`].
pub fn div(grid: &Grid, qx: &[f64], qy: &[f64]) -> Result<Vec<f64>> {
    let ax = fourier::forward(grid, qx)?;
    let ay = fourier::forward(grid, qy)?;
    let nyq = fourier::nyquist_mask(grid);
    let pairs = fourier::frequency_pairs(grid);
    let out: Vec<Complex64> = (0..pairs.len())
        .map(|k| {
            if nyq[k] {
                Complex64::new(0.0, 0.0)
            } else {
                let (x, y) = pairs[k];
                ax[k] * Complex64::new(0.0, x) + ay[k] * Complex64::new(0.0, y)
            }
        })
        .collect();
    Ok(fourier::inverse(grid, out))
}

/// Spectral second derivatives `(v_xx, v_yy, v_xy)`.
pub fn hessian(grid: &Grid, v: &[f64]) -> Result<[Vec<f64>; 3]> {
    let spec = fourier::forward(grid, v)?;
    let nyq = fourier::nyquist_mask(grid);
    let pairs = fourier::frequency_pairs(grid);
    let mut out: [Vec<Complex64>; 3] = [spec.clone(), spec.clone(), spec];
    for k in 0..pairs.len() {
        let (x, y) = pairs[k];
        out[0][k] *= -x * x;
        out[1][k] *= -y * y;
        out[2][k] *= if nyq[k] { 0.0 } else { -x * y };
    }
    let [a, b, c] = out;
    Ok([fourier::inverse(grid, a), fourier::inverse(grid, b), fourier::inverse(grid, c)])
}

/// Solve `Δv = r` for mean-zero `v` (the mean of `r` is ignored).
pub fn inverse_laplacian(grid: &Grid, r: &[f64]) -> Result<Vec<f64>> {
    let k2 = fourier::xi_squared(grid);
    let table: Vec<f64> = k2.iter().map(|&k| if k == 0.0 { 0.0 } else { -1.0 / k }).collect();
    fourier::apply_table(grid, r, &table)
}

/// Symmetric tensor field `[a11, a12, a22]` per node.
pub type Tensor = [f64; 3];

/// Mean-zero solution of `-∇·(A ∇ψ) = r` by preconditioned CG with a
/// constant-coefficient spectral preconditioner. `r` is projected onto the
/// range (mean and Nyquist content removed).
pub fn solve_divergence(grid: &Grid, coeff: &[Tensor], r: &[f64], rtol: f64) -> Result<(Vec<f64>, CgReport)> {
    let n = grid.len();
    if coeff.len() != n || r.len() != n {
        return Err(Error::GridMismatch("coefficient or right side length".into()));
    }
    for c in coeff {
        let det = c[0] * c[2] - c[1] * c[1];
        if !(c[0] > 0.0 && det > 0.0) {
            return Err(Error::SingularAdjoint(format!("coefficient tensor not positive definite: {c:?}")));
        }
    }
    let abar = coeff.iter().map(|c| 0.5 * (c[0] + c[2])).sum::<f64>() / n as f64;
    let k2 = fourier::xi_squared(grid);
    let nyq = fourier::nyquist_mask(grid);
    let table: Vec<f64> = (0..n)
        .map(|k| if k2[k] == 0.0 || nyq[k] { 0.0 } else { 1.0 / (abar * k2[k]) })
        .collect();
    let mut proj: Vec<f64> = (0..n).map(|k| if k2[k] == 0.0 || nyq[k] { 0.0 } else { 1.0 }).collect();
    let b = fourier::apply_table(grid, r, &proj)?;
    proj.clear();

    let apply = |x: &[f64], out: &mut [f64]| {
        let (gx, gy) = grad(grid, x).expect("periodic grid");
        let qx: Vec<f64> = (0..n).map(|k| coeff[k][0] * gx[k] + coeff[k][1] * gy[k]).collect();
        let qy: Vec<f64> = (0..n).map(|k| coeff[k][1] * gx[k] + coeff[k][2] * gy[k]).collect();
        let d = div(grid, &qx, &qy).expect("periodic grid");
        for (o, v) in out.iter_mut().zip(d) {
            *o = -v;
        }
    };
    let precond = |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&fourier::apply_table(grid, x, &table).expect("periodic grid"));
    };
    let (mut x, rep) = pcg(apply, precond, &b, None, rtol, 20 * n.max(100))
        .map_err(|e| Error::SingularAdjoint(e.to_string()))?;
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    Ok((x, rep))
}

/// Grids up to this many nodes interpolate with the full trigonometric
/// series, which keeps `g(T)` smooth enough for the Monge-Ampère residual to
/// reach 1e-8.
pub const SPECTRAL_INTERP_MAX: usize = 128 * 128;

#[derive(Clone, Debug)]
struct TrigInterp {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    kx: Vec<f64>,
    ky: Vec<f64>,
    nyq: [usize; 2],
    coef: Vec<Complex64>,
}

impl TrigInterp {
    fn new(grid: &Grid, values: &[f64]) -> Result<Self> {
        let n = grid.len() as f64;
        let coef = fourier::forward(grid, values)?.into_iter().map(|c| c / n).collect();
        Ok(Self {
            nx: grid.n(0),
            ny: grid.n(1),
            origin: [grid.coord(0, 0), grid.coord(1, 0)],
            kx: fourier::wavenumbers(grid, 0),
            ky: fourier::wavenumbers(grid, 1),
            nyq: [grid.n(0) / 2, grid.n(1) / 2],
            coef,
        })
    }

    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let ex: Vec<Complex64> = self.kx.iter().map(|k| Complex64::from_polar(1.0, k * (x - self.origin[0]))).collect();
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for j in 0..self.ny {
            let row = &self.coef[j * self.nx..(j + 1) * self.nx];
            let mut s = Complex64::new(0.0, 0.0);
            let mut sd = Complex64::new(0.0, 0.0);
            for i in 0..self.nx {
                let t = row[i] * ex[i];
                s += t;
                if i != self.nyq[0] {
                    sd += t * self.kx[i];
                }
            }
            let ey = Complex64::from_polar(1.0, self.ky[j] * (y - self.origin[1]));
            v += (s * ey).re;
            gx += -(sd * ey).im;
            if j != self.nyq[1] {
                gy += -(s * ey).im * self.ky[j];
            }
        }
        (v, gx, gy)
    }
}

#[derive(Clone, Debug)]
enum InterpKind {
    Trig(TrigInterp),
    Cubic(CubicInterp),
}

/// Periodic interpolant of nodal values on a 2D grid.
#[derive(Clone, Debug)]
pub struct PeriodicInterp(InterpKind);

impl PeriodicInterp {
    pub fn new(grid: &Grid, values: &[f64]) -> Result<Self> {
        grid.ensure_periodic()?;
        if grid.dim() != 2 {
            return Err(Error::GridMismatch("interpolant expects a 2D grid".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self(if grid.len() <= SPECTRAL_INTERP_MAX {
            InterpKind::Trig(TrigInterp::new(grid, values)?)
        } else {
            InterpKind::Cubic(CubicInterp::new(grid, values))
        }))
    }

    /// Value and gradient at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match &self.0 {
            InterpKind::Trig(t) => t.eval(x, y),
            InterpKind::Cubic(c) => c.eval(x, y),
        }
    }
}

/// Periodic Catmull-Rom (cubic convolution) interpolant of nodal values.
#[derive(Clone, Debug)]
struct CubicInterp {
    nx: usize,
    ny: usize,
    lo: [f64; 2],
    h: [f64; 2],
    values: Vec<f64>,
}

#[inline]
fn weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
    )
}

impl CubicInterp {
    fn new(grid: &Grid, values: &[f64]) -> Self {
        Self {
            nx: grid.n(0),
            ny: grid.n(1),
            lo: [grid.lo(0), grid.lo(1)],
            h: [grid.h(0), grid.h(1)],
            values: values.to_vec(),
        }
    }

    fn locate(&self, x: f64, axis: usize) -> (i64, f64) {
        let s = (x - self.lo[axis]) / self.h[axis] - 0.5;
        let i = s.floor();
        (i as i64, s - i)
    }

    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (i, tx) = self.locate(x, 0);
        let (j, ty) = self.locate(y, 1);
        let (wx, dx) = weights(tx);
        let (wy, dy) = weights(ty);
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for b in 0..4 {
            let jj = (j - 1 + b as i64).rem_euclid(ny) as usize;
            let mut row_v = 0.0;
            let mut row_d = 0.0;
            for a in 0..4 {
                let ii = (i - 1 + a as i64).rem_euclid(nx) as usize;
                let s = self.values[jj * self.nx + ii];
                row_v += wx[a] * s;
                row_d += dx[a] * s;
            }
            v += wy[b] * row_v;
            gx += wy[b] * row_d;
            gy += dy[b] * row_v;
        }
        (v, gx / self.h[0], gy / self.h[1])
    }
}
