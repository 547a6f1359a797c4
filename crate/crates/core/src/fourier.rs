//! FFT plumbing on periodic grids.
//!
//! `forward` is the unnormalized DFT `F_k = sum_j f_j e^{-2 pi i k j / n}` and
//! `inverse` its exact inverse. Wavenumbers are `2 pi k / L` with
//! `k = -n/2 .. n/2 - 1` in FFT order.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::grid::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_lines(data: &mut [Complex64], len: usize, inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse { p.plan_fft_inverse(len) } else { p.plan_fft_forward(len) };
        plan.process(data);
    });
}

fn transpose(data: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for j in 0..ny {
        for i in 0..nx {
            out[i * ny + j] = data[j * nx + i];
        }
    }
    out
}

fn fft_nd(grid: &Grid, mut data: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let nx = grid.n(0);
    fft_lines(&mut data, nx, inverse);
    if grid.dim() == 2 {
        let ny = grid.n(1);
        let mut t = transpose(&data, nx, ny);
        fft_lines(&mut t, ny, inverse);
        data = transpose(&t, ny, nx);
    }
    data
}

/// Unnormalized forward DFT in storage order.
pub fn forward(grid: &Grid, values: &[f64]) -> Result<Vec<Complex64>> {
    grid.ensure_periodic()?;
    let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(fft_nd(grid, data, false))
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse(grid: &Grid, spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len() as f64;
    fft_nd(grid, spec, true).into_iter().map(|c| c.re / n).collect()
}

/// Factor turning `sum |F_k|^2` into `||f||_{L2}^2`.
pub fn parseval_weight(grid: &Grid) -> f64 {
    let cell: f64 = (0..grid.dim()).map(|a| grid.h(a)).product();
    cell / grid.len() as f64
}

/// Integer mode index of FFT slot `j` on an axis with `n` samples.
#[inline]
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn wavenumbers(grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.n(axis);
    let c = 2.0 * std::f64::consts::PI / grid.length(axis);
    (0..n).map(|j| c * mode_index(j, n) as f64).collect()
}

/// `(xi_x, xi_y)` of every slot, in storage order (`xi_y = 0` in 1D).
pub fn frequency_pairs(grid: &Grid) -> Vec<(f64, f64)> {
    let kx = wavenumbers(grid, 0);
    let ky = if grid.dim() == 2 { wavenumbers(grid, 1) } else { vec![0.0] };
    let mut out = Vec::with_capacity(grid.len());
    for &y in &ky {
        for &x in &kx {
            out.push((x, y));
        }
    }
    out
}

/// `ξ² = |xi|^2` per slot.
pub fn xi_squared(grid: &Grid) -> Vec<f64> {
    frequency_pairs(grid).into_iter().map(|(x, y)| x * x + y * y).collect()
}

/// Multiply by a real symbol `sym(|xi|^2)` per mode.
pub fn apply_radial(grid: &Grid, values: &[f64], sym: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let mut spec = forward(grid, values)?;
    for (c, k2) in spec.iter_mut().zip(xi_squared(grid)) {
        *c *= sym(k2);
    }
    Ok(inverse(grid, spec))
}

/// Multiply by a precomputed per-slot real symbol.
pub fn apply_table(grid: &Grid, values: &[f64], table: &[f64]) -> Result<Vec<f64>> {
    let mut spec = forward(grid, values)?;
    for (c, s) in spec.iter_mut().zip(table) {
        *c *= *s;
    }
    Ok(inverse(grid, spec))
}

/// Slots that hold a Nyquist frequency on some axis (even `n`).
pub fn nyquist_mask(grid: &Grid) -> Vec<bool> {
    let nx = grid.n(0);
    let ny = grid.n(1);
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let ix = nx.is_multiple_of(2) && i == nx / 2;
            let iy = grid.dim() == 2 && ny.is_multiple_of(2) && j == ny / 2;
            out.push(ix || iy);
        }
    }
    out
}

/// Spectral partial derivative along `axis` with the Nyquist mode removed.
pub fn derivative(grid: &Grid, values: &[f64], axis: usize) -> Result<Vec<f64>> {
    let mut spec = forward(grid, values)?;
    let nyq = nyquist_mask(grid);
    for (k, (c, (x, y))) in spec.iter_mut().zip(frequency_pairs(grid)).enumerate() {
        let xi = if axis == 0 { x } else { y };
        *c = if nyq[k] { Complex64::new(0.0, 0.0) } else { *c * Complex64::new(0.0, xi) };
    }
    Ok(inverse(grid, spec))
}

/// Periodic translation `f(x - a)` by a phase factor; the Nyquist mode
/// keeps only its real (cosine) part.
pub fn shift(grid: &Grid, values: &[f64], a: [f64; 2]) -> Result<Vec<f64>> {
    let mut spec = forward(grid, values)?;
    for (c, (x, y)) in spec.iter_mut().zip(frequency_pairs(grid)) {
        let ph = -(x * a[0] + y * a[1]);
        *c *= Complex64::new(ph.cos(), ph.sin());
    }
    Ok(inverse(grid, spec))
}
