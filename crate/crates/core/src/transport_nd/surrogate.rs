//! Weighted `Ḣ^{-1}` discrepancy `∫ g |∇φ|^2` with `-∇·(g ∇φ) = f - g`.

use super::periodic::{solve_divergence, Tensor};
use crate::error::{Error, Result};
use crate::grid::{Density, Grid, GridFn};

const SOLVE_RTOL: f64 = 1e-12;

/// Result of the surrogate solve: the value and the potential `φ`, which is
/// also the derivative of `½ ||f - g||^2` in `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateSolution {
    pub value: f64,
    pub phi: GridFn,
}

/// `||f - g||^2_{Ḣ^{-1}(g dx)}`.
pub fn weighted_hm1_surrogate(f: &Density, g: &Density) -> Result<f64> {
    surrogate_solve(f, g).map(|s| s.value)
}

pub fn surrogate_solve(f: &Density, g: &Density) -> Result<SurrogateSolution> {
    let grid = f.grid();
    grid.ensure_same(g.grid())?;
    let (a, b) = (f.mass(), g.mass());
    if (a - b).abs() > 1e-10 * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(format!("source mass {a} vs target mass {b}")));
    }
    let gmin = g.base().min();
    if !(gmin > 0.0) {
        return Err(Error::DegenerateTarget(gmin));
    }
    match grid.dim() {
        1 => solve_1d(grid, f.values(), g.values()),
        _ => solve_2d(grid, f, g),
    }
}

/// Exact for cellwise-constant `f`, `g`: the flux `J = -g φ'` is the running
/// integral of `f - g` and is linear inside each cell.
fn solve_1d(grid: &Grid, f: &[f64], g: &[f64]) -> Result<SurrogateSolution> {
    let n = f.len();
    let w = grid.axis_weights(0);
    let mut j = Vec::with_capacity(n + 1);
    j.push(0.0);
    for i in 0..n {
        j.push(j[i] + (f[i] - g[i]) * w[i]);
    }
    let c = if grid.is_periodic() {
        // Periodic φ: ∫ φ' = -∫ (J + c)/g = 0.
        let num: f64 = (0..n).map(|i| w[i] * 0.5 * (j[i] + j[i + 1]) / g[i]).sum();
        let den: f64 = (0..n).map(|i| w[i] / g[i]).sum();
        -num / den
    } else {
        0.0
    };
    let mut value = 0.0;
    let mut slopes = Vec::with_capacity(n);
    for i in 0..n {
        let (ja, jb) = (j[i] + c, j[i + 1] + c);
        value += w[i] * (ja * ja + ja * jb + jb * jb) / (3.0 * g[i]);
        slopes.push((ja, jb));
    }
    // φ' = -J/g; φ cell averages by exact integration, mean removed.
    let mut phi_edge = 0.0;
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let (ja, jb) = slopes[i];
        let h = w[i];
        // average over the cell of φ(a) - ∫_a^x J/g
        let avg = phi_edge - h * (2.0 * ja + jb) / (6.0 * g[i]);
        phi.push(avg);
        phi_edge -= h * 0.5 * (ja + jb) / g[i];
    }
    let area: f64 = w.iter().sum();
    let mean = phi.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>() / area;
    phi.iter_mut().for_each(|p| *p -= mean);
    Ok(SurrogateSolution { value, phi: GridFn::new(grid.clone(), phi)? })
}

fn solve_2d(grid: &Grid, f: &Density, g: &Density) -> Result<SurrogateSolution> {
    grid.ensure_periodic()?;
    let coeff: Vec<Tensor> = g.values().iter().map(|&v| [v, 0.0, v]).collect();
    let r: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a - b).collect();
    if r.iter().all(|v| *v == 0.0) {
        return Ok(SurrogateSolution { value: 0.0, phi: GridFn::zeros(grid) });
    }
    let (phi, _) = solve_divergence(grid, &coeff, &r, SOLVE_RTOL)?;
    let phi = GridFn::new(grid.clone(), phi)?;
    let value = phi.dot(&GridFn::new(grid.clone(), r)?)?;
    Ok(SurrogateSolution { value, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_density, Convention};
    use crate::transport1d::w2_1d;

    fn gauss(g: &Grid, m: f64) -> Density {
        make_density(&GridFn::from_fn(g, |x, _| (-(x - m) * (x - m) / 2.0).exp()), 1.0, 1e-10).unwrap()
    }

    #[test]
    fn zero_for_equal() {
        let g = Grid::new_1d(-8.0, 8.0, 256, Convention::Endpoint).unwrap();
        let f = gauss(&g, 0.0);
        assert_eq!(weighted_hm1_surrogate(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn close_gaussians_match_w2() {
        let g = Grid::new_1d(-10.0, 10.0, 4001, Convention::Endpoint).unwrap();
        let f = gauss(&g, 0.0);
        let h = gauss(&g, 1e-2);
        let a = weighted_hm1_surrogate(&f, &h).unwrap();
        let b = w2_1d(&f, &h).unwrap();
        assert!((a - b).abs() / b < 1e-2, "{a} vs {b}");
    }

    #[test]
    fn phi_is_derivative_of_half_value() {
        let g = Grid::new_1d(0.0, 1.0, 64, Convention::Periodic).unwrap();
        let f = make_density(&GridFn::from_fn(&g, |x, _| 1.0 + 0.3 * (std::f64::consts::TAU * x).sin()), 1.0, 0.0).unwrap();
        let h = make_density(&GridFn::from_fn(&g, |x, _| 1.0 + 0.2 * (12.0 * x).cos()), 1.0, 0.0).unwrap();
        let sol = surrogate_solve(&f, &h).unwrap();
        let dir = GridFn::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * 3.0 * x).cos());
        let eps = 1e-5;
        let fp = Density::new(f.base().zip_map(&dir, |a, b| a + eps * b).unwrap()).unwrap();
        let fm = Density::new(f.base().zip_map(&dir, |a, b| a - eps * b).unwrap()).unwrap();
        let fd = 0.25 * (weighted_hm1_surrogate(&fp, &h).unwrap() - weighted_hm1_surrogate(&fm, &h).unwrap()) / eps;
        let an = sol.phi.dot(&dir).unwrap();
        assert!((fd - an).abs() < 1e-8 * an.abs().max(1e-3), "{fd} vs {an}");
    }
}
