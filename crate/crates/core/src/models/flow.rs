//! Uniform-flow translation `ψ(λ, x) = φ(x - λv)` and axis projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{Density, Grid, GridFn};

/// Samples above this fraction of the peak count as support.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub v: Vec<f64>,
    pub lambda: f64,
}

impl FlowParams {
    pub fn shift(a: &[f64]) -> Self {
        Self { v: a.to_vec(), lambda: 1.0 }
    }

    fn displacement(&self, dim: usize) -> Result<[f64; 2]> {
        if self.v.len() != dim {
            return Err(Error::InvalidInput(format!("flow vector has {} entries, grid has {dim} axes", self.v.len())));
        }
        if !self.lambda.is_finite() || self.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flow parameters must be finite".into()));
        }
        let mut a = [0.0; 2];
        for i in 0..dim {
            a[i] = self.lambda * self.v[i];
        }
        Ok(a)
    }
}

fn check_support(phi: &Density, a: [f64; 2]) -> Result<()> {
    let grid = phi.grid();
    let thr = SUPPORT_TOL * phi.base().max();
    for (k, &v) in phi.values().iter().enumerate() {
        if v <= thr {
            continue;
        }
        let p = grid.point(k);
        for axis in 0..grid.dim() {
            let y = p[axis] + a[axis];
            if y < grid.lo(axis) || y > grid.hi(axis) {
                return Err(Error::SupportOverflow);
            }
        }
    }
    Ok(())
}

/// Sample of `values` at `x - a` by multilinear interpolation, zero outside.
fn linear_shift(grid: &Grid, values: &[f64], a: [f64; 2]) -> Vec<f64> {
    let nx = grid.n(0);
    let ny = grid.n(1);
    let axis_stencil = |axis: usize, i: usize| -> ([usize; 2], [f64; 2]) {
        let n = grid.n(axis);
        let s = i as f64 - a[axis] / grid.h(axis);
        let base = s.floor();
        let t = s - base;
        let b = base as i64;
        let idx = |k: i64| if k >= 0 && (k as usize) < n { k as usize } else { usize::MAX };
        ([idx(b), idx(b + 1)], [1.0 - t, t])
    };
    let sx: Vec<_> = (0..nx).map(|i| axis_stencil(0, i)).collect();
    let sy: Vec<_> = if grid.dim() == 2 { (0..ny).map(|j| axis_stencil(1, j)).collect() } else { vec![([0, usize::MAX], [1.0, 0.0])] };
    let mut out = vec![0.0; grid.len()];
    for j in 0..ny {
        let (jy, wy) = sy[j];
        for i in 0..nx {
            let (ix, wx) = sx[i];
            let mut s = 0.0;
            for b in 0..2 {
                if jy[b] == usize::MAX || wy[b] == 0.0 {
                    continue;
                }
                for c in 0..2 {
                    if ix[c] == usize::MAX || wx[c] == 0.0 {
                        continue;
                    }
                    s += wy[b] * wx[c] * values[jy[b] * nx + ix[c]];
                }
            }
            out[j * nx + i] = s;
        }
    }
    out
}

/// Translate `phi` by `λv`: spectral phase shift on periodic grids, linear
/// interpolation on endpoint grids. Negatives from ringing are clamped and
/// the original mass restored.
pub fn flow_translate(phi: &Density, p: &FlowParams) -> Result<Density> {
    let grid = phi.grid();
    let a = p.displacement(grid.dim())?;
    if a == [0.0, 0.0] {
        return Ok(phi.clone());
    }
    check_support(phi, a)?;
    let shifted = if grid.is_periodic() {
        fourier::shift(grid, phi.values(), a)?
    } else {
        linear_shift(grid, phi.values(), a)
    };
    let clamped: Vec<f64> = shifted.into_iter().map(|v| v.max(0.0)).collect();
    Density::new(phi.base().with_values(clamped)?)?.with_mass(phi.mass())
}

/// Marginal of a 2D density on the kept axis (quadrature over the other).
pub fn project_axes(phi: &Density, keep_axis: usize) -> Result<Density> {
    let grid = phi.grid();
    if grid.dim() != 2 || keep_axis > 1 {
        return Err(Error::InvalidInput("projection needs a 2D density and axis 0 or 1".into()));
    }
    let (nx, ny) = (grid.n(0), grid.n(1));
    let drop = 1 - keep_axis;
    let w = grid.axis_weights(drop);
    let n_keep = grid.n(keep_axis);
    let mut out = vec![0.0; n_keep];
    for j in 0..ny {
        for i in 0..nx {
            let v = phi.values()[j * nx + i];
            let (k, d) = if keep_axis == 0 { (i, j) } else { (j, i) };
            out[k] += v * w[d];
        }
    }
    let g1 = Grid::new_1d(grid.lo(keep_axis), grid.hi(keep_axis), n_keep, grid.convention())?;
    Density::new(GridFn::new(g1, out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_density, mass, Convention};
    use crate::transport1d::w2_1d;

    fn bump(g: &Grid, c: f64) -> Density {
        make_density(&GridFn::from_fn(g, |x, _| (-(x - c) * (x - c) * 8.0).exp()), 1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_flow_is_identity() {
        let g = Grid::new_1d(-3.0, 3.0, 101, Convention::Endpoint).unwrap();
        let d = bump(&g, 0.0);
        assert_eq!(flow_translate(&d, &FlowParams { v: vec![1.0], lambda: 0.0 }).unwrap(), d);
    }

    #[test]
    fn translation_distance_is_shift_squared() {
        let g = Grid::new_1d(-4.0, 4.0, 1601, Convention::Endpoint).unwrap();
        let d = bump(&g, -0.5);
        let p = FlowParams { v: vec![2.0], lambda: 0.6173 };
        let s = flow_translate(&d, &p).unwrap();
        assert!((mass(s.base()) - d.mass()).abs() < 1e-10);
        let w = w2_1d(&d, &s).unwrap();
        assert!((w - (1.2346f64).powi(2)).abs() < 1e-4, "{w}");
    }

    #[test]
    fn periodic_translations_compose() {
        let g = Grid::new_1d(-4.0, 4.0, 128, Convention::Periodic).unwrap();
        let d = bump(&g, -1.0);
        let ab = flow_translate(&flow_translate(&d, &FlowParams::shift(&[0.3])).unwrap(), &FlowParams::shift(&[0.45])).unwrap();
        let c = flow_translate(&d, &FlowParams::shift(&[0.75])).unwrap();
        for (x, y) in ab.values().iter().zip(c.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn overflow_detected() {
        let g = Grid::new_1d(-1.0, 1.0, 64, Convention::Endpoint).unwrap();
        let d = bump(&g, 0.6);
        assert!(matches!(flow_translate(&d, &FlowParams::shift(&[0.8])), Err(Error::SupportOverflow)));
    }

    #[test]
    fn product_marginal() {
        let g = Grid::new_2d([-3.0, -3.0], [3.0, 3.0], [61, 61], Convention::Endpoint).unwrap();
        let f1 = |x: f64| (-(x - 0.2) * (x - 0.2)).exp();
        let f2 = |y: f64| 1.0 + 0.2 * y.cos();
        let d = Density::new(GridFn::from_fn(&g, |x, y| f1(x) * f2(y))).unwrap();
        let p = project_axes(&d, 0).unwrap();
        let c: f64 = g.axis_weights(1).iter().zip(g.coords(1)).map(|(w, y)| w * f2(y)).sum();
        for (x, v) in g.coords(0).iter().zip(p.values()) {
            assert!((v - c * f1(*x)).abs() < 1e-10);
        }
        assert!((p.mass() - d.mass()).abs() < 1e-12 * d.mass());
    }
}
