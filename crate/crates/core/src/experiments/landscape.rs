//! Misfit surfaces of a translated two-bump profile under `L2`, `Ḣ^{-1}`
//! and `W2^2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::common::{linspace, require, second_differences, strict_local_minima};
use crate::error::Result;
use crate::fourier;
use crate::grid::{Convention, Grid, GridFn};
use crate::par;
use crate::transport_nd::{w2_affine, AffineParams, MomentPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Bump centers of the reference profile.
    pub centers: [[f64; 2]; 2],
    /// Offsets span `[-offset_max, offset_max]` on each axis.
    pub offset_max: f64,
    /// Offsets per axis.
    pub offsets: usize,
    /// Nodes per axis of the periodic quadrature grid.
    pub grid_n: usize,
    /// The grid covers `[-half_width, half_width]^2`.
    pub half_width: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self { centers: [[-2.0, -2.0], [2.0, 2.0]], offset_max: 10.0, offsets: 81, grid_n: 128, half_width: 20.0 }
    }
}

impl LandscapeConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.offset_max > 0.0 && self.offset_max.is_finite(), || "offset_max must be positive".into())?;
        require(self.offsets >= 3, || "need at least 3 offsets per axis".into())?;
        require(self.grid_n >= 16 && self.grid_n.is_multiple_of(2), || "grid_n must be even and at least 16".into())?;
        let reach = self.centers.iter().flatten().map(|c| c.abs()).fold(0.0, f64::max) + self.offset_max;
        require(self.half_width > reach + 6.0, || {
            format!("half_width {} leaves shifted bumps too close to the boundary (need > {})", self.half_width, reach + 6.0)
        })
    }

    /// `φ(x) = (1/4π) Σ_c e^{-|x - c|^2 / 2}`, unit mass.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        self.centers
            .iter()
            .map(|c| (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / 2.0).exp())
            .sum::<f64>()
            / (4.0 * std::f64::consts::PI)
    }

    pub fn moments(&self) -> MomentPair {
        let c = &self.centers;
        let m1 = DVector::from_vec(vec![(c[0][0] + c[1][0]) / 2.0, (c[0][1] + c[1][1]) / 2.0]);
        let mut second = DMatrix::identity(2, 2);
        for p in c {
            let v = DVector::from_column_slice(p);
            second += &v * v.transpose() * 0.5;
        }
        MomentPair { m1, m2: second.trace(), second: Some(second), mass: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub sx: f64,
    pub sy: f64,
    pub l2: f64,
    pub hm1: f64,
    pub w2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeDiagnostics {
    pub l2_local_minima: usize,
    pub hm1_local_minima: usize,
    pub w2_local_minima: usize,
    pub w2_min_second_difference: f64,
    pub l2_min_second_difference: f64,
    pub hm1_min_second_difference: f64,
    /// `max_t |W2^2(t, t) - 2t^2|`.
    pub w2_diagonal_max_error: f64,
    pub origin_max_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeResult {
    pub surface: Vec<LandscapePoint>,
    pub diagonal: Vec<LandscapePoint>,
    pub diagnostics: LandscapeDiagnostics,
}

/// Squared-modulus tables of the profile spectrum: `(ξ, w|φ̂|^2, w|φ̂|^2/|ξ|^2)`
/// with the Parseval weight `w` folded in and negligible modes dropped.
fn spectral_table(cfg: &LandscapeConfig) -> Result<Vec<(f64, f64, f64, f64)>> {
    let l = cfg.half_width;
    let grid = Grid::new_2d([-l, -l], [l, l], [cfg.grid_n, cfg.grid_n], Convention::Periodic)?;
    let phi = GridFn::from_fn(&grid, |x, y| cfg.profile(x, y));
    let spec = fourier::forward(&grid, phi.values())?;
    let pw = fourier::parseval_weight(&grid);
    let top = spec.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    Ok(fourier::frequency_pairs(&grid)
        .into_iter()
        .zip(spec)
        .filter(|((x, y), c)| (*x != 0.0 || *y != 0.0) && c.norm_sqr() > 1e-32 * top)
        .map(|((x, y), c)| {
            let e = pw * c.norm_sqr();
            (x, y, e, e / (x * x + y * y))
        })
        .collect())
}

/// Misfits between `φ(· - s)` and `φ`: `L2` and `Ḣ^{-1}` from the phase
/// factor `2(1 - cos ξ·s)`, `W2^2` from the affine closed form.
pub fn landscape_scan(cfg: &LandscapeConfig) -> Result<LandscapeResult> {
    cfg.validate()?;
    let table = spectral_table(cfg)?;
    let moments = cfg.moments();
    let reference = AffineParams::translation(1.0, &[0.0, 0.0]);
    let eval = |sx: f64, sy: f64| -> Result<LandscapePoint> {
        let (mut l2, mut hm1) = (0.0, 0.0);
        for &(x, y, e, eh) in &table {
            let p = 2.0 * (1.0 - (x * sx + y * sy).cos());
            l2 += e * p;
            hm1 += eh * p;
        }
        let w2 = w2_affine(&moments, &AffineParams::translation(1.0, &[sx, sy]), &reference)?;
        Ok(LandscapePoint { sx, sy, l2, hm1, w2 })
    };
    let ts = linspace(-cfg.offset_max, cfg.offset_max, cfg.offsets);
    let n = ts.len();
    let surface = par::map_range(n * n, |k| eval(ts[k % n], ts[k / n])).into_iter().collect::<Result<Vec<_>>>()?;
    let diagonal: Vec<LandscapePoint> = (0..n).map(|i| surface[i * n + i]).collect();

    let col = |f: fn(&LandscapePoint) -> f64| diagonal.iter().map(f).collect::<Vec<f64>>();
    let (l2, hm1, w2) = (col(|p| p.l2), col(|p| p.hm1), col(|p| p.w2));
    let min = |v: &[f64]| second_differences(v).into_iter().fold(f64::INFINITY, f64::min);
    let origin = eval(0.0, 0.0)?;
    let diagnostics = LandscapeDiagnostics {
        l2_local_minima: strict_local_minima(&l2).len(),
        hm1_local_minima: strict_local_minima(&hm1).len(),
        w2_local_minima: strict_local_minima(&w2).len(),
        w2_min_second_difference: min(&w2),
        l2_min_second_difference: min(&l2),
        hm1_min_second_difference: min(&hm1),
        w2_diagonal_max_error: diagonal.iter().map(|p| (p.w2 - 2.0 * p.sx * p.sx).abs()).fold(0.0, f64::max),
        origin_max_value: origin.l2.abs().max(origin.hm1.abs()).max(origin.w2.abs()),
    };
    Ok(LandscapeResult { surface, diagonal, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_matches_direct_quadrature() {
        let cfg = LandscapeConfig { offsets: 5, ..LandscapeConfig::default() };
        let table = spectral_table(&cfg).unwrap();
        let s = [1.3, -0.4];
        let spectral: f64 = table.iter().map(|&(x, y, e, _)| e * 2.0 * (1.0 - (x * s[0] + y * s[1]).cos())).sum();
        let h = 0.05;
        let m = (40.0 / h) as usize;
        let mut direct = 0.0;
        for j in 0..m {
            for i in 0..m {
                let (x, y) = (-20.0 + (i as f64 + 0.5) * h, -20.0 + (j as f64 + 0.5) * h);
                direct += (cfg.profile(x - s[0], y - s[1]) - cfg.profile(x, y)).powi(2) * h * h;
            }
        }
        assert!((spectral - direct).abs() < 1e-6 * direct, "{spectral} {direct}");
    }

    #[test]
    fn small_scan_shapes() {
        let cfg = LandscapeConfig { offsets: 21, grid_n: 64, ..LandscapeConfig::default() };
        let r = landscape_scan(&cfg).unwrap();
        assert_eq!(r.surface.len(), 441);
        assert!(r.diagnostics.origin_max_value < 1e-12);
        assert!(r.diagnostics.w2_diagonal_max_error < 1e-9);
        assert!(LandscapeConfig { half_width: 10.0, ..cfg }.validate().is_err());
    }
}
