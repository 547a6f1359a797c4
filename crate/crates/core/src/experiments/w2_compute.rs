//! `W2^2` between translated convolution kernels, and a Monge-Ampère check on
//! smooth periodic pairs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::common::require;
use crate::error::Result;
use crate::grid::{make_density, Convention, Density, Grid, GridFn};
use crate::models::KernelSpec;
use crate::transport1d::w2_1d;
use crate::transport_nd::{push_forward_l1, solve_monge_ampere_2d};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSourceConfig {
    /// Nodes of the endpoint grid on `[-half_width, half_width]`.
    pub n: usize,
    pub half_width: f64,
    pub laplace_ell: f64,
    /// Truncation radius of the inverse-distance kernel.
    pub inverse_distance_radius: f64,
    pub pairs: usize,
    /// Source positions are grid nodes within `[-offset_max, offset_max]`.
    pub offset_max: f64,
}

impl Default for PointSourceConfig {
    fn default() -> Self {
        Self { n: 1201, half_width: 30.0, laplace_ell: 1.0, inverse_distance_radius: 8.0, pairs: 10, offset_max: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaCheckConfig {
    pub enabled: bool,
    /// Nodes per axis on the periodic square `[-1, 1]^2`.
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub pairs: usize,
}

impl Default for MaCheckConfig {
    fn default() -> Self {
        Self { enabled: true, n: 64, tol: 1e-6, max_iter: 2000, pairs: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct W2ComputeConfig {
    pub point_source: PointSourceConfig,
    pub monge_ampere: MaCheckConfig,
}

impl W2ComputeConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.point_source;
        require(p.n >= 16, || "point_source.n must be at least 16".into())?;
        require(p.laplace_ell > 0.0, || "laplace_ell must be positive".into())?;
        require(p.inverse_distance_radius > 0.0, || "inverse_distance_radius must be positive".into())?;
        require(p.pairs > 0, || "need at least one pair".into())?;
        require(p.offset_max > 0.0 && p.offset_max + p.inverse_distance_radius < p.half_width, || {
            "offsets plus kernel radius must stay inside the domain".into()
        })?;
        let m = &self.monge_ampere;
        if m.enabled {
            require(m.n >= 8 && m.n.is_multiple_of(2), || "monge_ampere.n must be even and at least 8".into())?;
            require(m.tol > 0.0 && m.max_iter > 0 && m.pairs > 0, || "monge_ampere tol, max_iter and pairs must be positive".into())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSourceRow {
    pub kernel: String,
    pub a: f64,
    pub b: f64,
    pub w2_sq: f64,
    pub expected: f64,
    pub abs_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaCheckRow {
    pub pair: usize,
    pub residual: f64,
    pub push_forward_l1: f64,
    pub iterations: usize,
    /// Largest `|T(x) - x|` when the target equals the source, in cells.
    pub identity_max_displacement_cells: f64,
}

/// Unit-mass samples of `K(x - a)` on the grid.
fn translated_kernel(grid: &Grid, k: &KernelSpec, a: f64) -> Result<Density> {
    let eval = k.evaluator(1)?;
    make_density(&GridFn::from_fn(grid, |x, _| eval(x - a, 0.0)), 1.0, 0.0)
}

pub fn point_source_study(cfg: &PointSourceConfig, seed: u64) -> Result<Vec<PointSourceRow>> {
    let l = cfg.half_width;
    let grid = Grid::new_1d(-l, l, cfg.n, Convention::Endpoint)?;
    let h = grid.h(0);
    let kmax = (cfg.offset_max / h).floor() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<(f64, f64)> = (0..cfg.pairs)
        .map(|_| (rng.random_range(-kmax..=kmax) as f64 * h, rng.random_range(-kmax..=kmax) as f64 * h))
        .collect();
    // cut halfway between nodes so every translate keeps the same samples
    let radius = ((cfg.inverse_distance_radius / h).floor() + 0.5) * h;
    let kernels = [
        ("laplace", KernelSpec::laplace(cfg.laplace_ell)),
        ("inverse_distance", KernelSpec::inverse_distance().truncated(radius)),
    ];
    let mut rows = Vec::new();
    for (name, k) in &kernels {
        for &(a, b) in &offsets {
            let w2_sq = w2_1d(&translated_kernel(&grid, k, a)?, &translated_kernel(&grid, k, b)?)?;
            let expected = (a - b) * (a - b);
            rows.push(PointSourceRow { kernel: name.to_string(), a, b, w2_sq, expected, abs_error: (w2_sq - expected).abs() });
        }
    }
    Ok(rows)
}

/// Smooth positive periodic density on `[-1, 1]^2` with random amplitudes and phases.
pub fn smooth_periodic_density(grid: &Grid, rng: &mut ChaCha8Rng) -> Result<Density> {
    let a = rng.random_range(0.2..0.6);
    let (p, q) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    make_density(
        &GridFn::from_fn(grid, |x, y| {
            1.0 + a * (PI * x + p).sin() * (PI * y).cos() + 0.5 * a * (PI * (x + y) - p).cos() + 0.3 * a * (2.0 * PI * y + q).sin()
        }),
        1.0,
        0.0,
    )
}

pub fn monge_ampere_check(cfg: &MaCheckConfig, seed: u64) -> Result<Vec<MaCheckRow>> {
    let grid = Grid::new_2d([-1.0, -1.0], [1.0, 1.0], [cfg.n, cfg.n], Convention::Periodic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cfg.pairs);
    for pair in 0..cfg.pairs {
        let f = smooth_periodic_density(&grid, &mut rng)?;
        let g = smooth_periodic_density(&grid, &mut rng)?;
        let sol = solve_monge_ampere_2d(&f, &g, cfg.tol, cfg.max_iter)?;
        let pf = push_forward_l1(&sol, &f, &g)?;
        let same = solve_monge_ampere_2d(&f, &f, cfg.tol, cfg.max_iter)?;
        let disp = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                (same.tx.values()[k] - p[0]).abs().max((same.ty.values()[k] - p[1]).abs())
            })
            .fold(0.0, f64::max);
        rows.push(MaCheckRow {
            pair,
            residual: sol.residual,
            push_forward_l1: pf,
            iterations: sol.diagnostics.iterations,
            identity_max_displacement_cells: disp / grid.h(0),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_source_is_exact_for_node_offsets() {
        let cfg = PointSourceConfig { n: 301, pairs: 3, ..PointSourceConfig::default() };
        let rows = point_source_study(&cfg, 5).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.abs_error < 1e-6), "{rows:?}");
    }

    #[test]
    fn validation() {
        let mut cfg = W2ComputeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.point_source.offset_max = 25.0;
        assert!(cfg.validate().is_err());
    }
}
