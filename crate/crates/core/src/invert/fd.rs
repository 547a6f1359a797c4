//! Central-difference check of model gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::descent::{objective_and_gradient, objective_at};
use super::metric::{MetricOptions, MismatchSpec};
use super::model::ForwardModel;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};

/// Number of random low-order modes per axis in a field direction.
const DIRECTION_MODES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdRow {
    pub finite_difference: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub eps: f64,
    pub rows: Vec<FdRow>,
}

impl FdReport {
    pub fn max_relative_error(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_error).fold(0.0, f64::max)
    }
}

/// Smooth random field: a few random cosines per axis, mean removed in the
/// grid quadrature and scaled to unit norm.
fn field_direction(grid: &Grid, rng: &mut ChaCha8Rng, zero_mean: bool) -> Vec<f64> {
    let mut coef = Vec::new();
    for _ in 0..grid.dim() {
        let axis: Vec<(f64, f64)> =
            (1..=DIRECTION_MODES).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))).collect();
        coef.push(axis);
    }
    let lo = [grid.lo(0), if grid.dim() == 2 { grid.lo(1) } else { 0.0 }];
    let len = [grid.length(0), if grid.dim() == 2 { grid.length(1) } else { 1.0 }];
    let eval_axis = |a: usize, x: f64| -> f64 {
        coef[a]
            .iter()
            .enumerate()
            .map(|(k, (c, p))| c * (std::f64::consts::TAU * (k + 1) as f64 * (x - lo[a]) / len[a] + p).cos() / (k + 1) as f64)
            .sum()
    };
    let f = GridFn::from_fn(grid, |x, y| {
        let fx = eval_axis(0, x);
        if grid.dim() == 2 {
            fx + eval_axis(1, y) + fx * eval_axis(1, y)
        } else {
            fx
        }
    });
    let w = grid.weights();
    let total: f64 = w.iter().sum();
    let mut v = f.into_values();
    if zero_mean {
        let mean = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / total;
        v.iter_mut().for_each(|a| *a -= mean);
    }
    let norm = v.iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn vector_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// Compare `⟨∇Φ, d⟩` with `(Φ(m + εd) - Φ(m - εd)) / 2ε` along seeded random
/// directions (zero-mean smooth fields for field models).
pub fn fd_gradient(
    model: &dyn ForwardModel,
    spec: &MismatchSpec,
    m: &[f64],
    g: &GridFn,
    directions: usize,
    eps: f64,
    seed: u64,
) -> Result<FdReport> {
    fd_gradient_with(model, spec, m, g, directions, eps, seed, &MetricOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn fd_gradient_with(
    model: &dyn ForwardModel,
    spec: &MismatchSpec,
    m: &[f64],
    g: &GridFn,
    directions: usize,
    eps: f64,
    seed: u64,
    opts: &MetricOptions,
) -> Result<FdReport> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidInput(format!("finite-difference step must lie in [1e-7, 1e-3], got {eps}")));
    }
    let (_, grad) = objective_and_gradient(model, spec, m, g, opts)?;
    let w = model.param_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(directions);
    for _ in 0..directions {
        let d = match model.param_grid() {
            Some(grid) => field_direction(grid, &mut rng, model.zero_mean_directions()),
            None => vector_direction(model.param_len(), &mut rng),
        };
        let plus: Vec<f64> = m.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = m.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let fd = (objective_at(model, spec, &plus, g, opts)? - objective_at(model, spec, &minus, g, opts)?) / (2.0 * eps);
        let analytic: f64 = grad.iter().zip(&d).zip(&w).map(|((a, b), c)| a * b * c).sum();
        let scale = fd.abs().max(analytic.abs());
        let relative_error = if scale > 0.0 { (fd - analytic).abs() / scale } else { 0.0 };
        rows.push(FdRow { finite_difference: fd, analytic, relative_error });
    }
    Ok(FdReport { eps, rows })
}
