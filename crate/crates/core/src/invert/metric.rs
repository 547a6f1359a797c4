//! Mismatch functionals and their data-space gradient kernels.
//!
//! A kernel `k` is the Riesz representative of the derivative in the
//! quadrature inner product of the data grid: `dΦ(f)[δf] = Σ_j w_j k_j δf_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Density, GridFn, DEFAULT_FLOOR};
use crate::sobolev::{hs_mismatch, precondition, SobolevSpec};
use crate::transport1d::{w2_1d, w2_gradient_1d};
use crate::transport_nd::{solve_monge_ampere_2d_with, surrogate_solve, w2_kernel_from, MaConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MismatchSpec {
    L2,
    Hs { s: f64 },
    DotHs { s: f64 },
    WeightedHs { s: f64 },
    W2,
    SurrogateHm1,
}

impl MismatchSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MismatchSpec::Hs { s } | MismatchSpec::DotHs { s } | MismatchSpec::WeightedHs { s } if !s.is_finite() => {
                Err(Error::InvalidInput(format!("Sobolev order must be finite, got {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in file names and tables.
    pub fn label(&self) -> String {
        match *self {
            MismatchSpec::L2 => "l2".into(),
            MismatchSpec::Hs { s } => format!("hs{s}"),
            MismatchSpec::DotHs { s } => format!("doths{s}"),
            MismatchSpec::WeightedHs { s } => format!("whs{s}"),
            MismatchSpec::W2 => "w2".into(),
            MismatchSpec::SurrogateHm1 => "surrogate".into(),
        }
    }

    /// Metrics that compare unit-agnostic densities and so rescale the
    /// prediction to the data mass first.
    pub fn needs_normalization(&self) -> bool {
        match *self {
            MismatchSpec::W2 | MismatchSpec::SurrogateHm1 => true,
            MismatchSpec::DotHs { s } => s < 0.0,
            _ => false,
        }
    }
}

/// Knobs shared by every metric evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Rescale predictions to the data mass before mass-sensitive metrics.
    pub normalize: bool,
    /// Relative floor for `ω = 1/g` and for the `W2` source positivity.
    pub floor: f64,
    /// Monge-Ampère residual tolerance for 2D `W2`.
    pub ma_tol: f64,
    pub ma_max_iter: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { normalize: true, floor: DEFAULT_FLOOR, ma_tol: 1e-9, ma_max_iter: 2000 }
    }
}

/// Objective value and Euclidean gradient `∂Φ/∂f_j` of one metric at a fixed
/// (already normalized) prediction.
struct Raw {
    value: f64,
    euclid: Vec<f64>,
}

pub fn evaluate_objective(spec: &MismatchSpec, f_pred: &GridFn, g: &GridFn) -> Result<f64> {
    evaluate_objective_with(spec, f_pred, g, &MetricOptions::default())
}

pub fn evaluate_objective_with(spec: &MismatchSpec, f_pred: &GridFn, g: &GridFn, opts: &MetricOptions) -> Result<f64> {
    data_kernel_impl(spec, f_pred, g, opts, false).map(|(v, _)| v)
}

/// Objective value and gradient kernel.
pub fn data_kernel(spec: &MismatchSpec, f_pred: &GridFn, g: &GridFn, opts: &MetricOptions) -> Result<(f64, GridFn)> {
    let (v, k) = data_kernel_impl(spec, f_pred, g, opts, true)?;
    Ok((v, k.expect("kernel requested")))
}

fn data_kernel_impl(
    spec: &MismatchSpec,
    f: &GridFn,
    g: &GridFn,
    opts: &MetricOptions,
    want_kernel: bool,
) -> Result<(f64, Option<GridFn>)> {
    spec.validate()?;
    let grid = f.grid();
    grid.ensure_same(g.grid())?;
    let n = grid.len();
    let w = grid.weights();
    // mass weights: native quadrature for transport metrics, the uniform
    // cell of the periodized view otherwise
    let cell = uniform_cell(grid);
    let mu: Vec<f64> = match spec {
        MismatchSpec::W2 | MismatchSpec::SurrogateHm1 if !periodized_transport(grid) => w.clone(),
        _ => vec![cell; n],
    };
    let (ft, c, mf) = if spec.needs_normalization() && opts.normalize {
        let mf: f64 = f.values().iter().zip(&mu).map(|(a, b)| a * b).sum();
        let mg: f64 = g.values().iter().zip(&mu).map(|(a, b)| a * b).sum();
        if !(mf > 0.0) || !(mg > 0.0) {
            return Err(Error::MassMismatch(format!("cannot normalize masses {mf:e} -> {mg:e}")));
        }
        let c = mg / mf;
        (f.scale(c), c, mf)
    } else {
        (f.clone(), 1.0, 1.0)
    };
    let raw = raw_metric(spec, &ft, g, opts, want_kernel)?;
    if !want_kernel {
        return Ok((raw.value, None));
    }
    let mut e = raw.euclid;
    if spec.needs_normalization() && opts.normalize {
        // Φ(f) = Ψ(c(f) f) with c = M_g / M_f
        let ef: f64 = e.iter().zip(f.values()).map(|(a, b)| a * b).sum();
        for j in 0..n {
            e[j] = c * e[j] - c / mf * ef * mu[j];
        }
    }
    let k: Vec<f64> = e.iter().zip(&w).map(|(a, b)| a / b).collect();
    Ok((raw.value, Some(f.with_values(k)?)))
}

fn uniform_cell(grid: &crate::grid::Grid) -> f64 {
    (0..grid.dim()).map(|a| grid.h(a)).product()
}

/// 2D transport solvers are periodic; endpoint data is transported on its
/// periodized view.
fn periodized_transport(grid: &crate::grid::Grid) -> bool {
    grid.dim() == 2 && !grid.is_periodic()
}

/// Sobolev metrics run on the periodized view of endpoint data.
fn spectral_view(f: &GridFn) -> GridFn {
    if f.grid().is_periodic() {
        f.clone()
    } else {
        f.periodized()
    }
}

fn raw_metric(spec: &MismatchSpec, f: &GridFn, g: &GridFn, opts: &MetricOptions, want: bool) -> Result<Raw> {
    let grid = f.grid();
    let cell = uniform_cell(grid);
    match *spec {
        MismatchSpec::L2 => {
            let d = f.sub(g)?;
            let value = 0.5 * cell * d.values().iter().map(|v| v * v).sum::<f64>();
            Ok(Raw { value, euclid: if want { d.values().iter().map(|v| cell * v).collect() } else { vec![] } })
        }
        MismatchSpec::Hs { s } | MismatchSpec::DotHs { s } => {
            let homogeneous = matches!(spec, MismatchSpec::DotHs { .. });
            let (fp, gp) = (spectral_view(f), spectral_view(g));
            let sob = SobolevSpec { s, homogeneous, weight: None };
            let value = hs_mismatch(&fp, &gp, &sob)?;
            let euclid = if want {
                let d = fp.sub(&gp)?;
                precondition(&d, 2.0 * s, homogeneous)?.values().iter().map(|v| cell * v).collect()
            } else {
                vec![]
            };
            Ok(Raw { value, euclid })
        }
        MismatchSpec::WeightedHs { s } => {
            let (fp, gp) = (spectral_view(f), spectral_view(g));
            let gmax = gp.max();
            if !(gmax > 0.0) {
                return Err(Error::NonpositiveWeight(gmax));
            }
            let lo = opts.floor * gmax;
            let omega = Density::new(gp.map(|v| 1.0 / v.max(lo)))?;
            let d = fp.sub(&gp)?;
            let p = precondition(&d, s, false)?;
            let wp: Vec<f64> = p.values().iter().zip(omega.values()).map(|(a, o)| a * o).collect();
            let value = 0.5 * cell * wp.iter().map(|v| v * v).sum::<f64>();
            let euclid = if want {
                let inner = p.with_values(wp.iter().zip(omega.values()).map(|(a, o)| a * o).collect())?;
                precondition(&inner, s, false)?.values().iter().map(|v| cell * v).collect()
            } else {
                vec![]
            };
            Ok(Raw { value, euclid })
        }
        MismatchSpec::W2 => {
            let (fd, gd) = densities(f, g)?;
            let w = grid.weights();
            match grid.dim() {
                1 => {
                    let value = 0.5 * w2_1d(&fd, &gd)?;
                    let euclid = if want { euclid_from_kernel(&w2_gradient_1d(&fd, &gd)?, &w) } else { vec![] };
                    Ok(Raw { value, euclid })
                }
                _ => {
                    let (fd, gd) = densities(&spectral_view(f), &spectral_view(g))?;
                    let w = fd.grid().weights();
                    let cfg = MaConfig { tol: opts.ma_tol, max_iter: opts.ma_max_iter, ..MaConfig::default() };
                    let sol = solve_monge_ampere_2d_with(&fd, &gd, &cfg)?;
                    let value = 0.5 * gd.mass() * sol.transport_cost(&fd);
                    let euclid = if want { euclid_from_kernel(&w2_kernel_from(&sol, &fd, &gd)?, &w) } else { vec![] };
                    Ok(Raw { value, euclid })
                }
            }
        }
        MismatchSpec::SurrogateHm1 => {
            let (fd, gd) = if periodized_transport(grid) { densities(&spectral_view(f), &spectral_view(g))? } else { densities(f, g)? };
            let sol = surrogate_solve(&fd, &gd)?;
            let euclid = if want { euclid_from_kernel(&sol.phi, &fd.grid().weights()) } else { vec![] };
            Ok(Raw { value: 0.5 * sol.value, euclid })
        }
    }
}

fn euclid_from_kernel(k: &GridFn, w: &[f64]) -> Vec<f64> {
    k.values().iter().zip(w).map(|(a, b)| a * b).collect()
}

fn densities(f: &GridFn, g: &GridFn) -> Result<(Density, Density)> {
    if let Some(v) = f.values().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidInput(format!("transport metrics need a nonnegative prediction, found {v:e}")));
    }
    Ok((Density::new(f.clone())?, Density::new(g.clone())?))
}
